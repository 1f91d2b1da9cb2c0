#include "geonmpc/commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "geonmpc/errors.hpp"

namespace geonmpc {

namespace fs = std::filesystem;

Config resolve_config(const CommandOptions & opts, const std::string & default_preset)
{
  if (opts.config_path && opts.preset) { throw ConfigError("--config and --preset are mutually exclusive"); }
  Config c = opts.config_path ? load_config(*opts.config_path) : preset_config(opts.preset.value_or(default_preset));

  if (opts.scheme) {
    if (*opts.scheme == "both") {
      c.sim.schemes = {Scheme::Nmpc, Scheme::Fmnmpc};
    } else {
      try {
        c.sim.schemes = {parse_scheme(*opts.scheme)};
      } catch (const InvalidArgument & e) {
        throw ConfigError(e.what());
      }
    }
  }
  if (opts.seed) { c.certify.seed = *opts.seed; }
  if (opts.out_dir) {
    c.output_dir = *opts.out_dir;
  } else if (opts.env_out_dir && !opts.env_out_dir->empty()) {
    c.output_dir = *opts.env_out_dir;
  }
  c.validate();
  return c;
}

CertificateReport certify(const Config & c)
{
  CertificateReport r;
  r.gains = check_gain_conditions(c.spec.weights);
  r.steps = c.certify.steps;

  const Equilibrium & eq     = c.spec.equilibrium;
  const LinearizedModel hover = discretize_linear(linearize(eq.state(), eq.u_e, c.quad.body, c.spec.dt));
  r.rank_at_equilibrium       = controllability_rank(hover, r.steps, c.certify.rank_tol);
  r.rank_one_step_less = r.steps > 1 ? controllability_rank(hover, r.steps - 1, c.certify.rank_tol) : 0;

  std::mt19937_64 rng(c.certify.seed);
  r.random_states   = c.certify.random_states;
  r.min_random_rank = kStateDim;
  for (int i = 0; i < r.random_states; ++i) {
    const auto [x, u]    = sample_admissible(rng, c.quad);
    const LinearizedModel m = discretize_linear(linearize(x, u, c.quad.body, c.spec.dt));
    const int rank          = controllability_rank(m, r.steps, c.certify.rank_tol);
    r.min_random_rank       = std::min(r.min_random_rank, rank);
    if (rank == kStateDim) { ++r.random_full_rank; }
  }

  r.dissipativity = sample_dissipativity(c.spec, c.quad, c.certify.samples, c.certify.seed + 1, c.certify.slack);
  return r;
}

std::string certificate_to_json(const CertificateReport & r, int indent)
{
  const DissipativityReport & d = r.dissipativity;
  nlohmann::json j;
  j["pass"]  = r.pass();
  j["gains"] = {{"kv_kf", r.gains.kv_kf},
                {"komega_ktau", r.gains.komega_ktau},
                {"translational_margin", r.gains.translational_margin},
                {"rotational_margin", r.gains.rotational_margin},
                {"translational_ok", r.gains.translational_ok},
                {"rotational_ok", r.gains.rotational_ok}};
  j["controllability"] = {{"steps", r.steps},
                          {"rank_at_equilibrium", r.rank_at_equilibrium},
                          {"rank_one_step_less", r.rank_one_step_less},
                          {"random_states", r.random_states},
                          {"random_full_rank", r.random_full_rank},
                          {"min_random_rank", r.random_states > 0 ? r.min_random_rank : kStateDim},
                          {"pass", r.controllable()}};
  j["dissipativity"] = {{"samples", d.samples},
                        {"max_h1", d.max_h1},
                        {"max_h2", d.max_h2},
                        {"max_h3", d.max_h3},
                        {"max_h4", d.max_h4},
                        {"slack", d.slack},
                        {"violation_found", d.violation_found()},
                        {"pass", d.pass()}};
  return j.dump(indent);
}

namespace {

void write_file(const fs::path & path, const std::string & text)
{
  std::ofstream f(path);
  if (!f) { throw ConfigError("cannot write '" + path.string() + "'"); }
  f << text;
}

fs::path prepare_output_dir(const Config & c)
{
  const fs::path dir(c.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) { throw ConfigError("cannot create output directory '" + dir.string() + "': " + ec.message()); }
  return dir;
}

std::string file_stem(const std::string & name)
{
  std::string out = name;
  for (char & ch : out) {
    const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') || ch == '-' ||
                    ch == '_' || ch == '.';
    if (!ok) { ch = '_'; }
  }
  return out;
}

std::string fmt(double v, int prec = 4)
{
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

}  // namespace

int cmd_certify(const Config & c, std::ostream & out)
{
  const fs::path dir         = prepare_output_dir(c);
  const CertificateReport r  = certify(c);
  write_file(dir / "certificate.json", certificate_to_json(r) + "\n");

  auto flag = [](bool ok) { return ok ? "pass" : "FAIL"; };
  out << std::left << std::setw(34) << "check" << std::setw(28) << "value" << "result\n";
  out << std::setw(34) << "kv*kf >= 0.25" << std::setw(28) << fmt(r.gains.kv_kf, 6) << flag(r.gains.translational_ok)
      << '\n';
  out << std::setw(34) << "komega*ktau >= 0.25" << std::setw(28) << fmt(r.gains.komega_ktau, 6)
      << flag(r.gains.rotational_ok) << '\n';
  out << std::setw(34) << ("rank, " + std::to_string(r.steps) + " steps at equilibrium") << std::setw(28)
      << r.rank_at_equilibrium << flag(r.rank_at_equilibrium == kStateDim) << '\n';
  out << std::setw(34) << ("rank, " + std::to_string(r.steps - 1) + " steps at equilibrium") << std::setw(28)
      << r.rank_one_step_less << "info\n";
  out << std::setw(34) << "full rank at random states" << std::setw(28)
      << (std::to_string(r.random_full_rank) + "/" + std::to_string(r.random_states))
      << flag(r.random_full_rank == r.random_states) << '\n';
  out << std::setw(34) << "max dissipativity residual" << std::setw(28)
      << (fmt(r.dissipativity.max_residual(), 6) + " (" + std::to_string(r.dissipativity.samples) + " samples)")
      << flag(!r.dissipativity.violation_found()) << '\n';
  out << "certificate: " << (r.pass() ? "pass" : "FAIL") << '\n';
  return r.pass() ? kExitOk : kExitCertificateFailure;
}

int cmd_run(const Config & c, std::ostream & out)
{
  const fs::path dir                   = prepare_output_dir(c);
  const std::vector<Scenario> runs     = expand_scenarios(c);
  std::vector<ClosedLoopLog> logs(runs.size());
  std::vector<double> wall(runs.size(), 0.0);
  std::vector<std::string> errors(runs.size());

  // Runs are independent; each worker owns its solver and writes only its own files.
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      const auto t0 = std::chrono::steady_clock::now();
      try {
        logs[i] = run_closed_loop(runs[i], c.quad, c.solver);
        const std::string stem = file_stem(runs[i].name) + "_" + to_string(runs[i].scheme);
        std::ofstream csv(dir / (stem + ".csv"));
        write_log_csv(csv, logs[i]);
        write_file(dir / (stem + "_metrics.json"), metrics_to_json(compute_metrics(logs[i], c.sim.settling_band)) + "\n");
      } catch (const std::exception & e) {
        errors[i] = e.what();
      }
      wall[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  };
  const std::size_t n_threads =
    std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, std::max<std::size_t>(runs.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) { pool.emplace_back(worker); }
  worker();
  for (std::thread & t : pool) { t.join(); }

  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (!errors[i].empty()) { throw Error("run " + runs[i].name + "/" + to_string(runs[i].scheme) + ": " + errors[i]); }
  }

  std::ofstream runlog(dir / "run.log");
  bool any_infeasible = false;
  std::ostringstream table;
  table << std::left << std::setw(12) << "scenario" << std::setw(8) << "scheme" << std::setw(12) << "settling_s"
        << std::setw(14) << "final_pos_m" << std::setw(12) << "final_psi" << std::setw(9) << "min_f" << std::setw(9)
        << "max_f" << std::setw(12) << "violations" << std::setw(12) << "infeasible" << "mean_ms\n";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const Metrics m = compute_metrics(logs[i], c.sim.settling_band);
    any_infeasible  = any_infeasible || logs[i].infeasible_tick.has_value();
    table << std::setw(12) << runs[i].name << std::setw(8) << to_string(runs[i].scheme) << std::setw(12)
          << (m.settling_time ? fmt(*m.settling_time) : std::string("-")) << std::setw(14)
          << fmt(m.final_position_error, 3) << std::setw(12) << fmt(m.final_psi, 3) << std::setw(9)
          << fmt(m.min_rotor_force) << std::setw(9) << fmt(m.max_rotor_force) << std::setw(12) << m.bound_violations
          << std::setw(12) << m.infeasible_ticks << fmt(m.mean_solve_ms, 3) << '\n';
    runlog << runs[i].name << ' ' << to_string(runs[i].scheme) << " ticks=" << logs[i].records.size()
           << " wall_s=" << fmt(wall[i]) << " projection_distance=" << runs[i].projection_distance
           << " infeasible_tick=" << (logs[i].infeasible_tick ? std::to_string(*logs[i].infeasible_tick) : "none")
           << '\n';
  }

  // Pair the schemes per scenario when both ran.
  std::vector<ClosedLoopLog> nmpc, fm;
  for (std::size_t i = 0; i + 1 < runs.size(); ++i) {
    if (runs[i].name == runs[i + 1].name && runs[i].scheme == Scheme::Nmpc && runs[i + 1].scheme == Scheme::Fmnmpc) {
      nmpc.push_back(logs[i]);
      fm.push_back(logs[i + 1]);
    }
  }
  if (!nmpc.empty()) {
    const ComparisonReport rep = compare_schemes(nmpc, fm, c.sim.settling_band);
    write_file(dir / "comparison.json", comparison_to_json(rep) + "\n");
    table << "mean settling time: nmpc " << fmt(rep.mean_settling_nmpc) << " s, fmnmpc "
          << fmt(rep.mean_settling_fmnmpc) << " s, reduction " << fmt(100.0 * rep.mean_reduction, 3) << " %\n";
    for (std::size_t k = 0; k < nmpc.size(); ++k) {
      std::ofstream plot(dir / ("plot_" + file_stem(nmpc[k].scenario) + ".csv"));
      plot << "t,stage_cost_nmpc,stage_cost_fmnmpc,pos_err_nmpc,pos_err_fmnmpc\n" << std::setprecision(10);
      const std::size_t len = std::min(nmpc[k].records.size(), fm[k].records.size());
      for (std::size_t r = 0; r < len; ++r) {
        const LogRecord & a = nmpc[k].records[r];
        const LogRecord & b = fm[k].records[r];
        plot << a.t << ',' << a.stage_cost << ',' << b.stage_cost << ',' << a.pos_err << ',' << b.pos_err << '\n';
      }
    }
  }

  write_file(dir / "summary.txt", table.str());
  out << table.str();
  return any_infeasible ? kExitInfeasible : kExitOk;
}

}  // namespace geonmpc

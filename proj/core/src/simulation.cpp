#include "geonmpc/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include <nlohmann/json.hpp>

#include "geonmpc/errors.hpp"

namespace geonmpc {

const char * to_string(Scheme s)
{
  return s == Scheme::Nmpc ? "nmpc" : "fmnmpc";
}

Scheme parse_scheme(std::string_view name)
{
  if (name == "nmpc") { return Scheme::Nmpc; }
  if (name == "fmnmpc") { return Scheme::Fmnmpc; }
  throw InvalidArgument("unknown scheme '" + std::string(name) + "'");
}

void Scenario::validate() const
{
  spec.validate();
  if (!(duration > 0.0) || !std::isfinite(duration)) { throw InvalidArgument("duration must be positive"); }
  if (plant_substeps < 1) { throw InvalidArgument("plant_substeps must be >= 1"); }
  if (!(mass_scale > 0.0) || !(inertia_scale > 0.0)) { throw InvalidArgument("plant scale factors must be positive"); }
  if (!x0.all_finite()) { throw InvalidArgument("initial state must be finite"); }
  if (x0.R.orthogonality_error() > kOrthogonalityTol) { throw InvalidArgument("initial attitude is not in SO(3)"); }
}

OcpSpec Scenario::effective_spec() const
{
  return scheme == Scheme::Nmpc ? spec.with_zeta(1.0) : spec;
}

int Scenario::ticks() const
{
  return static_cast<int>(std::llround(duration / spec.dt.dt()));
}

const std::array<PaperInitialCondition, 4> & paper_initial_conditions()
{
  static const std::array<PaperInitialCondition, 4> table = [] {
    std::array<PaperInitialCondition, 4> t{};
    t[0].name = "x01";
    t[0].R << 0.1543, 0.9880, 0.0, 0.1954, -0.0305, -0.9802, -0.9685, 0.1512, -0.1978;
    t[0].xi = Vec3(4.0, 5.0, 7.0);
    t[1].name = "x02";
    t[1].R << -0.3045, 0.2837, 0.9093, -0.4447, 0.8019, -0.3990, -0.8424, -0.5258, -0.1180;
    t[1].xi = Vec3(-4.0, -5.0, 2.0);
    t[2].name = "x03";
    t[2].R << 0.5175, -0.3541, -0.7790, 0.8168, 0.4755, 0.3266, 0.2548, -0.8053, 0.5353;
    t[2].xi = Vec3(-4.0, 5.0, 7.0);
    t[3].name = "x04";
    t[3].R << 0.8660, -0.5000, 0.0, -0.5000, -0.8660, 0.0, 0.0, 0.0, -1.0;
    t[3].xi = Vec3(3.0, -4.0, 9.0);
    return t;
  }();
  return table;
}

Scenario paper_scenario(int index, Scheme scheme, const OcpSpec & spec)
{
  const auto & table = paper_initial_conditions();
  if (index < 0 || index >= static_cast<int>(table.size())) { throw InvalidArgument("paper scenario index out of range"); }
  const PaperInitialCondition & ic = table[static_cast<std::size_t>(index)];
  Scenario sc;
  sc.name   = ic.name;
  sc.spec   = spec;
  sc.scheme = scheme;
  sc.x0.R   = RotationMatrix::project(ic.R, &sc.projection_distance);
  sc.x0.xi  = ic.xi;
  return sc;
}

Scenario hover_scenario(Scheme scheme, const OcpSpec & spec)
{
  Scenario sc;
  sc.name   = "hover";
  sc.spec   = spec;
  sc.scheme = scheme;
  sc.x0     = spec.equilibrium.state();
  return sc;
}

std::vector<double> ClosedLoopLog::times() const
{
  std::vector<double> out;
  out.reserve(records.size());
  for (const LogRecord & r : records) { out.push_back(r.t); }
  return out;
}

std::vector<double> ClosedLoopLog::position_errors() const
{
  std::vector<double> out;
  out.reserve(records.size());
  for (const LogRecord & r : records) { out.push_back(r.pos_err); }
  return out;
}

std::vector<double> ClosedLoopLog::stage_costs() const
{
  std::vector<double> out;
  out.reserve(records.size());
  for (const LogRecord & r : records) { out.push_back(r.stage_cost); }
  return out;
}

ClosedLoopLog run_closed_loop(const Scenario & sc, const QuadrotorParams & q, const SolverConfig & cfg)
{
  sc.validate();
  q.validate();
  const OcpSpec spec = sc.effective_spec();
  const StepSpec & dt = spec.dt;

  RigidBodyParams plant = q.body;
  plant.mass *= sc.mass_scale;
  plant.inertia *= sc.inertia_scale;

  ClosedLoopLog log;
  log.scenario  = sc.name;
  log.scheme    = sc.scheme;
  log.dt        = dt.dt();
  log.rotor_min = spec.rotor_min;
  log.rotor_max = spec.rotor_max;

  const int n = sc.ticks();
  log.records.reserve(static_cast<std::size_t>(n) + 1);

  ShootingSolver solver(cfg);
  SolveResult prev;
  RigidState x = sc.x0;
  for (int k = 0; k <= n; ++k) {
    ShootingProblem prob = transcribe(x, spec, q);
    SolveResult res      = solver.solve(prob, k > 0 ? &prev : nullptr);

    LogRecord rec;
    rec.t          = k * dt.dt();
    rec.x          = x;
    rec.psi        = attitude_error(x.R, spec.equilibrium.R_d, spec.weights.attitude);
    rec.stage_cost = state_cost(x, spec);
    rec.pos_err    = (x.xi - spec.equilibrium.xi_e).norm();
    rec.solve_ms   = res.solve_time_ms;
    rec.iterations = res.iterations;
    rec.status     = res.status;

    if (res.status == SolveStatus::Infeasible) {
      log.infeasible_tick = k;
      log.records.push_back(rec);
      break;
    }

    rec.commanded = unmix_wrench(res.controls.front(), q);
    rec.rotors    = rec.commanded.clamped(spec.rotor_min, spec.rotor_max);
    rec.u         = mix_rotor_forces(rec.rotors, q);
    log.records.push_back(rec);

    if (k < n) { x = step_plant(x, rec.u, plant, dt, sc.plant_substeps); }
    prev = std::move(res);
  }
  return log;
}

double settling_time(std::span<const double> t, std::span<const double> err, double band, double floor)
{
  if (t.empty() || t.size() != err.size()) { throw InvalidArgument("settling_time needs equal-length nonempty series"); }
  if (!(band >= 0.0) || !(floor >= 0.0)) { throw InvalidArgument("band and floor must be non-negative"); }
  const double threshold = std::max(band * err.front(), floor);
  const std::size_t last = err.size() - 1;
  if (!(err[last] <= threshold)) { throw NotSettled("error never settles within the band"); }

  // Last sample outside the band.
  std::size_t k = last;
  while (k > 0 && err[k - 1] <= threshold) { --k; }
  if (k == 0) { return t.front() - t.front(); }
  const std::size_t i = k - 1;
  const double e0 = err[i], e1 = err[k];
  const double w  = e0 > e1 ? (e0 - threshold) / (e0 - e1) : 1.0;
  return (t[i] + w * (t[k] - t[i])) - t.front();
}

double settling_time(const ClosedLoopLog & log, double band, double floor)
{
  if (log.records.empty()) { throw InvalidArgument("empty log"); }
  const std::vector<double> t = log.times();
  const std::vector<double> e = log.position_errors();
  return settling_time(t, e, band, floor);
}

Metrics compute_metrics(const ClosedLoopLog & log, double band)
{
  if (log.records.empty()) { throw InvalidArgument("empty log"); }
  Metrics m;
  try {
    m.settling_time = settling_time(log, band);
  } catch (const NotSettled &) {
    m.settling_time.reset();
  }
  const LogRecord & last = log.records.back();
  m.final_position_error = last.pos_err;
  m.final_psi            = last.psi;
  m.max_rotor_force      = -std::numeric_limits<double>::infinity();
  m.min_rotor_force      = std::numeric_limits<double>::infinity();
  double solve_sum       = 0.0;
  for (const LogRecord & r : log.records) {
    ++m.ticks;
    solve_sum += r.solve_ms;
    m.max_solve_ms   = std::max(m.max_solve_ms, r.solve_ms);
    m.max_iterations = std::max(m.max_iterations, r.iterations);
    m.total_cost += r.stage_cost;
    m.max_orthogonality_error = std::max(m.max_orthogonality_error, r.x.R.orthogonality_error());
    if (r.status == SolveStatus::Infeasible) {
      ++m.infeasible_ticks;
      continue;
    }
    if (r.status == SolveStatus::Converged) { ++m.converged_ticks; }
    bool clamped = false;
    for (std::size_t i = 0; i < 4; ++i) {
      const double f = r.rotors.f[i];
      m.max_rotor_force = std::max(m.max_rotor_force, f);
      m.min_rotor_force = std::min(m.min_rotor_force, f);
      if (f < log.rotor_min || f > log.rotor_max) { ++m.bound_violations; }
      if (r.commanded.f[i] != f) { clamped = true; }
    }
    if (clamped) { ++m.saturated_ticks; }
  }
  m.mean_solve_ms = solve_sum / static_cast<double>(m.ticks);
  if (!std::isfinite(m.max_rotor_force)) { m.max_rotor_force = m.min_rotor_force = 0.0; }
  return m;
}

ComparisonReport compare_schemes(std::span<const ClosedLoopLog> nmpc, std::span<const ClosedLoopLog> fmnmpc,
                                 double band)
{
  if (nmpc.size() != fmnmpc.size()) { throw LengthMismatch("compare_schemes needs paired logs"); }
  ComparisonReport rep;
  double sum_n = 0.0, sum_f = 0.0;
  for (std::size_t i = 0; i < nmpc.size(); ++i) {
    const Metrics mn = compute_metrics(nmpc[i], band);
    const Metrics mf = compute_metrics(fmnmpc[i], band);
    SchemeComparison c;
    c.scenario          = nmpc[i].scenario;
    c.settling_nmpc     = mn.settling_time;
    c.settling_fmnmpc   = mf.settling_time;
    c.total_cost_nmpc   = mn.total_cost;
    c.total_cost_fmnmpc = mf.total_cost;
    if (c.settling_nmpc && c.settling_fmnmpc) {
      if (*c.settling_nmpc > 0.0) { c.reduction = 1.0 - *c.settling_fmnmpc / *c.settling_nmpc; }
      sum_n += *c.settling_nmpc;
      sum_f += *c.settling_fmnmpc;
      ++rep.compared;
    }
    rep.scenarios.push_back(std::move(c));
  }
  if (rep.compared > 0) {
    rep.mean_settling_nmpc   = sum_n / rep.compared;
    rep.mean_settling_fmnmpc = sum_f / rep.compared;
    rep.mean_reduction       = sum_n > 0.0 ? 1.0 - sum_f / sum_n : 0.0;
  }
  return rep;
}

double dominance_fraction(std::span<const double> t, std::span<const double> a, std::span<const double> b,
                          double t_from, double rel_tol, double abs_tol)
{
  if (t.size() != a.size() || t.size() != b.size()) { throw LengthMismatch("curves must share the time grid"); }
  std::size_t total = 0, ok = 0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k] < t_from) { continue; }
    ++total;
    if (a[k] <= b[k] * (1.0 + rel_tol) + abs_tol) { ++ok; }
  }
  return total == 0 ? 1.0 : static_cast<double>(ok) / static_cast<double>(total);
}

const std::vector<std::string> & log_columns()
{
  static const std::vector<std::string> cols = {
    "t",   "xi_x", "xi_y", "xi_z", "v_x",   "v_y",   "v_z",   "wx",         "wy",      "wz",
    "R11", "R12",  "R13",  "R21",  "R22",   "R23",   "R31",   "R32",        "R33",     "T",
    "tau_x", "tau_y", "tau_z", "f1", "f2",  "f3",    "f4",    "psi",        "stage_cost", "pos_err",
    "solve_ms", "iters", "status"};
  return cols;
}

void write_log_csv(std::ostream & os, const ClosedLoopLog & log)
{
  os << "# " << kLogSchemaVersion << " scenario=" << log.scenario << " scheme=" << to_string(log.scheme)
     << " dt=" << log.dt << '\n';
  const auto & cols = log_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) { os << (i ? "," : "") << cols[i]; }
  os << '\n';
  os << std::setprecision(10);
  for (const LogRecord & r : log.records) {
    const Mat3 & R = r.x.R.matrix();
    os << r.t << ',' << r.x.xi.x() << ',' << r.x.xi.y() << ',' << r.x.xi.z() << ',' << r.x.v.x() << ',' << r.x.v.y()
       << ',' << r.x.v.z() << ',' << r.x.omega.x() << ',' << r.x.omega.y() << ',' << r.x.omega.z();
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) { os << ',' << R(i, j); }
    }
    os << ',' << r.u.thrust << ',' << r.u.torque.x() << ',' << r.u.torque.y() << ',' << r.u.torque.z();
    for (double f : r.rotors.f) { os << ',' << f; }
    os << ',' << r.psi << ',' << r.stage_cost << ',' << r.pos_err << ',' << r.solve_ms << ',' << r.iterations << ','
       << to_string(r.status) << '\n';
  }
}

namespace {

nlohmann::json optional_json(const std::optional<double> & v)
{
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

std::string metrics_to_json(const Metrics & m, int indent)
{
  nlohmann::json j;
  j["settling_time"]           = optional_json(m.settling_time);
  j["final_position_error"]    = m.final_position_error;
  j["final_psi"]               = m.final_psi;
  j["max_rotor_force"]         = m.max_rotor_force;
  j["min_rotor_force"]         = m.min_rotor_force;
  j["bound_violations"]        = m.bound_violations;
  j["saturated_ticks"]         = m.saturated_ticks;
  j["total_cost"]              = m.total_cost;
  j["mean_solve_ms"]           = m.mean_solve_ms;
  j["max_solve_ms"]            = m.max_solve_ms;
  j["max_iterations"]          = m.max_iterations;
  j["infeasible_ticks"]        = m.infeasible_ticks;
  j["converged_ticks"]         = m.converged_ticks;
  j["ticks"]                   = m.ticks;
  j["max_orthogonality_error"] = m.max_orthogonality_error;
  return j.dump(indent);
}

std::string comparison_to_json(const ComparisonReport & r, int indent)
{
  nlohmann::json j;
  j["mean_settling_nmpc"]   = r.mean_settling_nmpc;
  j["mean_settling_fmnmpc"] = r.mean_settling_fmnmpc;
  j["mean_reduction"]       = r.mean_reduction;
  j["compared"]             = r.compared;
  j["scenarios"]            = nlohmann::json::array();
  for (const SchemeComparison & c : r.scenarios) {
    j["scenarios"].push_back({{"scenario", c.scenario},
                              {"settling_nmpc", optional_json(c.settling_nmpc)},
                              {"settling_fmnmpc", optional_json(c.settling_fmnmpc)},
                              {"reduction", optional_json(c.reduction)},
                              {"total_cost_nmpc", c.total_cost_nmpc},
                              {"total_cost_fmnmpc", c.total_cost_fmnmpc}});
  }
  return j.dump(indent);
}

}  // namespace geonmpc

#include "geonmpc/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "geonmpc/errors.hpp"

namespace geonmpc {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string & where, const std::string & what)
{
  throw ConfigError(where + ": " + what);
}

void check_object(const json & j, const std::string & where)
{
  if (!j.is_object()) { fail(where, "expected an object"); }
}

void check_keys(const json & j, const std::string & where, std::initializer_list<const char *> allowed)
{
  check_object(j, where);
  for (const auto & item : j.items()) {
    const bool known =
      std::any_of(allowed.begin(), allowed.end(), [&](const char * k) { return item.key() == k; });
    if (!known) { fail(where, "unknown key '" + item.key() + "'"); }
  }
}

double get_number(const json & j, const std::string & where)
{
  if (!j.is_number()) { fail(where, "expected a number"); }
  return j.get<double>();
}

template <typename Int>
Int get_integer(const json & j, const std::string & where)
{
  if (!j.is_number_integer()) { fail(where, "expected an integer"); }
  if constexpr (std::is_unsigned_v<Int>) {
    if (j.is_number_unsigned()) { return j.get<Int>(); }
    if (j.get<std::int64_t>() < 0) { fail(where, "expected a non-negative integer"); }
  }
  return j.get<Int>();
}

bool get_bool(const json & j, const std::string & where)
{
  if (!j.is_boolean()) { fail(where, "expected true or false"); }
  return j.get<bool>();
}

std::string get_string(const json & j, const std::string & where)
{
  if (!j.is_string()) { fail(where, "expected a string"); }
  return j.get<std::string>();
}

Vec3 get_vec3(const json & j, const std::string & where)
{
  if (!j.is_array() || j.size() != 3) { fail(where, "expected an array of 3 numbers"); }
  Vec3 v;
  for (int i = 0; i < 3; ++i) { v(i) = get_number(j[static_cast<std::size_t>(i)], where); }
  return v;
}

Mat3 get_mat3(const json & j, const std::string & where)
{
  if (!j.is_array() || j.size() != 3) { fail(where, "expected a 3x3 array (rows)"); }
  Mat3 m;
  for (int i = 0; i < 3; ++i) { m.row(i) = get_vec3(j[static_cast<std::size_t>(i)], where).transpose(); }
  return m;
}

json vec3_json(const Vec3 & v)
{
  return json::array({v.x(), v.y(), v.z()});
}

json mat3_json(const Mat3 & m)
{
  json rows = json::array();
  for (int i = 0; i < 3; ++i) { rows.push_back(vec3_json(m.row(i).transpose())); }
  return rows;
}

template <typename F>
void if_present(const json & j, const char * key, F && f)
{
  if (j.contains(key)) { f(j.at(key)); }
}

void parse_quadrotor(const json & j, QuadrotorParams & q)
{
  const std::string w = "quadrotor";
  check_keys(j, w, {"mass", "inertia", "thrust_axis", "gravity", "arm_length", "torque_coeff", "rotor_min", "rotor_max"});
  if_present(j, "mass", [&](const json & v) { q.body.mass = get_number(v, w + ".mass"); });
  if_present(j, "inertia", [&](const json & v) { q.body.inertia = get_mat3(v, w + ".inertia"); });
  if_present(j, "thrust_axis", [&](const json & v) { q.body.thrust_axis = get_vec3(v, w + ".thrust_axis"); });
  if_present(j, "gravity", [&](const json & v) { q.body.gravity = get_number(v, w + ".gravity"); });
  if_present(j, "arm_length", [&](const json & v) { q.arm_length = get_number(v, w + ".arm_length"); });
  if_present(j, "torque_coeff", [&](const json & v) { q.torque_coeff = get_number(v, w + ".torque_coeff"); });
  if_present(j, "rotor_min", [&](const json & v) { q.rotor_min = get_number(v, w + ".rotor_min"); });
  if_present(j, "rotor_max", [&](const json & v) { q.rotor_max = get_number(v, w + ".rotor_max"); });
}

std::optional<BoxBounds> parse_box(const json & j, const std::string & w)
{
  check_keys(j, w, {"lower", "upper"});
  if (!j.contains("lower") || !j.contains("upper")) { fail(w, "needs both 'lower' and 'upper'"); }
  return BoxBounds{get_vec3(j.at("lower"), w + ".lower"), get_vec3(j.at("upper"), w + ".upper")};
}

void parse_controller(const json & j, OcpSpec & spec, Vec3 & xi_e)
{
  const std::string w = "controller";
  check_keys(j, w, {"horizon", "dt", "zeta", "weights", "equilibrium", "state_bounds"});
  if_present(j, "horizon", [&](const json & v) { spec.horizon = get_integer<int>(v, w + ".horizon"); });
  if_present(j, "dt", [&](const json & v) {
    const double dt = get_number(v, w + ".dt");
    if (!(dt > 0.0)) { fail(w + ".dt", "must be positive"); }
    spec.dt = StepSpec(dt);
  });
  if_present(j, "zeta", [&](const json & v) { spec.zeta = get_number(v, w + ".zeta"); });
  if_present(j, "weights", [&](const json & jw) {
    const std::string ww = w + ".weights";
    check_keys(jw, ww, {"kp", "kv", "kR", "komega", "kf", "ktau", "k1", "k2", "e1", "e2"});
    CostWeights & k = spec.weights;
    if_present(jw, "kp", [&](const json & v) { k.kp = get_number(v, ww + ".kp"); });
    if_present(jw, "kv", [&](const json & v) { k.kv = get_number(v, ww + ".kv"); });
    if_present(jw, "kR", [&](const json & v) { k.kR = get_number(v, ww + ".kR"); });
    if_present(jw, "komega", [&](const json & v) { k.komega = get_number(v, ww + ".komega"); });
    if_present(jw, "kf", [&](const json & v) { k.kf = get_number(v, ww + ".kf"); });
    if_present(jw, "ktau", [&](const json & v) { k.ktau = get_number(v, ww + ".ktau"); });
    if_present(jw, "k1", [&](const json & v) { k.attitude.k1 = get_number(v, ww + ".k1"); });
    if_present(jw, "k2", [&](const json & v) { k.attitude.k2 = get_number(v, ww + ".k2"); });
    if_present(jw, "e1", [&](const json & v) { k.attitude.e1 = get_vec3(v, ww + ".e1"); });
    if_present(jw, "e2", [&](const json & v) { k.attitude.e2 = get_vec3(v, ww + ".e2"); });
  });
  if_present(j, "equilibrium", [&](const json & je) {
    check_keys(je, w + ".equilibrium", {"xi"});
    if_present(je, "xi", [&](const json & v) { xi_e = get_vec3(v, w + ".equilibrium.xi"); });
  });
  if_present(j, "state_bounds", [&](const json & jb) {
    const std::string wb = w + ".state_bounds";
    check_keys(jb, wb, {"xi", "v", "omega"});
    if_present(jb, "xi", [&](const json & v) { spec.state_bounds.xi = parse_box(v, wb + ".xi"); });
    if_present(jb, "v", [&](const json & v) { spec.state_bounds.v = parse_box(v, wb + ".v"); });
    if_present(jb, "omega", [&](const json & v) { spec.state_bounds.omega = parse_box(v, wb + ".omega"); });
  });
}

void parse_solver(const json & j, SolverConfig & s)
{
  const std::string w = "solver";
  check_keys(j, w,
             {"max_iterations_cold", "max_iterations_warm", "feas_tol", "opt_tol", "armijo", "backtrack", "min_step",
              "regularization", "derivatives", "warm_start", "fd_step", "cold_candidate"});
  if_present(j, "max_iterations_cold", [&](const json & v) { s.max_iterations_cold = get_integer<int>(v, w + ".max_iterations_cold"); });
  if_present(j, "max_iterations_warm", [&](const json & v) { s.max_iterations_warm = get_integer<int>(v, w + ".max_iterations_warm"); });
  if_present(j, "feas_tol", [&](const json & v) { s.feas_tol = get_number(v, w + ".feas_tol"); });
  if_present(j, "opt_tol", [&](const json & v) { s.opt_tol = get_number(v, w + ".opt_tol"); });
  if_present(j, "armijo", [&](const json & v) { s.armijo = get_number(v, w + ".armijo"); });
  if_present(j, "backtrack", [&](const json & v) { s.backtrack = get_number(v, w + ".backtrack"); });
  if_present(j, "min_step", [&](const json & v) { s.min_step = get_number(v, w + ".min_step"); });
  if_present(j, "regularization", [&](const json & v) { s.regularization = get_number(v, w + ".regularization"); });
  if_present(j, "fd_step", [&](const json & v) { s.fd_step = get_number(v, w + ".fd_step"); });
  if_present(j, "cold_candidate", [&](const json & v) { s.cold_candidate = get_bool(v, w + ".cold_candidate"); });
  if_present(j, "derivatives", [&](const json & v) {
    const std::string m = get_string(v, w + ".derivatives");
    if (m == "analytic") {
      s.derivatives = DerivativeMode::Analytic;
    } else if (m == "finite_difference") {
      s.derivatives = DerivativeMode::FiniteDifference;
    } else {
      fail(w + ".derivatives", "expected 'analytic' or 'finite_difference'");
    }
  });
  if_present(j, "warm_start", [&](const json & v) {
    const std::string m = get_string(v, w + ".warm_start");
    if (m == "shift") {
      s.warm_start = WarmStartMode::Shift;
    } else if (m == "none") {
      s.warm_start = WarmStartMode::None;
    } else {
      fail(w + ".warm_start", "expected 'shift' or 'none'");
    }
  });
}

std::vector<Scheme> parse_schemes(const json & j, const std::string & w)
{
  std::vector<Scheme> out;
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "both") { return {Scheme::Nmpc, Scheme::Fmnmpc}; }
    try {
      return {parse_scheme(s)};
    } catch (const InvalidArgument & e) {
      fail(w, e.what());
    }
  }
  if (!j.is_array() || j.empty()) { fail(w, "expected 'nmpc', 'fmnmpc', 'both' or a nonempty array"); }
  for (const json & item : j) {
    try {
      const Scheme s = parse_scheme(get_string(item, w));
      if (std::find(out.begin(), out.end(), s) != out.end()) { fail(w, "duplicate scheme"); }
      out.push_back(s);
    } catch (const InvalidArgument & e) {
      fail(w, e.what());
    }
  }
  return out;
}

void parse_simulation(const json & j, SimulationSettings & s)
{
  const std::string w = "simulation";
  check_keys(j, w, {"duration", "plant_substeps", "mass_scale", "inertia_scale", "settling_band", "schemes"});
  if_present(j, "duration", [&](const json & v) { s.duration = get_number(v, w + ".duration"); });
  if_present(j, "plant_substeps", [&](const json & v) { s.plant_substeps = get_integer<int>(v, w + ".plant_substeps"); });
  if_present(j, "mass_scale", [&](const json & v) { s.mass_scale = get_number(v, w + ".mass_scale"); });
  if_present(j, "inertia_scale", [&](const json & v) { s.inertia_scale = get_number(v, w + ".inertia_scale"); });
  if_present(j, "settling_band", [&](const json & v) { s.settling_band = get_number(v, w + ".settling_band"); });
  if_present(j, "schemes", [&](const json & v) { s.schemes = parse_schemes(v, w + ".schemes"); });
}

const std::set<std::string> & scenario_presets()
{
  static const std::set<std::string> names = {"x01", "x02", "x03", "x04", "hover"};
  return names;
}

ScenarioEntry parse_scenario(const json & j, const std::string & w)
{
  ScenarioEntry e;
  if (j.is_string()) {
    e.preset = j.get<std::string>();
    if (!scenario_presets().count(e.preset)) { fail(w, "unknown scenario preset '" + e.preset + "'"); }
    e.name = e.preset;
    return e;
  }
  check_keys(j, w, {"name", "R", "xi", "v", "omega"});
  if (!j.contains("name")) { fail(w, "explicit scenarios need a 'name'"); }
  e.name = get_string(j.at("name"), w + ".name");
  if (e.name.empty()) { fail(w + ".name", "must not be empty"); }
  if_present(j, "R", [&](const json & v) { e.R = get_mat3(v, w + ".R"); });
  if_present(j, "xi", [&](const json & v) { e.xi = get_vec3(v, w + ".xi"); });
  if_present(j, "v", [&](const json & v) { e.v = get_vec3(v, w + ".v"); });
  if_present(j, "omega", [&](const json & v) { e.omega = get_vec3(v, w + ".omega"); });
  return e;
}

void parse_certify(const json & j, CertifySettings & c)
{
  const std::string w = "certify";
  check_keys(j, w, {"steps", "rank_tol", "random_states", "samples", "seed", "slack"});
  if_present(j, "steps", [&](const json & v) { c.steps = get_integer<int>(v, w + ".steps"); });
  if_present(j, "rank_tol", [&](const json & v) { c.rank_tol = get_number(v, w + ".rank_tol"); });
  if_present(j, "random_states", [&](const json & v) { c.random_states = get_integer<int>(v, w + ".random_states"); });
  if_present(j, "samples", [&](const json & v) { c.samples = get_integer<std::int64_t>(v, w + ".samples"); });
  if_present(j, "seed", [&](const json & v) { c.seed = get_integer<std::uint64_t>(v, w + ".seed"); });
  if_present(j, "slack", [&](const json & v) { c.slack = get_number(v, w + ".slack"); });
}

}  // namespace

void Config::validate() const
{
  try {
    quad.validate();
    spec.validate();
    solver.validate();
    spec.equilibrium.validate(quad.body, spec.dt, 1e-9);
  } catch (const InvalidArgument & e) {
    throw ConfigError(e.what());
  }
  if (quad.rotor_min != spec.rotor_min || quad.rotor_max != spec.rotor_max) {
    throw ConfigError("rotor bounds of the quadrotor and the controller differ");
  }
  if (!(sim.duration > 0.0)) { throw ConfigError("simulation.duration must be positive"); }
  if (sim.plant_substeps < 1) { throw ConfigError("simulation.plant_substeps must be >= 1"); }
  if (!(sim.mass_scale > 0.0) || !(sim.inertia_scale > 0.0)) { throw ConfigError("plant scale factors must be positive"); }
  if (!(sim.settling_band > 0.0 && sim.settling_band < 1.0)) { throw ConfigError("simulation.settling_band must lie in (0, 1)"); }
  if (sim.schemes.empty()) { throw ConfigError("simulation.schemes must not be empty"); }
  if (certify.steps < 1) { throw ConfigError("certify.steps must be >= 1"); }
  if (!(certify.rank_tol > 0.0 && certify.rank_tol < 1.0)) { throw ConfigError("certify.rank_tol must lie in (0, 1)"); }
  if (certify.random_states < 0) { throw ConfigError("certify.random_states must be >= 0"); }
  if (certify.samples < 1) { throw ConfigError("certify.samples must be >= 1"); }
  if (!(certify.slack >= 0.0)) { throw ConfigError("certify.slack must be >= 0"); }
  if (output_dir.empty()) { throw ConfigError("output_dir must not be empty"); }
  std::set<std::string> names;
  for (const ScenarioEntry & e : scenarios) {
    if (!names.insert(e.name).second) { throw ConfigError("duplicate scenario name '" + e.name + "'"); }
  }
}

Config parse_config(std::string_view text)
{
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error & e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  check_keys(root, "config",
             {"quadrotor", "controller", "solver", "simulation", "scenarios", "certify", "output_dir"});

  Config c;
  Vec3 xi_e = c.spec.equilibrium.xi_e;
  if_present(root, "quadrotor", [&](const json & j) { parse_quadrotor(j, c.quad); });
  if_present(root, "controller", [&](const json & j) { parse_controller(j, c.spec, xi_e); });
  if_present(root, "solver", [&](const json & j) { parse_solver(j, c.solver); });
  if_present(root, "simulation", [&](const json & j) { parse_simulation(j, c.sim); });
  if_present(root, "certify", [&](const json & j) { parse_certify(j, c.certify); });
  if_present(root, "output_dir", [&](const json & j) { c.output_dir = get_string(j, "output_dir"); });
  if_present(root, "scenarios", [&](const json & j) {
    if (!j.is_array()) { fail("scenarios", "expected an array"); }
    for (std::size_t i = 0; i < j.size(); ++i) {
      c.scenarios.push_back(parse_scenario(j[i], "scenarios[" + std::to_string(i) + "]"));
    }
  });

  c.spec.rotor_min   = c.quad.rotor_min;
  c.spec.rotor_max   = c.quad.rotor_max;
  c.spec.equilibrium = Equilibrium::hover(xi_e, c.quad.body);
  c.validate();
  return c;
}

Config load_config(const std::string & path)
{
  std::ifstream in(path);
  if (!in) { throw ConfigError("cannot open config file '" + path + "'"); }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const Config & c, int indent)
{
  json j;
  const QuadrotorParams & q = c.quad;
  j["quadrotor"] = {{"mass", q.body.mass},
                    {"inertia", mat3_json(q.body.inertia)},
                    {"thrust_axis", vec3_json(q.body.thrust_axis)},
                    {"gravity", q.body.gravity},
                    {"arm_length", q.arm_length},
                    {"torque_coeff", q.torque_coeff},
                    {"rotor_min", q.rotor_min},
                    {"rotor_max", q.rotor_max}};

  const CostWeights & k = c.spec.weights;
  json controller       = {{"horizon", c.spec.horizon},
                           {"dt", c.spec.dt.dt()},
                           {"zeta", c.spec.zeta},
                           {"weights",
                            {{"kp", k.kp},
                             {"kv", k.kv},
                             {"kR", k.kR},
                             {"komega", k.komega},
                             {"kf", k.kf},
                             {"ktau", k.ktau},
                             {"k1", k.attitude.k1},
                             {"k2", k.attitude.k2},
                             {"e1", vec3_json(k.attitude.e1)},
                             {"e2", vec3_json(k.attitude.e2)}}},
                           {"equilibrium", {{"xi", vec3_json(c.spec.equilibrium.xi_e)}}}};
  json bounds = json::object();
  auto put_box = [&](const char * key, const std::optional<BoxBounds> & b) {
    if (b) { bounds[key] = {{"lower", vec3_json(b->lower)}, {"upper", vec3_json(b->upper)}}; }
  };
  put_box("xi", c.spec.state_bounds.xi);
  put_box("v", c.spec.state_bounds.v);
  put_box("omega", c.spec.state_bounds.omega);
  if (!bounds.empty()) { controller["state_bounds"] = bounds; }
  j["controller"] = controller;

  const SolverConfig & s = c.solver;
  j["solver"] = {{"max_iterations_cold", s.max_iterations_cold},
                 {"max_iterations_warm", s.max_iterations_warm},
                 {"feas_tol", s.feas_tol},
                 {"opt_tol", s.opt_tol},
                 {"armijo", s.armijo},
                 {"backtrack", s.backtrack},
                 {"min_step", s.min_step},
                 {"regularization", s.regularization},
                 {"derivatives", s.derivatives == DerivativeMode::Analytic ? "analytic" : "finite_difference"},
                 {"warm_start", s.warm_start == WarmStartMode::Shift ? "shift" : "none"},
                 {"fd_step", s.fd_step},
                 {"cold_candidate", s.cold_candidate}};

  json schemes = json::array();
  for (Scheme sc : c.sim.schemes) { schemes.push_back(to_string(sc)); }
  j["simulation"] = {{"duration", c.sim.duration},
                     {"plant_substeps", c.sim.plant_substeps},
                     {"mass_scale", c.sim.mass_scale},
                     {"inertia_scale", c.sim.inertia_scale},
                     {"settling_band", c.sim.settling_band},
                     {"schemes", schemes}};

  json scenarios = json::array();
  for (const ScenarioEntry & e : c.scenarios) {
    if (!e.preset.empty()) {
      scenarios.push_back(e.preset);
    } else {
      scenarios.push_back({{"name", e.name},
                           {"R", mat3_json(e.R)},
                           {"xi", vec3_json(e.xi)},
                           {"v", vec3_json(e.v)},
                           {"omega", vec3_json(e.omega)}});
    }
  }
  j["scenarios"] = scenarios;

  j["certify"] = {{"steps", c.certify.steps},
                  {"rank_tol", c.certify.rank_tol},
                  {"random_states", c.certify.random_states},
                  {"samples", c.certify.samples},
                  {"seed", c.certify.seed},
                  {"slack", c.certify.slack}};
  j["output_dir"] = c.output_dir;
  return j.dump(indent);
}

const std::vector<std::string> & preset_names()
{
  static const std::vector<std::string> names = {"paper-x01", "paper-x02", "paper-x03",
                                                 "paper-x04", "paper-all", "hover-hold"};
  return names;
}

Config preset_config(std::string_view name)
{
  Config c;
  auto preset_entry = [](const char * p) {
    ScenarioEntry e;
    e.preset = p;
    e.name   = p;
    return e;
  };
  if (name == "paper-all") {
    for (const char * p : {"x01", "x02", "x03", "x04"}) { c.scenarios.push_back(preset_entry(p)); }
  } else if (name == "hover-hold") {
    c.scenarios.push_back(preset_entry("hover"));
    c.sim.schemes = {Scheme::Nmpc};
  } else if (name.size() == 9 && name.substr(0, 7) == "paper-x" && name[7] == '0' && name[8] >= '1' && name[8] <= '4') {
    const std::string p = std::string(name.substr(6));
    c.scenarios.push_back(preset_entry(p.c_str()));
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "'");
  }
  c.validate();
  return c;
}

std::vector<Scenario> expand_scenarios(const Config & c)
{
  std::vector<Scenario> out;
  for (const ScenarioEntry & e : c.scenarios) {
    for (Scheme scheme : c.sim.schemes) {
      Scenario sc;
      if (e.preset == "hover") {
        sc = hover_scenario(scheme, c.spec);
      } else if (!e.preset.empty()) {
        sc = paper_scenario(e.preset[2] - '1', scheme, c.spec);
      } else {
        sc.spec   = c.spec;
        sc.scheme = scheme;
        sc.x0     = RigidState{RotationMatrix::project(e.R, &sc.projection_distance), e.xi, e.omega, e.v};
      }
      sc.name           = e.name;
      sc.duration       = c.sim.duration;
      sc.plant_substeps = c.sim.plant_substeps;
      sc.mass_scale     = c.sim.mass_scale;
      sc.inertia_scale  = c.sim.inertia_scale;
      out.push_back(std::move(sc));
    }
  }
  return out;
}

}  // namespace geonmpc

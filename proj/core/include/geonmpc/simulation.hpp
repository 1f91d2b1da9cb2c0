#pragma once

/**
 * @file
 * @brief Closed-loop receding-horizon simulation, metrics and scheme comparison.
 *
 * Each controller tick measures the plant state, solves the OCP (warm-started
 * from the previous tick after the first), saturates the first control through
 * the rotor mixing and propagates the plant over one sampling period.
 */

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "geonmpc/dynamics.hpp"
#include "geonmpc/ocp.hpp"
#include "geonmpc/shooting.hpp"

namespace geonmpc {

enum class Scheme { Nmpc, Fmnmpc };

const char * to_string(Scheme s);
/// "nmpc" or "fmnmpc"; throws InvalidArgument otherwise.
Scheme parse_scheme(std::string_view name);

struct Scenario
{
  std::string name{"scenario"};
  RigidState x0{};
  OcpSpec spec{};
  Scheme scheme{Scheme::Fmnmpc};
  double duration{20.0};  // s
  int plant_substeps{10};
  /// Plant-only parameter perturbation (1 = nominal).
  double mass_scale{1.0};
  double inertia_scale{1.0};
  /// Frobenius distance removed when the initial attitude was projected onto SO(3).
  double projection_distance{0.0};

  void validate() const;
  /// The OCP solved by the scheme: zeta forced to 1 for the plain scheme.
  OcpSpec effective_spec() const;
  /// Number of plant steps; the log holds ticks() + 1 rows.
  int ticks() const;
};

struct PaperInitialCondition
{
  const char * name;
  Mat3 R;  // as printed, 4 decimals
  Vec3 xi;
};

/// The four initial configurations x01..x04 (zero velocities).
const std::array<PaperInitialCondition, 4> & paper_initial_conditions();

/// Scenario from paper_initial_conditions()[index] with the attitude projected onto SO(3).
Scenario paper_scenario(int index, Scheme scheme, const OcpSpec & spec = {});

/// Equilibrium-hold scenario starting at spec.equilibrium.
Scenario hover_scenario(Scheme scheme, const OcpSpec & spec = {});

struct LogRecord
{
  double t{0.0};
  RigidState x{};
  ControlInput u{};      // applied (after saturation)
  RotorForces rotors{};  // applied
  double psi{0.0};
  double stage_cost{0.0};  // ||xbar||^2_Q
  double pos_err{0.0};
  double solve_ms{0.0};
  int iterations{0};
  SolveStatus status{SolveStatus::Converged};
  /// Rotor forces of the solver's first control before saturation.
  RotorForces commanded{};
};

struct ClosedLoopLog
{
  std::string scenario;
  Scheme scheme{Scheme::Fmnmpc};
  double dt{0.01};
  double rotor_min{0.0};
  double rotor_max{12.3};
  std::vector<LogRecord> records;
  /// Index of the tick whose solve returned Infeasible; the run stops there.
  std::optional<int> infeasible_tick;

  std::vector<double> times() const;
  std::vector<double> position_errors() const;
  std::vector<double> stage_costs() const;
};

/**
 * @brief Runs one closed loop.
 *
 * The log has one row per tick k = 0..ticks(); the plant is propagated after
 * every row except the last. An Infeasible solve ends the run with a partial
 * log. Deterministic.
 */
ClosedLoopLog run_closed_loop(const Scenario & sc, const QuadrotorParams & q, const SolverConfig & cfg = {});

/**
 * @brief First time after which err stays within max(band * err[0], floor).
 *
 * The crossing is interpolated linearly between samples. Throws NotSettled if
 * the last sample is outside the band and InvalidArgument for empty or
 * mismatched input.
 */
double settling_time(std::span<const double> t, std::span<const double> err, double band = 0.02,
                     double floor = 1e-6);

double settling_time(const ClosedLoopLog & log, double band = 0.02, double floor = 1e-6);

struct Metrics
{
  std::optional<double> settling_time;  // empty when not settled
  double final_position_error{0.0};
  double final_psi{0.0};
  double max_rotor_force{0.0};
  double min_rotor_force{0.0};
  /// Applied rotor forces outside the bounds.
  int bound_violations{0};
  /// Ticks whose commanded forces had to be clamped.
  int saturated_ticks{0};
  /// Sum of the logged stage costs.
  double total_cost{0.0};
  double mean_solve_ms{0.0};
  double max_solve_ms{0.0};
  int max_iterations{0};
  int infeasible_ticks{0};
  int converged_ticks{0};
  int ticks{0};
  /// Largest |R^T R - I| over the logged attitudes.
  double max_orthogonality_error{0.0};
};

Metrics compute_metrics(const ClosedLoopLog & log, double band = 0.02);

/// Per-scenario pairing of the two schemes.
struct SchemeComparison
{
  std::string scenario;
  std::optional<double> settling_nmpc;
  std::optional<double> settling_fmnmpc;
  /// 1 - ts_fmnmpc / ts_nmpc (empty unless both settled and ts_nmpc > 0).
  std::optional<double> reduction;
  double total_cost_nmpc{0.0};
  double total_cost_fmnmpc{0.0};
};

struct ComparisonReport
{
  std::vector<SchemeComparison> scenarios;
  double mean_settling_nmpc{0.0};
  double mean_settling_fmnmpc{0.0};
  /// 1 - mean(ts_fmnmpc) / mean(ts_nmpc) over scenarios where both settled.
  double mean_reduction{0.0};
  int compared{0};
};

/// Pairs logs by position; throws LengthMismatch unless the spans have equal size.
ComparisonReport compare_schemes(std::span<const ClosedLoopLog> nmpc, std::span<const ClosedLoopLog> fmnmpc,
                                 double band = 0.02);

/**
 * @brief Fraction of samples with t >= t_from where a[k] <= b[k] * (1 + rel_tol) + abs_tol.
 *
 * Compares two equal-length curves sampled on the same grid.
 */
double dominance_fraction(std::span<const double> t, std::span<const double> a, std::span<const double> b,
                          double t_from, double rel_tol = 0.0, double abs_tol = 0.0);

inline constexpr const char * kLogSchemaVersion = "geonmpc-log v1";

/// CSV column names in order.
const std::vector<std::string> & log_columns();

/// Writes "# <version>" followed by the header and one row per record.
void write_log_csv(std::ostream & os, const ClosedLoopLog & log);

/// Metrics as a JSON object string.
std::string metrics_to_json(const Metrics & m, int indent = 2);

/// Comparison report as a JSON object string.
std::string comparison_to_json(const ComparisonReport & r, int indent = 2);

}  // namespace geonmpc

#pragma once

/**
 * @file
 * @brief The `certify` and `run` commands behind the command-line tool.
 *
 * Both write their reports under the configured output directory and print
 * only a plain-text summary table to `out`.
 */

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "geonmpc/config.hpp"
#include "geonmpc/stability.hpp"

namespace geonmpc {

/// Stable process exit codes.
enum ExitCode : int {
  kExitOk                 = 0,
  kExitConfigError        = 1,
  kExitCertificateFailure = 2,
  kExitInfeasible         = 3,
};

/// Environment variable that overrides the output directory of the config.
inline constexpr const char * kOutDirEnv = "GEONMPC_OUT_DIR";

/// Command-line overrides applied on top of a config file or preset.
struct CommandOptions
{
  std::optional<std::string> config_path;
  std::optional<std::string> preset;
  /// "nmpc", "fmnmpc" or "both".
  std::optional<std::string> scheme;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  /// Value of kOutDirEnv, if set.
  std::optional<std::string> env_out_dir;
};

/**
 * @brief Builds the effective configuration.
 *
 * Source: the config file, else the preset, else `default_preset`; giving both
 * a file and a preset is an error. Output directory precedence:
 * --out, then the environment, then the config. Throws ConfigError.
 */
Config resolve_config(const CommandOptions & opts, const std::string & default_preset);

struct CertificateReport
{
  GainCheck gains{};
  int steps{4};
  int rank_at_equilibrium{0};
  int rank_one_step_less{0};
  int random_states{0};
  int random_full_rank{0};
  int min_random_rank{0};
  DissipativityReport dissipativity{};

  bool controllable() const { return rank_at_equilibrium == kStateDim && random_full_rank == random_states; }
  bool pass() const { return gains.ok() && controllable() && dissipativity.pass(); }
};

/// Runs the certificate checks of the config without writing anything.
CertificateReport certify(const Config & c);

std::string certificate_to_json(const CertificateReport & r, int indent = 2);

/// Writes certificate.json and prints the summary table. Returns kExitOk or kExitCertificateFailure.
int cmd_certify(const Config & c, std::ostream & out);

/**
 * @brief Executes every (scenario, scheme) run of the config.
 *
 * Writes <scenario>_<scheme>.csv and <scenario>_<scheme>_metrics.json per run,
 * plot_<scenario>.csv and comparison.json when both schemes ran, summary.txt
 * and run.log. Returns kExitInfeasible if any run hit an infeasible tick.
 */
int cmd_run(const Config & c, std::ostream & out);

}  // namespace geonmpc

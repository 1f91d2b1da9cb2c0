#pragma once

/**
 * @file
 * @brief JSON experiment configuration, embedded presets and scenario expansion.
 *
 * The schema is documented in docs/config.md. Every section and key is
 * optional; missing keys take the documented defaults and unknown keys are
 * rejected with ConfigError.
 */

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "geonmpc/dynamics.hpp"
#include "geonmpc/ocp.hpp"
#include "geonmpc/shooting.hpp"
#include "geonmpc/simulation.hpp"

namespace geonmpc {

struct SimulationSettings
{
  double duration{20.0};
  int plant_substeps{10};
  double mass_scale{1.0};
  double inertia_scale{1.0};
  double settling_band{0.02};
  std::vector<Scheme> schemes{Scheme::Nmpc, Scheme::Fmnmpc};
};

struct CertifySettings
{
  int steps{4};
  double rank_tol{1e-8};
  int random_states{1000};
  std::int64_t samples{100000};
  std::uint64_t seed{0};
  double slack{1e-9};
};

/// A scenario given either by preset name ("x01".."x04", "hover") or explicitly.
struct ScenarioEntry
{
  std::string name;
  /// Empty for explicit entries.
  std::string preset;
  Mat3 R{Mat3::Identity()};  // projected onto SO(3) at expansion
  Vec3 xi{Vec3::Zero()};
  Vec3 v{Vec3::Zero()};
  Vec3 omega{Vec3::Zero()};

  bool operator==(const ScenarioEntry &) const = default;
};

struct Config
{
  QuadrotorParams quad{};
  OcpSpec spec{};
  SolverConfig solver{};
  SimulationSettings sim{};
  std::vector<ScenarioEntry> scenarios{};
  CertifySettings certify{};
  std::string output_dir{"geonmpc-out"};

  /// Throws ConfigError if any section is inconsistent.
  void validate() const;
};

/// Parses JSON text. Throws ConfigError on malformed input, wrong types, unknown keys or invalid values.
Config parse_config(std::string_view text);

/// Reads and parses a file. Throws ConfigError if it cannot be read.
Config load_config(const std::string & path);

/// Serializes every field (including defaults); parse_config(serialize_config(c)) reproduces c.
std::string serialize_config(const Config & c, int indent = 2);

/// Names of the embedded presets.
const std::vector<std::string> & preset_names();

/// Embedded preset. Throws ConfigError for an unknown name.
Config preset_config(std::string_view name);

/// One (scenario, scheme) pair per configured scenario and scheme, scenario-major.
std::vector<Scenario> expand_scenarios(const Config & c);

}  // namespace geonmpc

#pragma once

#include "btltrack/harness.hpp"

#include <filesystem>
#include <string>

namespace btltrack {

/// Run-level settings that live in the config file but are not part of the
/// experiment itself.
struct RunSettings {
  /// Fraction of diverged runs (any variant) above which the CLI exits 3.
  double max_divergence_fraction = 0.5;
};

struct LoadedConfig {
  ExperimentConfig experiment;
  RunSettings settings;
};

/// Parses the sectioned key = value format:
///
///   [model]            ts, q1, q2, omega_epsilon, x0, p0_diag, process_noise
///   [sensors.source]   sigma_r, sigma_zeta, iw_star
///   [sensors.primary]  sigma_r, sigma_zeta, iw
///   [filters.N]        rule (ut|ckf3|ckf5), alpha, kappa, modes
///   [mc]               mc, k_steps, seed, init, measurement_noise,
///                      divergence_m, max_divergence_fraction,
///                      predicted_points (redraw|reuse), mvf_covariance (fused|sensor)
///
/// Missing keys take the reference_scenario() defaults. Errors throw Error(InvalidConfig)
/// with a "file:line: section.key: message" diagnostic.
LoadedConfig parse_config(const std::string& text, const std::string& origin = "<config>");
LoadedConfig load_config(const std::filesystem::path& path);

RuleKind parse_rule_kind(const std::string& s);
FilterMode parse_mode(const std::string& s);
InitMode parse_init_mode(const std::string& s);

}  // namespace btltrack

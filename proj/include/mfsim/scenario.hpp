#pragma once

#include <exception>
#include <string>
#include <utility>
#include <vector>

#include "mfsim/bifurcation.hpp"
#include "mfsim/config.hpp"

namespace mfsim {

/// What a scenario run wrote. File names are relative to `directory` and in
/// write order; the manifest itself is the last entry.
struct ScenarioResult {
  std::string directory;
  std::vector<std::string> files;
  /// Contents of <prefix>_summary.json.
  std::string summary_json;
  std::string manifest_json() const;
};

/// Runs the particle system and/or the reduced flow, the configured analyses
/// and, when the config has a [sweep] block, the sweep. Writes
///   <prefix>_particles.csv, <prefix>_reduced.csv   (mean trajectories)
///   <prefix>_coeffs.csv                           (Hermite coefficients)
///   <prefix>_bifurcations.json                    (sweep only)
///   <prefix>_summary.json, <prefix>_manifest.json
/// Throws ConfigError, BlowUpError (with the run named) or Error on I/O failure.
ScenarioResult run_scenario(const ScenarioConfig& config);

/// Only the [sweep] block: <prefix>_bifurcations.json, summary and manifest.
ScenarioResult run_sweep(const ScenarioConfig& config);

/// Model and coupling with one named scalar replaced: a model parameter, or
/// one of delta, sigma, sigma2, k (applied to every axis).
std::pair<ModelSpec, CouplingSpec> with_parameter(const ScenarioConfig& config,
                                                  const std::string& name, double value);

/// Centre used for cycle detection: the centroid of the averaged flow's fixed
/// points in `lo`..`hi`, or the box centre when there are none.
Vec cycle_center(const AveragedField& rhs, const Vec& lo, const Vec& hi);

/// {"error": <kind>, "messages": [...]} plus "time" and "index" for blow-ups.
std::string error_json(const std::exception& e);

/// 2 for configuration errors, 1 otherwise.
int exit_code_for(const std::exception& e);

}  // namespace mfsim

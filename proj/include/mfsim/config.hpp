#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mfsim/model_zoo.hpp"

namespace mfsim {

enum class RunMode { kParticles, kReduced, kBoth };
enum class InitKind { kGaussian, kPoint };
enum class SweepDetector { kHopf, kPitchfork, kSnc, kCyclePresence };

const char* to_string(RunMode m);
const char* to_string(InitKind k);
const char* to_string(SweepDetector d);

struct RunBlock {
  RunMode mode = RunMode::kParticles;
  std::size_t N = 0;
  double dt = 0.0;
  double t_end = 0.0;
  std::size_t record_every = 1;
  std::uint64_t seed = 0;
  InitKind init = InitKind::kGaussian;
  Vec m0;
  bool record_cov = false;
  /// Reduced-flow step; defaults to dt.
  std::optional<double> reduced_dt;

  bool operator==(const RunBlock&) const = default;
};

struct AnalysisBlock {
  bool hermite = false;
  double hermite_theta = 1.0;
  int hermite_degree = 6;
  /// Coefficients are estimated every this many records.
  std::size_t hermite_every = 1;
  bool cycle_detection = true;
  std::size_t cycle_crossings = 5;
  double cycle_spread = 1e-2;
  std::optional<Vec> cycle_center;
  /// Extra particle runs for the phase-residual and manifold-distance slopes.
  Vec residual_deltas;
  double settle_time = 0.0;

  bool operator==(const AnalysisBlock&) const = default;
};

struct SweepBlock {
  std::string parameter;
  SweepDetector detector = SweepDetector::kHopf;
  std::optional<std::pair<double, double>> bracket;
  Vec values;
  std::string branch = "principal";
  Vec probe;
  double dt = 1e-3;
  double t_end = 2000.0;
  double tolerance = 1e-3;

  bool operator==(const SweepBlock&) const = default;
};

struct OutputBlock {
  std::string directory = ".";
  std::string prefix = "scenario";

  bool operator==(const OutputBlock&) const = default;
};

/// A parsed and validated scenario.
struct ScenarioConfig {
  std::string model;
  ParamMap model_params;
  Vec k;
  Vec sigma;
  double delta = 0.0;
  RunBlock run;
  AnalysisBlock analysis;
  std::optional<SweepBlock> sweep;
  OutputBlock output;

  bool operator==(const ScenarioConfig&) const = default;

  ModelSpec make_model() const;
  CouplingSpec coupling() const;
};

/// Parses the flat-section text format (see README):
///
///   # comment
///   [section]
///   key = value            numbers: decimal with optional exponent
///   key = 1.0, 2.0         vectors: comma separated
///
/// `overrides` are "section.key=value" strings applied on top of the text
/// before validation. Throws ConfigError listing every problem, each with its
/// line number where one exists.
ScenarioConfig parse_config(const std::string& text,
                            const std::vector<std::string>& overrides = {});

/// Canonical text; parse_config(print_config(c)) == c.
std::string print_config(const ScenarioConfig& config);

/// Directory searched for shipped presets (MFSIM_PRESET_DIR environment
/// variable, else the source tree's presets/).
std::string preset_directory();
std::vector<std::string> preset_names();
/// Text of a shipped preset; throws ConfigError for unknown names.
std::string preset_text(const std::string& name);

}  // namespace mfsim

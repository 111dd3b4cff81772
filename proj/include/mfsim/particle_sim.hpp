#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mfsim/coupling.hpp"
#include "mfsim/model_zoo.hpp"
#include "mfsim/trajectory.hpp"

namespace mfsim {

/// Initial law of the particle cloud.
struct InitLaw {
  enum class Kind { kPointMass, kGaussian, kExplicit };
  Kind kind = Kind::kGaussian;
  Vec m0;
  /// kExplicit only: N x d row-major positions and optional stream ids (default 0..N-1).
  std::vector<double> rows;
  std::vector<std::uint64_t> stream_ids;

  static InitLaw point_mass(Vec m0);
  /// N(m0, sigma^2 K^-1), re-centred so the sample mean equals m0.
  static InitLaw gaussian(Vec m0);
  static InitLaw explicit_rows(std::vector<double> rows, std::vector<std::uint64_t> ids = {});
};

struct SimConfig {
  ModelSpec model;
  CouplingSpec coupling;
  std::size_t N = 1000;
  double dt = 1e-3;
  double t_end = 0.0;
  std::size_t record_every = 1;
  InitLaw init;
  std::uint64_t seed = 0;
  bool record_cov = false;

  /// Throws ConfigError listing every violated constraint:
  /// N >= 1, dt > 0, dt * max(k) < 1, t_end >= 0, record_every >= 1,
  /// matching dimensions.
  void validate() const;
};

/// Particle positions at one instant.
///
/// Rows are kept sorted by stream id; each particle draws its noise from the
/// counter-based stream (seed, stream id, step index), so the evolution does
/// not depend on row order or thread count.
struct EnsembleState {
  double t = 0.0;
  std::uint64_t step_index = 0;
  std::uint64_t master_seed = 0;
  std::size_t dim = 0;
  std::vector<double> X;
  std::vector<std::uint64_t> stream;
  /// Empirical mean of X, refreshed after every step.
  Vec mean;

  std::size_t size() const noexcept { return dim == 0 ? 0 : X.size() / dim; }
  std::span<const double> row(std::size_t i) const { return {X.data() + i * dim, dim}; }
};

/// Maximum |X_i| tolerated before a step is declared a blow-up.
inline constexpr double kBlowUpThreshold = 1e6;

EnsembleState init_ensemble(const SimConfig& config);

/// Euler-Maruyama step
///   X_i <- X_i + (delta F(X_i) - K (X_i - mean)) dt + sqrt(2 dt) sigma xi_i
/// using the pre-step empirical mean. Throws BlowUpError (time and worst
/// particle) if any particle leaves |x| <= kBlowUpThreshold.
void step(EnsembleState& state, const SimConfig& config);

/// Centred sample covariance (1/N normalisation), row-major d x d.
Vec centered_covariance(const EnsembleState& state);

/// Called at every record, including t = 0 and the final time.
using EnsembleObserver = std::function<void(const EnsembleState&)>;

/// Steps to t_end (round(t_end / dt) steps) recording every `record_every`
/// steps and at the final step.
MeanTrajectory run(const SimConfig& config, const EnsembleObserver& observer = {});
MeanTrajectory run_from(EnsembleState state, const SimConfig& config,
                        const EnsembleObserver& observer = {});

namespace kernels {

/// Fixed-shape reduction: particles are summed sequentially inside blocks of
/// kReduceBlock rows and the block sums are combined by a pairwise tree. The
/// parallel and serial variants produce identical bits.
inline constexpr std::size_t kReduceBlock = 256;

Vec mean_serial(std::span<const double> X, std::size_t dim);
Vec mean_parallel(std::span<const double> X, std::size_t dim);

struct StepArgs {
  const VectorField* field;
  const double* k;
  const double* noise_scale;  // sqrt(2 dt) sigma_i
  const double* mean;
  double delta;
  double dt;
  std::uint64_t seed;
  std::uint64_t step_index;
};

/// Index of the worst offending particle, or SIZE_MAX when all stayed finite.
std::size_t step_serial(std::span<double> X, std::span<const std::uint64_t> stream,
                        std::size_t dim, const StepArgs& args);
std::size_t step_parallel(std::span<double> X, std::span<const std::uint64_t> stream,
                          std::size_t dim, const StepArgs& args);

}  // namespace kernels

}  // namespace mfsim

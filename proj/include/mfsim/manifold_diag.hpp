#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mfsim/coupling.hpp"
#include "mfsim/model_zoo.hpp"
#include "mfsim/particle_sim.hpp"
#include "mfsim/reduced_flow.hpp"
#include "mfsim/trajectory.hpp"

namespace mfsim {

// ---------------------------------------------------------------------------
// Scaled Hermite basis
//
//   psi_l(x) = prod_i H_{l_i}(sqrt(theta k_i / sigma_i^2) x_i)
//
// with H_n the probabilists' Hermite polynomials normalised to unit norm under
// the standard Gaussian: H_0 = 1, H_1 = x, H_{n+1} = (x H_n - sqrt(n) H_{n-1}) / sqrt(n+1).
// For theta = 1 these are the eigenfunctions of the Ornstein-Uhlenbeck
// generator sigma^2 d^2 - k x d, with eigenvalues -sum_i k_i l_i.

using MultiIndex = std::vector<int>;

/// H_0(x) .. H_nmax(x) into out[0..nmax].
void hermite_table(int nmax, double x, std::span<double> out);
double hermite_1d(int n, double x);

/// Requires theta > 0 and sigma_i > 0 (throws DomainError otherwise).
double hermite_eval(const MultiIndex& l, const Vec& x, double theta, const CouplingSpec& coupling);

/// All l in N^d with |l| <= max_degree, by total degree and then
/// lexicographically (l = 0 first).
std::vector<MultiIndex> multi_indices(std::size_t d, int max_degree);

/// Z = prod_i sqrt(2 pi sigma_i^2 / (theta k_i)), normaliser of the weight
/// exp(-theta sum_i k_i x_i^2 / (2 sigma_i^2)).
double hermite_normalizer(double theta, const CouplingSpec& coupling);

/// c^0_l = E[psi_l(X)] for X ~ q_0 = N(0, sigma^2 K^-1); zero for l != 0 when
/// theta = 1, one-dimensional Gauss-Hermite quadrature otherwise.
Vec reference_coeffs(const std::vector<MultiIndex>& index, double theta, const CouplingSpec& coupling);

struct HermiteCoeffSet {
  double theta = 1.0;
  int max_degree = 6;
  CouplingSpec coupling;
  std::vector<MultiIndex> index;
  /// c_l = (1/N) sum_i psi_l(X_i - mean) (c_0 = 1).
  Vec coeffs;
  /// Sample variance of psi_l(X_i - mean), for standard errors.
  Vec variances;
  std::size_t samples = 0;
  bool mean_subtracted = true;

  /// Coefficients in the orthonormal basis of L^2 with weight Z^-1 exp(...):
  /// Z^{-1/2} c_l, so the constant coefficient is Z^{-1/2}.
  double normalized(std::size_t i) const;
  std::size_t find(const MultiIndex& l) const;
};

inline constexpr int kDefaultHermiteDegree = 6;

/// Parallel reduction over particles with a fixed block shape; bit-identical to
/// estimate_coeffs_serial for every thread count.
HermiteCoeffSet estimate_coeffs(std::span<const double> X, std::size_t dim,
                                const CouplingSpec& coupling, bool mean_subtract = true,
                                double theta = 1.0, int max_degree = kDefaultHermiteDegree);
HermiteCoeffSet estimate_coeffs(const EnsembleState& state, const CouplingSpec& coupling,
                                bool mean_subtract = true, double theta = 1.0,
                                int max_degree = kDefaultHermiteDegree);
HermiteCoeffSet estimate_coeffs_serial(std::span<const double> X, std::size_t dim,
                                       const CouplingSpec& coupling, bool mean_subtract = true,
                                       double theta = 1.0, int max_degree = kDefaultHermiteDegree);

/// sqrt(sum_l (c_l - c^0_l)^2) over all retained l.
///
/// With `debias` set, the expected sampling contribution sum_l Var(psi_l)/N is
/// subtracted from the squared sum (clamped at zero) so the result estimates
/// the distance of the underlying law rather than of the empirical measure.
/// First-degree terms are exact after mean subtraction and are not corrected.
double l2_distance_to_q0(const HermiteCoeffSet& coeffs, bool debias = false);

/// Expected value of the squared distance for samples drawn from q_0 itself:
/// sum over l != 0 of Var(psi_l)/N.
double sampling_floor_sq(const HermiteCoeffSet& coeffs);

/// Coefficient time series.
struct CoeffSeries {
  std::vector<double> times;
  std::vector<HermiteCoeffSet> sets;
};

/// CSV "t,l,c" with the multi-index written as l_1;...;l_d.
void write_coeff_csv(const CoeffSeries& series, std::ostream& os);

// ---------------------------------------------------------------------------
// Diagnostics

struct DecayFit {
  MultiIndex l;
  double predicted = 0.0;  // theta sum_i k_i l_i
  double rate = 0.0;
  bool resolved = false;
  std::size_t points = 0;
};

/// Exponential fit of |c_l(t)| for every 1 <= |l| <= max_degree, using the
/// records before the coefficient first drops below `floor_sigmas` standard
/// errors. A coefficient whose initial value is below `min_initial_sigmas`
/// standard errors (and 10/sqrt(N)) is reported unresolved.
std::vector<DecayFit> ou_decay_rates(const CoeffSeries& series, int max_degree = 3,
                                     double floor_sigmas = 5.0, double min_initial_sigmas = 10.0);

struct ContractionReport {
  std::vector<double> times;
  std::vector<double> distance;
  double rate = 0.0;
  double fit_from = 0.0;
};

/// Runs two ensembles with identical seeds (common random numbers) from
/// initial laws `a` and `b` and records the coefficient-space distance
/// |c(a) - c(b)| at every record. The rate is the least-squares slope of
/// -log distance over t >= fit_from. Per-particle differences contract at
/// min k_i once the two laws agree, which is the asymptotic rate fitted here.
ContractionReport contraction_test(const SimConfig& base, const InitLaw& a, const InitLaw& b,
                                   double fit_from, double theta = 1.0,
                                   int max_degree = kDefaultHermiteDegree);

/// Least-squares slope of log y against x.
double log_slope(std::span<const double> x, std::span<const double> y);

/// One settled run of the phase-residual study.
struct ResidualRun {
  double delta = 0.0;
  MeanTrajectory traj;
  /// Optional: particle average of F at each record (same times as traj) and
  /// its per-component variance over the particles.
  std::vector<Vec> drift;
  std::vector<Vec> drift_var;
  /// Records with t < settle_time are ignored.
  double settle_time = 0.0;
  std::size_t particles = 0;
};

enum class ResidualEstimator {
  /// dm/dt by a smoothed derivative of the recorded mean.
  kDifference,
  /// dm/dt / delta = particle average of F exactly (the interaction term sums
  /// to zero), leaving only the sampling noise of that average.
  kDrift,
};

struct ResidualScalingReport {
  ResidualEstimator estimator = ResidualEstimator::kDifference;
  std::vector<double> deltas;
  std::vector<double> residual_norms;
  /// Predicted one-sigma noise level of the residual per run.
  std::vector<double> predicted_floor;
  std::vector<std::size_t> window;
  double slope = 0.0;
  std::vector<std::string> warnings;
};

/// Window rule W = max(5, round(0.1 / dt_record)).
std::size_t default_smoothing_window(double dt_record);

/// Smoothed derivative: local cubic least-squares fit over W centred samples
/// (W forced odd). Entries within W/2 of either end are NaN.
std::vector<Vec> smoothed_derivative(const MeanTrajectory& traj, std::size_t window);

/// residual(delta) = sup over t >= settle_time of |dm/dt / delta - F̄(m)|, and
/// the log-log slope across runs. `window` = 0 selects the default rule.
ResidualScalingReport phase_residual_scaling(const AveragedField& rhs_at_unit_delta,
                                             const std::vector<ResidualRun>& runs,
                                             ResidualEstimator estimator,
                                             std::size_t window = 0);

/// Observer appending, at every record, the particle average of F and the
/// per-component variance of F over the particles.
EnsembleObserver drift_recorder(const ModelSpec& model, std::vector<Vec>& mean,
                                std::vector<Vec>& variance);

}  // namespace mfsim

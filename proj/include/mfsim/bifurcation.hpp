#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mfsim/reduced_flow.hpp"
#include "mfsim/trajectory.hpp"

namespace mfsim {

// ---------------------------------------------------------------------------
// Fixed points

enum class Stability { kStable, kUnstable, kSaddle, kMarginal };
const char* to_string(Stability s);

struct FixedPoint {
  Vec location;
  /// Linearisation of dm/dt = delta F̄(m) (of F̄ itself when delta = 0).
  Eigen::MatrixXd jacobian;
  std::vector<std::complex<double>> eigenvalues;
  Stability stability = Stability::kMarginal;
  double residual = 0.0;
};

struct FixedPointSet {
  std::vector<FixedPoint> points;
  std::size_t seeds = 0;
  std::size_t converged = 0;
  /// Set when no seed converged.
  std::string diagnostic;
};

/// Damped Newton on F̄ from every node of a `grid`^d lattice over the box
/// [lo, hi]; at most 50 iterations, step halving while the residual grows,
/// convergence at |F̄| <= 1e-12 and acceptance at 1e-10. Roots closer than
/// 1e-8 are merged and the result is sorted lexicographically.
FixedPointSet solve_fixed_points(const AveragedField& rhs, const Vec& lo, const Vec& hi,
                                 int grid);

Stability classify(const std::vector<std::complex<double>>& eigenvalues);

// ---------------------------------------------------------------------------
// FitzHugh-Nagumo closed forms. With the noise shift absorbed into u, fixed
// points satisfy y = (x + a)/b and x^3 + 3(1/b - u) x + 3a/b = 0.

/// Real roots of x^3 + p x + q = 0 in increasing order, Newton-polished.
std::vector<double> depressed_cubic_roots(double p, double q);

/// x-coordinate of the fixed point. For a = 1/3, b = 1 the Cardano closed form
/// is used (rearranged to avoid cancellation near u = 1); elsewhere, or if its
/// discriminant is negative, the cubic solver. Throws DomainError when the
/// cubic has more than one real root outside the closed-form regime.
double fhn_fixed_point_x0(double u, double a, double b);

/// Which fixed point a Hopf search follows.
enum class FhnBranch {
  kPrincipal,   // the unique fixed point (fhn_fixed_point_x0)
  kTrivial,     // x = 0, requires a = 0
  kNontrivial,  // x^2 = 3(u - 1/b), requires a = 0 and u > 1/b
};

/// Trace of the linearisation at the branch point: u - x0(u)^2 - b/tau.
double fhn_hopf_trace(double u, double a, double b, double tau, FhnBranch branch);

// ---------------------------------------------------------------------------
// Bifurcation points

enum class BifurcationKind { kHopf, kPitchfork, kSaddleNodeOfCycles, kHomoclinic };
enum class DetectionMethod { kClosedForm, kRootFind, kBisectionSim };
const char* to_string(BifurcationKind k);
const char* to_string(DetectionMethod m);

struct BifurcationPoint {
  BifurcationKind kind = BifurcationKind::kHopf;
  std::string parameter = "u";
  double value = 0.0;
  double tolerance = 0.0;
  DetectionMethod method = DetectionMethod::kClosedForm;
  std::string note;

  /// {"kind", "parameter", "value", "tolerance", "method"[, "note"]}
  std::string to_json() const;
};

/// Root of fhn_hopf_trace on [u_lo, u_hi] (TOMS 748), |Δu| well below 1e-6.
/// Throws BracketError without a sign change. Criticality is not classified.
BifurcationPoint hopf_locus_fhn(double a, double b, double tau, double u_lo, double u_hi,
                                FhnBranch branch = FhnBranch::kPrincipal);

/// u* = 1/b for the symmetric (a = 0) family. Throws DomainError for b <= 0.
BifurcationPoint pitchfork_locus_fhn(double b);

// ---------------------------------------------------------------------------
// Limit cycles

struct LimitCycle {
  double period = 0.0;
  double amplitude = 0.0;
  /// Times and radii of the same-direction section crossings used.
  std::vector<double> section_times;
  std::vector<double> section_radii;
  /// Largest radius reached between consecutive crossings.
  std::vector<double> turn_max_radii;
  /// (max - min) / mean of the measure selected in CycleOptions.
  double radius_spread = 0.0;
  /// False when successive section radii still drift apart faster than
  /// interpolation jitter (1e-3 of the mean radius).
  bool stable = true;
};

enum class SpreadMeasure {
  /// Radii at the section crossings.
  kSectionRadius,
  /// Largest radius of each turn, a section transversal to the flow by
  /// construction; robust when the section ray is nearly tangent somewhere.
  kTurnMaximum,
};

struct CycleOptions {
  /// Same-direction crossings needed (period from their mean spacing).
  std::size_t crossings = 5;
  /// Maximum (max - min) / mean of the radii selected by `spread`.
  double radius_spread = 1e-2;
  SpreadMeasure spread = SpreadMeasure::kSectionRadius;
  /// Angle of the section ray about the centre, radians.
  double section_angle = 0.0;
  /// Crossings closer to the centre than this are ignored, so the section is
  /// the part of the ray outside this radius.
  double min_section_radius = 0.0;
};

/// Crossings of the ray theta = section_angle about `center` in the direction
/// of net rotation, linearly interpolated between samples. Each turn counts
/// once, so jitter across the ray does not add crossings.
std::optional<LimitCycle> detect_limit_cycle(const MeanTrajectory& traj, const Vec& center,
                                             const CycleOptions& opts = {});

struct Section {
  double angle = 0.0;
  double max_radius = 0.0;
};

/// Ray through the record with the largest radius about `center` among
/// t >= t_from. The orbit is tangent to the circle there, so it crosses that
/// ray transversally.
Section transversal_section(const MeanTrajectory& traj, const Vec& center, double t_from);

/// A one-parameter family of reduced flows started from a fixed probe.
struct CycleProbe {
  std::function<AveragedField(double)> family;
  std::function<Vec(double)> center;
  Vec start;
  double dt = 1e-3;
  double t_end = 2000.0;
  std::size_t record_every = 10;
  CycleOptions options;

  bool has_cycle(double param) const;
};

/// FHN family in u (no noise shift, delta = 1), centred on the principal fixed
/// point when it is unique and on the origin otherwise.
CycleProbe fhn_cycle_probe(double a, double b, double tau, Vec start);

/// Bisection on cycle existence: present at lo, absent at hi. Stops when the
/// bracket is <= tol wide; tolerance reported = half the final bracket.
BifurcationPoint snc_bisection(const CycleProbe& probe, double lo, double hi, double tol = 1e-3);

/// Experimental. Double homoclinic loop of the symmetric family, seen as the
/// parameter where orbits leaving the saddle stop reaching the outer cycle.
/// `near_saddle` must reach a cycle at lo but not at hi, and `far` must reach
/// one at both ends (otherwise the change is a cycle fold, not a homoclinic).
BifurcationPoint homoclinic_bisection(const CycleProbe& near_saddle, const CycleProbe& far,
                                      double lo, double hi, double tol = 1e-3);

}  // namespace mfsim

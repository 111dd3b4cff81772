#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mfsim/coupling.hpp"
#include "mfsim/gauss_avg.hpp"
#include "mfsim/model_zoo.hpp"
#include "mfsim/trajectory.hpp"

namespace mfsim {

/// The averaged field m -> F̄(m), either from the model's closed form or from a
/// tensor Gauss-Hermite rule whose nodes are tabulated once.
class AveragedField {
 public:
  AveragedField(ModelSpec model, CouplingSpec coupling, bool use_closed_avg,
                int quadrature_order = kDefaultQuadratureOrder);

  std::size_t dim() const noexcept { return dim_; }
  bool uses_closed_form() const noexcept { return closed_; }
  const ModelSpec& model() const noexcept { return model_; }
  const CouplingSpec& coupling() const noexcept { return coupling_; }

  /// Allocation-free evaluation; not safe to call concurrently on one object.
  void eval(std::span<const double> m, std::span<double> out) const;
  Vec operator()(const Vec& m) const;
  /// Always by quadrature of DF (exact for polynomial fields).
  Eigen::MatrixXd jacobian(const Vec& m) const;

 private:
  ModelSpec model_;
  CouplingSpec coupling_;
  std::size_t dim_;
  bool closed_;
  int order_;
  std::vector<double> nodes_;    // scaled offsets sqrt(varpi) * z, row-major
  std::vector<double> weights_;
  mutable std::vector<double> x_, f_;
};

struct ReducedConfig {
  ModelSpec model;
  CouplingSpec coupling;
  Vec m0;
  double dt = 1e-3;
  double t_end = 0.0;
  bool use_closed_avg = true;
  std::size_t record_every = 1;
  int quadrature_order = kDefaultQuadratureOrder;

  /// Throws ConfigError listing every problem.
  void validate() const;
};

/// Classical RK4 for dm/dt = delta F̄(m), in the particle system's clock.
/// Records t = 0, every `record_every` steps and the final step. Throws
/// BlowUpError if |m| exceeds 1e6.
MeanTrajectory integrate(const ReducedConfig& config);

/// Same integrator for an already constructed right-hand side (reused across
/// many runs, e.g. in bisections).
MeanTrajectory integrate(const AveragedField& rhs, const Vec& m0, double dt, double t_end,
                         std::size_t record_every = 1);

struct BoundaryReport {
  double radius = 0.0;
  std::size_t samples = 0;
  /// max over the sphere of n(m) . F̄(m)
  double max_normal_drift = 0.0;
  Vec argmax;
  /// True when every sample points strictly inward.
  bool strictly_inward = false;
};

/// Samples the sphere |m| = radius (uniform angles in d = 2, seeded directions
/// otherwise) and checks that the averaged field points inward.
BoundaryReport boundary_inward_test(const ModelSpec& model, const CouplingSpec& coupling,
                                    double radius, std::size_t samples,
                                    int quadrature_order = kDefaultQuadratureOrder);

}  // namespace mfsim

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mfsim/coupling.hpp"
#include "mfsim/model_zoo.hpp"

namespace mfsim {

inline constexpr int kDefaultQuadratureOrder = 20;

/// One-dimensional Gauss-Hermite rule for the standard normal weight
/// exp(-z^2/2)/sqrt(2 pi). Exact for polynomials of degree <= 2*order - 1.
struct HermiteRule1D {
  int order = 0;
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Nodes and weights from the symmetric tridiagonal Jacobi matrix
/// (Golub-Welsch). Results are cached per order; the returned reference stays
/// valid for the life of the process.
const HermiteRule1D& hermite_rule(int order);

/// Tensor product of `dim` copies of a 1-D rule.
class QuadratureRule {
 public:
  QuadratureRule(int order, std::size_t dim);
  int order() const noexcept { return rule_->order; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept;
  const HermiteRule1D& axis() const noexcept { return *rule_; }

  /// Standard-normal node and weight for flat index `n` (axis 0 varies fastest).
  double node(std::size_t n, std::span<double> z) const;

 private:
  const HermiteRule1D* rule_;
  std::size_t dim_;
};

/// Diagonal-covariance Gaussian N(mean, diag(cov_diag)).
struct GaussianSpec {
  Vec mean;
  Vec cov_diag;
};

/// Density q_{m, Gamma}(x). Throws DomainError on a nonpositive variance or a
/// dimension mismatch.
double gaussian_density(const GaussianSpec& spec, const Vec& x);

/// E[g(Z)] for Z ~ N(mean, diag(cov_diag)), g: R^d -> R^p written into `out`.
/// Zero variances are allowed and collapse that axis onto the mean.
using IntegrandFn = std::function<void(std::span<const double> x, std::span<double> out)>;
Vec gaussian_expectation(const IntegrandFn& g, std::size_t out_dim, const GaussianSpec& spec,
                         const QuadratureRule& rule);

/// Gaussian-averaged field  int F(x) q_{m, sigma^2 K^-1}(x) dx.
/// Throws DomainError on dimension mismatch and NumericError (carrying the
/// offending node) if F is not finite at a node.
Vec average_field(const ModelSpec& model, const CouplingSpec& coupling, const Vec& m,
                  const QuadratureRule& rule);

/// int DF(x) q_{m, sigma^2 K^-1}(x) dx, which is the Jacobian of average_field in m.
Eigen::MatrixXd average_field_jacobian(const ModelSpec& model, const CouplingSpec& coupling,
                                       const Vec& m, const QuadratureRule& rule);

}  // namespace mfsim

#include <cmath>
#include <map>
#include <memory>
#include <mutex>

#include <Eigen/Eigenvalues>

#include "mfsim/errors.hpp"
#include "mfsim/gauss_avg.hpp"

namespace mfsim {

const HermiteRule1D& hermite_rule(int order) {
  if (order < 1 || order > 200) throw DomainError("quadrature order must be in [1, 200]");
  static std::mutex mu;
  static std::map<int, std::unique_ptr<HermiteRule1D>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[order];
  if (slot) return *slot;

  // Probabilists' Hermite recurrence: z He_k = He_{k+1} + k He_{k-1}, so the
  // Jacobi matrix has zero diagonal and off-diagonal sqrt(k).
  const Eigen::Index n = order;
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(std::max<Eigen::Index>(n - 1, 0));
  for (Eigen::Index k = 0; k + 1 < n; ++k) sub(k) = std::sqrt(static_cast<double>(k + 1));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success) throw NumericError("Golub-Welsch eigenproblem failed");

  // Eigenvectors give weights with only absolute accuracy, which is poor for
  // the outer nodes. Polish each node by Newton on the orthonormal h_n and take
  // the Christoffel weight 1 / sum_{k<n} h_k(z)^2 instead.
  auto rule = std::make_unique<HermiteRule1D>();
  rule->order = order;
  rule->nodes.resize(static_cast<std::size_t>(n));
  rule->weights.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    double z = es.eigenvalues()(i);
    for (int iter = 0; iter < 4; ++iter) {
      double h_prev = 0.0, h = 1.0;
      for (int k = 0; k < order; ++k) {
        const double h_next = (z * h - std::sqrt(static_cast<double>(k)) * h_prev) /
                              std::sqrt(static_cast<double>(k + 1));
        h_prev = h;
        h = h_next;
      }
      // h = h_n(z), h_prev = h_{n-1}(z), h_n' = sqrt(n) h_{n-1}.
      const double step = h / (std::sqrt(static_cast<double>(order)) * h_prev);
      if (!std::isfinite(step)) break;
      z -= step;
    }
    double h_prev = 0.0, h = 1.0, christoffel = 1.0;
    for (int k = 0; k + 1 < order; ++k) {
      const double h_next = (z * h - std::sqrt(static_cast<double>(k)) * h_prev) /
                            std::sqrt(static_cast<double>(k + 1));
      h_prev = h;
      h = h_next;
      christoffel += h * h;
    }
    rule->nodes[static_cast<std::size_t>(i)] = z;
    rule->weights[static_cast<std::size_t>(i)] = 1.0 / christoffel;
  }
  // Symmetrise: the exact rule is symmetric about 0.
  for (std::size_t i = 0, j = rule->nodes.size() - 1; i < j; ++i, --j) {
    const double z = 0.5 * (rule->nodes[j] - rule->nodes[i]);
    const double w = 0.5 * (rule->weights[i] + rule->weights[j]);
    rule->nodes[i] = -z;
    rule->nodes[j] = z;
    rule->weights[i] = rule->weights[j] = w;
  }
  if (order % 2 == 1) rule->nodes[static_cast<std::size_t>(order / 2)] = 0.0;
  slot = std::move(rule);
  return *slot;
}

QuadratureRule::QuadratureRule(int order, std::size_t dim) : rule_(&hermite_rule(order)), dim_(dim) {
  if (dim == 0) throw DomainError("quadrature dimension must be positive");
}

std::size_t QuadratureRule::size() const noexcept {
  std::size_t n = 1;
  for (std::size_t i = 0; i < dim_; ++i) n *= static_cast<std::size_t>(rule_->order);
  return n;
}

double QuadratureRule::node(std::size_t n, std::span<double> z) const {
  const auto q = static_cast<std::size_t>(rule_->order);
  double w = 1.0;
  for (std::size_t i = 0; i < dim_; ++i) {
    const std::size_t k = n % q;
    n /= q;
    z[i] = rule_->nodes[k];
    w *= rule_->weights[k];
  }
  return w;
}

}  // namespace mfsim

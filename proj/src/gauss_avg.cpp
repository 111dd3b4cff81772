#include "mfsim/gauss_avg.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "mfsim/errors.hpp"

namespace mfsim {

namespace {

// Node evaluations are spread over threads only for large tensor grids; the
// weighted sum always runs serially in node order so results do not depend on
// the thread count.
constexpr std::size_t kParallelNodeThreshold = 4096;

Vec sqrt_varpi(const CouplingSpec& coupling) {
  Vec s(coupling.dim());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::sqrt(coupling.varpi()[i]);
  return s;
}

// Fills vals[n*p .. n*p+p) with g(mean + scale * z_n) and returns the weights.
std::vector<double> evaluate_nodes(const IntegrandFn& g, std::size_t p, const Vec& mean,
                                   const Vec& scale, const QuadratureRule& rule,
                                   std::vector<double>& vals) {
  const std::size_t d = rule.dim();
  const std::size_t n_nodes = rule.size();
  std::vector<double> weights(n_nodes);
  vals.assign(n_nodes * p, 0.0);
  const auto n_signed = static_cast<long long>(n_nodes);
#pragma omp parallel for schedule(static) if (n_nodes >= kParallelNodeThreshold)
  for (long long n = 0; n < n_signed; ++n) {
    Vec z(d), x(d);
    const auto idx = static_cast<std::size_t>(n);
    weights[idx] = rule.node(idx, z);
    for (std::size_t i = 0; i < d; ++i) x[i] = mean[i] + scale[i] * z[i];
    g(x, std::span<double>(vals.data() + idx * p, p));
  }
  for (std::size_t n = 0; n < n_nodes; ++n) {
    for (std::size_t j = 0; j < p; ++j) {
      if (!std::isfinite(vals[n * p + j])) {
        Vec z(d), x(d);
        rule.node(n, z);
        for (std::size_t i = 0; i < d; ++i) x[i] = mean[i] + scale[i] * z[i];
        throw NumericError("integrand is not finite at a quadrature node", x);
      }
    }
  }
  return weights;
}

Vec weighted_sum(const std::vector<double>& weights, const std::vector<double>& vals, std::size_t p) {
  Vec out(p, 0.0);
  for (std::size_t n = 0; n < weights.size(); ++n)
    for (std::size_t j = 0; j < p; ++j) out[j] += weights[n] * vals[n * p + j];
  return out;
}

}  // namespace

double gaussian_density(const GaussianSpec& spec, const Vec& x) {
  const std::size_t d = spec.mean.size();
  if (spec.cov_diag.size() != d || x.size() != d)
    throw DomainError("gaussian_density: dimension mismatch");
  double log_det = 0.0, quad = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double v = spec.cov_diag[i];
    if (!(v > 0.0)) throw DomainError("gaussian_density: covariance entries must be positive");
    log_det += std::log(v);
    const double r = x[i] - spec.mean[i];
    quad += r * r / v;
  }
  const double log_norm = 0.5 * (static_cast<double>(d) * std::log(2.0 * std::numbers::pi) + log_det);
  return std::exp(-0.5 * quad - log_norm);
}

Vec gaussian_expectation(const IntegrandFn& g, std::size_t out_dim, const GaussianSpec& spec,
                         const QuadratureRule& rule) {
  const std::size_t d = spec.mean.size();
  if (spec.cov_diag.size() != d || rule.dim() != d)
    throw DomainError("gaussian_expectation: dimension mismatch");
  Vec scale(d);
  for (std::size_t i = 0; i < d; ++i) {
    if (!(spec.cov_diag[i] >= 0.0)) throw DomainError("gaussian_expectation: negative variance");
    scale[i] = std::sqrt(spec.cov_diag[i]);
  }
  std::vector<double> vals;
  const auto w = evaluate_nodes(g, out_dim, spec.mean, scale, rule, vals);
  return weighted_sum(w, vals, out_dim);
}

Vec average_field(const ModelSpec& model, const CouplingSpec& coupling, const Vec& m,
                  const QuadratureRule& rule) {
  const std::size_t d = model.dim();
  if (coupling.dim() != d || m.size() != d || rule.dim() != d)
    throw DomainError("average_field: dimension mismatch (model d=" + std::to_string(d) + ")");
  const VectorField& f = *model.field;
  IntegrandFn g = [&f](std::span<const double> x, std::span<double> out) { f.eval(x, out); };
  std::vector<double> vals;
  const auto w = evaluate_nodes(g, d, m, sqrt_varpi(coupling), rule, vals);
  return weighted_sum(w, vals, d);
}

Eigen::MatrixXd average_field_jacobian(const ModelSpec& model, const CouplingSpec& coupling,
                                       const Vec& m, const QuadratureRule& rule) {
  const std::size_t d = model.dim();
  if (coupling.dim() != d || m.size() != d || rule.dim() != d)
    throw DomainError("average_field_jacobian: dimension mismatch");
  const VectorField& f = *model.field;
  IntegrandFn g = [&f](std::span<const double> x, std::span<double> out) { f.jacobian(x, out); };
  std::vector<double> vals;
  const auto w = evaluate_nodes(g, d * d, m, sqrt_varpi(coupling), rule, vals);
  const Vec flat = weighted_sum(w, vals, d * d);
  const auto n = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd J(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) J(i, j) = flat[static_cast<std::size_t>(i * n + j)];
  return J;
}

}  // namespace mfsim

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mfsim/errors.hpp"
#include "mfsim/gauss_avg.hpp"
#include "mfsim/manifold_diag.hpp"

namespace mfsim {

void hermite_table(int nmax, double x, std::span<double> out) {
  out[0] = 1.0;
  if (nmax >= 1) out[1] = x;
  for (int n = 1; n < nmax; ++n) {
    const auto un = static_cast<std::size_t>(n);
    out[un + 1] = (x * out[un] - std::sqrt(static_cast<double>(n)) * out[un - 1]) /
                  std::sqrt(static_cast<double>(n + 1));
  }
}

double hermite_1d(int n, double x) {
  if (n < 0) throw DomainError("hermite_1d: negative degree");
  std::vector<double> h(static_cast<std::size_t>(n) + 1);
  hermite_table(n, x, h);
  return h.back();
}

namespace {

Vec basis_scale(double theta, const CouplingSpec& c) {
  if (!(theta > 0.0)) throw DomainError("Hermite basis: theta must be > 0");
  Vec s(c.dim());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!(c.sigma()[i] > 0.0)) throw DomainError("Hermite basis: sigma must be > 0");
    s[i] = std::sqrt(theta * c.k()[i]) / c.sigma()[i];
  }
  return s;
}

}  // namespace

double hermite_eval(const MultiIndex& l, const Vec& x, double theta, const CouplingSpec& coupling) {
  if (l.size() != coupling.dim() || x.size() != coupling.dim())
    throw DomainError("hermite_eval: dimension mismatch");
  const Vec s = basis_scale(theta, coupling);
  double prod = 1.0;
  for (std::size_t i = 0; i < l.size(); ++i) prod *= hermite_1d(l[i], s[i] * x[i]);
  return prod;
}

std::vector<MultiIndex> multi_indices(std::size_t d, int max_degree) {
  std::vector<MultiIndex> out;
  for (int deg = 0; deg <= max_degree; ++deg) {
    std::vector<MultiIndex> level;
    MultiIndex cur(d, 0);
    auto rec = [&](auto&& self, std::size_t pos, int left) -> void {
      if (pos + 1 == d) {
        cur[pos] = left;
        level.push_back(cur);
        return;
      }
      for (int v = 0; v <= left; ++v) {
        cur[pos] = v;
        self(self, pos + 1, left - v);
      }
    };
    if (d == 0) break;
    rec(rec, 0, deg);
    out.insert(out.end(), level.begin(), level.end());
  }
  return out;
}

double hermite_normalizer(double theta, const CouplingSpec& coupling) {
  const Vec s = basis_scale(theta, coupling);
  double z = 1.0;
  for (double v : s) z *= std::sqrt(2.0 * std::numbers::pi) / v;
  return z;
}

Vec reference_coeffs(const std::vector<MultiIndex>& index, double theta, const CouplingSpec& coupling) {
  basis_scale(theta, coupling);
  Vec ref(index.size(), 0.0);
  int nmax = 0;
  for (const auto& l : index)
    for (int v : l) nmax = std::max(nmax, v);
  // Per-axis moments E[H_n(sqrt(theta) Z)], Z standard normal: the scaled
  // argument of psi_l under q_0 is sqrt(theta) times a standard normal.
  Vec moment(static_cast<std::size_t>(nmax) + 1, 0.0);
  if (theta == 1.0) {
    moment[0] = 1.0;
  } else {
    const HermiteRule1D& rule = hermite_rule(std::max(nmax, 1) + 1);
    std::vector<double> h(moment.size());
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      hermite_table(nmax, std::sqrt(theta) * rule.nodes[q], h);
      for (std::size_t n = 0; n < h.size(); ++n) moment[n] += rule.weights[q] * h[n];
    }
  }
  for (std::size_t j = 0; j < index.size(); ++j) {
    double prod = 1.0;
    for (int v : index[j]) prod *= moment[static_cast<std::size_t>(v)];
    ref[j] = prod;
  }
  return ref;
}

double HermiteCoeffSet::normalized(std::size_t i) const {
  return coeffs.at(i) / std::sqrt(hermite_normalizer(theta, coupling));
}

std::size_t HermiteCoeffSet::find(const MultiIndex& l) const {
  for (std::size_t i = 0; i < index.size(); ++i)
    if (index[i] == l) return i;
  throw DomainError("multi-index not in the coefficient set");
}

}  // namespace mfsim

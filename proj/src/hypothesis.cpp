#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "mfsim/errors.hpp"
#include "mfsim/model_zoo.hpp"

namespace mfsim {

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::kSatisfied: return "satisfied";
    case Verdict::kViolated: return "violated";
    case Verdict::kNotChecked: return "not checked";
  }
  return "?";
}

namespace {

double norm2(const Vec& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

// Tensor grid of `n` points per axis on [-R, R]^d restricted to the ball |x| <= R.
std::vector<Vec> ball_grid(std::size_t d, int n, double radius) {
  std::vector<Vec> pts;
  std::vector<int> idx(d, 0);
  const double h = n > 1 ? 2.0 * radius / (n - 1) : 0.0;
  while (true) {
    Vec x(d);
    for (std::size_t i = 0; i < d; ++i) x[i] = n > 1 ? -radius + h * idx[i] : 0.0;
    if (norm2(x) <= radius * radius * (1.0 + 1e-12)) pts.push_back(std::move(x));
    std::size_t k = 0;
    while (k < d && ++idx[k] == n) idx[k++] = 0;
    if (k == d) break;
  }
  return pts;
}

Vec random_in_ball(std::mt19937_64& rng, std::size_t d, double radius) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  Vec x(d);
  for (auto& v : x) v = normal(rng);
  const double scale = radius * std::pow(unif(rng), 1.0 / static_cast<double>(d)) /
                       std::sqrt(std::max(norm2(x), 1e-300));
  for (auto& v : x) v *= scale;
  return x;
}

// Item (1): (F(x) - F(y)).(x - y) <= C_F |x - y|^2.
// C_F is the sup of the quotient over random pairs and of the largest eigenvalue
// of the symmetrised Jacobian over the grid. A sup that keeps growing between the
// inner half-ball and the full ball means no global constant exists.
HypothesisItem check_one_sided_lipschitz(const ModelSpec& model, const std::vector<Vec>& grid,
                                         double radius, int n_pairs, std::uint64_t seed) {
  const std::size_t d = model.dim();
  HypothesisItem item;
  double sup_all = -std::numeric_limits<double>::infinity();
  double sup_inner = sup_all;
  Vec worst;
  auto consider = [&](double q, const Vec& at) {
    if (q > sup_all) {
      sup_all = q;
      worst = at;
    }
    if (std::sqrt(norm2(at)) <= 0.5 * radius) sup_inner = std::max(sup_inner, q);
  };

  for (const auto& x : grid) {
    const Eigen::MatrixXd J = model.eval_DF(x);
    const Eigen::MatrixXd S = 0.5 * (J + J.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
    consider(es.eigenvalues().maxCoeff(), x);
  }
  std::mt19937_64 rng(seed);
  for (int p = 0; p < n_pairs; ++p) {
    const Vec x = random_in_ball(rng, d, radius);
    const Vec y = random_in_ball(rng, d, radius);
    const Vec fx = model.eval_F(x), fy = model.eval_F(y);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      num += (fx[i] - fy[i]) * (x[i] - y[i]);
      den += (x[i] - y[i]) * (x[i] - y[i]);
    }
    if (den > 1e-20) {
      Vec mid(d);
      for (std::size_t i = 0; i < d; ++i) mid[i] = 0.5 * (x[i] + y[i]);
      consider(num / den, mid);
    }
  }
  item.C_F = std::max(sup_all, 0.0);
  const double growth = sup_all - sup_inner;
  if (growth > 1e-6 * std::max(1.0, std::abs(sup_inner))) {
    item.verdict = Verdict::kViolated;
    item.worst_point = worst;
    item.note = "one-sided Lipschitz constant grows with the sample radius";
  } else {
    item.verdict = Verdict::kSatisfied;
  }
  return item;
}

// Item (2): F(x).A x <= C_F 1{|x|_A <= r} - c_F |x|_A^2 with A = K sigma^-2.
// r is the smallest grid radius beyond which rho(x) = -F(x).Ax / |x|_A^2 stays
// positive; c_F is the largest feasible value min rho outside r; C_F covers the
// inner ball.
HypothesisItem check_dissipativity(const ModelSpec& model, const std::vector<Vec>& grid,
                                   const CouplingSpec& coupling) {
  const std::size_t d = model.dim();
  std::vector<double> A(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double s2 = coupling.sigma()[i] * coupling.sigma()[i];
    A[i] = s2 > 0.0 ? coupling.k()[i] / s2 : 1.0;
  }
  struct Sample {
    double normA;
    double dot;
    double rho;
    const Vec* x;
  };
  std::vector<Sample> samples;
  for (const auto& x : grid) {
    const Vec f = model.eval_F(x);
    double dot = 0.0, nA = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      dot += f[i] * A[i] * x[i];
      nA += A[i] * x[i] * x[i];
    }
    if (nA <= 0.0) continue;
    samples.push_back({std::sqrt(nA), dot, -dot / nA, &x});
  }
  HypothesisItem item;
  if (samples.empty()) {
    item.note = "empty sample";
    return item;
  }
  std::sort(samples.begin(), samples.end(),
            [](const Sample& a, const Sample& b) { return a.normA < b.normA; });
  const double outer = samples.back().normA;
  // Suffix minima of rho.
  std::vector<double> suffix_min(samples.size());
  std::size_t worst = samples.size() - 1;
  double running = std::numeric_limits<double>::infinity();
  for (std::size_t i = samples.size(); i-- > 0;) {
    running = std::min(running, samples[i].rho);
    suffix_min[i] = running;
  }
  std::size_t cut = samples.size();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (suffix_min[i] > 0.0) {
      cut = i;
      break;
    }
  }
  if (cut == samples.size() || samples[cut].normA > 0.9 * outer) {
    for (std::size_t i = 0; i < samples.size(); ++i)
      if (samples[i].normA > 0.9 * outer && samples[i].rho < samples[worst].rho) worst = i;
    item.verdict = Verdict::kViolated;
    item.worst_point = *samples[worst].x;
    item.note = "F(x).Ax is not eventually bounded by -c|x|^2 with c > 0";
    return item;
  }
  item.r = cut > 0 ? samples[cut - 1].normA : 0.0;
  item.c_F = suffix_min[cut];
  double C = 0.0;
  for (std::size_t i = 0; i < cut; ++i)
    C = std::max(C, samples[i].dot + item.c_F * samples[i].normA * samples[i].normA);
  item.C_F = std::max(C, std::numeric_limits<double>::min());
  item.verdict = Verdict::kSatisfied;
  return item;
}

// Item (4): max(|F|, |dF|, |d2F|) <= C_F w_eps(x). C_F is fixed on the inner
// half-ball and eps is the smallest exponent covering the rest of the sample.
HypothesisItem check_growth(const ModelSpec& model, const std::vector<Vec>& grid,
                            const CouplingSpec& coupling, double radius) {
  const std::size_t d = model.dim();
  std::vector<double> A(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double s2 = coupling.sigma()[i] * coupling.sigma()[i];
    A[i] = s2 > 0.0 ? coupling.k()[i] / s2 : 1.0;
  }
  auto size_at = [&](const Vec& x) {
    double g = 0.0;
    for (double v : model.eval_F(x)) g = std::max(g, std::abs(v));
    const Eigen::MatrixXd J = model.eval_DF(x);
    g = std::max(g, J.cwiseAbs().maxCoeff());
    Vec xp = x;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = 1e-4 * std::max(1.0, std::abs(x[j]));
      xp[j] = x[j] + h;
      const Eigen::MatrixXd Jp = model.eval_DF(xp);
      xp[j] = x[j] - h;
      const Eigen::MatrixXd Jm = model.eval_DF(xp);
      xp[j] = x[j];
      g = std::max(g, ((Jp - Jm) / (2.0 * h)).cwiseAbs().maxCoeff());
    }
    return g;
  };
  std::vector<std::pair<double, double>> s_logg;  // (|x|_A^2 / 2, log g)
  double C = 0.0;
  for (const auto& x : grid) {
    double nA = 0.0;
    for (std::size_t i = 0; i < d; ++i) nA += A[i] * x[i] * x[i];
    const double g = size_at(x);
    if (std::sqrt(norm2(x)) <= 0.5 * radius)
      C = std::max(C, g);
    else
      s_logg.emplace_back(0.5 * nA, std::log(std::max(g, 1e-300)));
  }
  HypothesisItem item;
  item.C_F = std::max(C, 1e-300);
  double eps = 0.0;
  const Vec* worst = nullptr;
  std::size_t k = 0;
  for (const auto& x : grid) {
    if (std::sqrt(norm2(x)) <= 0.5 * radius) continue;
    const auto [s, lg] = s_logg[k++];
    if (s <= 0.0) continue;
    const double e = (lg - std::log(item.C_F)) / s;
    if (e > eps) {
      eps = e;
      worst = &x;
    }
  }
  item.epsilon = eps;
  const double bound = 1.0;
  if (eps < bound) {
    item.verdict = Verdict::kSatisfied;
  } else {
    item.verdict = Verdict::kViolated;
    if (worst) item.worst_point = *worst;
  }
  double trK = 0.0;
  for (double v : coupling.k()) trK += v;
  const double strict = 1.0 / (5.0 * (trK + 4.0 * coupling.k_min()));
  item.note = "epsilon < 1 keeps the Gaussian average finite; the invariant-manifold estimate needs epsilon < " +
              std::to_string(strict);
  return item;
}

}  // namespace

HypothesisReport check_hypothesis(const ModelSpec& model, double radius, int grid,
                                  const CouplingSpec& coupling, std::uint64_t seed) {
  if (!(radius > 0.0)) throw DomainError("check_hypothesis: radius must be positive");
  if (grid < 2) throw DomainError("check_hypothesis: grid needs at least 2 points per axis");
  if (coupling.dim() != model.dim()) throw DomainError("check_hypothesis: dimension mismatch");
  HypothesisReport report;
  report.model = model.name;
  report.sample_radius = radius;
  report.grid = grid;
  report.seed = seed;
  const auto pts = ball_grid(model.dim(), grid, radius);
  report.items[0] = check_one_sided_lipschitz(model, pts, radius, grid * grid, seed);
  report.items[1] = check_dissipativity(model, pts, coupling);
  report.items[2].note = "limit at infinity; not checkable on a bounded sample";
  report.items[3] = check_growth(model, pts, coupling, radius);
  report.items[4].note = "use boundary_inward_test on a sphere as a surrogate";
  return report;
}

}  // namespace mfsim

#include "mfsim/manifold_diag.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <Eigen/Dense>

#include "mfsim/errors.hpp"

namespace mfsim {

namespace {

constexpr std::size_t kCoeffBlock = 256;

struct BasisPlan {
  std::size_t dim = 0;
  int max_degree = 0;
  std::vector<MultiIndex> index;
  std::vector<int> flat;  // index.size() x dim
  Vec scale;
  Vec center;
};

BasisPlan make_plan(std::span<const double> X, std::size_t dim, const CouplingSpec& coupling,
                    bool mean_subtract, double theta, int max_degree) {
  if (dim == 0 || X.size() % dim != 0 || X.empty())
    throw DomainError("estimate_coeffs: X must be a non-empty N x d array");
  if (coupling.dim() != dim) throw DomainError("estimate_coeffs: coupling dimension mismatch");
  if (max_degree < 0) throw DomainError("estimate_coeffs: max_degree must be >= 0");
  if (!(theta > 0.0)) throw DomainError("estimate_coeffs: theta must be > 0");
  BasisPlan plan;
  plan.dim = dim;
  plan.max_degree = max_degree;
  plan.index = multi_indices(dim, max_degree);
  for (const auto& l : plan.index) plan.flat.insert(plan.flat.end(), l.begin(), l.end());
  plan.scale.resize(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    if (!(coupling.sigma()[i] > 0.0)) throw DomainError("estimate_coeffs: sigma must be > 0");
    plan.scale[i] = std::sqrt(theta * coupling.k()[i]) / coupling.sigma()[i];
  }
  plan.center = mean_subtract ? kernels::mean_parallel(X, dim) : Vec(dim, 0.0);
  return plan;
}

// Sums of psi_l and psi_l^2 over rows [begin, end), written to out[0..2M).
void block_moments(const BasisPlan& plan, std::span<const double> X, std::size_t begin,
                   std::size_t end, double* out) {
  const std::size_t d = plan.dim;
  const std::size_t M = plan.index.size();
  const auto width = static_cast<std::size_t>(plan.max_degree) + 1;
  std::vector<double> h(d * width);
  std::fill(out, out + 2 * M, 0.0);
  for (std::size_t r = begin; r < end; ++r) {
    for (std::size_t i = 0; i < d; ++i)
      hermite_table(plan.max_degree, plan.scale[i] * (X[r * d + i] - plan.center[i]),
                    std::span<double>(h.data() + i * width, width));
    for (std::size_t j = 0; j < M; ++j) {
      double psi = 1.0;
      for (std::size_t i = 0; i < d; ++i)
        psi *= h[i * width + static_cast<std::size_t>(plan.flat[j * d + i])];
      out[j] += psi;
      out[M + j] += psi * psi;
    }
  }
}

void tree(const std::vector<double>& blocks, std::size_t width, std::size_t lo, std::size_t hi,
          double* out) {
  if (hi - lo == 1) {
    std::copy_n(blocks.data() + lo * width, width, out);
    return;
  }
  const std::size_t mid = lo + (hi - lo) / 2;
  std::vector<double> right(width);
  tree(blocks, width, lo, mid, out);
  tree(blocks, width, mid, hi, right.data());
  for (std::size_t j = 0; j < width; ++j) out[j] += right[j];
}

HermiteCoeffSet finish(const BasisPlan& plan, const CouplingSpec& coupling, bool mean_subtract,
                       double theta, const std::vector<double>& blocks, std::size_t nblocks,
                       std::size_t n) {
  const std::size_t M = plan.index.size();
  std::vector<double> total(2 * M);
  tree(blocks, 2 * M, 0, nblocks, total.data());
  HermiteCoeffSet set;
  set.theta = theta;
  set.max_degree = plan.max_degree;
  set.coupling = coupling;
  set.index = plan.index;
  set.samples = n;
  set.mean_subtracted = mean_subtract;
  set.coeffs.resize(M);
  set.variances.resize(M);
  const auto nd = static_cast<double>(n);
  for (std::size_t j = 0; j < M; ++j) {
    set.coeffs[j] = total[j] / nd;
    const double second = total[M + j] / nd;
    set.variances[j] = n > 1 ? std::max(0.0, (second - set.coeffs[j] * set.coeffs[j]) * nd / (nd - 1.0)) : 0.0;
  }
  return set;
}

}  // namespace

HermiteCoeffSet estimate_coeffs(std::span<const double> X, std::size_t dim,
                                const CouplingSpec& coupling, bool mean_subtract, double theta,
                                int max_degree) {
  const BasisPlan plan = make_plan(X, dim, coupling, mean_subtract, theta, max_degree);
  const std::size_t n = X.size() / dim;
  const std::size_t width = 2 * plan.index.size();
  const std::size_t nblocks = (n + kCoeffBlock - 1) / kCoeffBlock;
  std::vector<double> blocks(nblocks * width);
  const auto nb = static_cast<std::ptrdiff_t>(nblocks);
#pragma omp parallel for schedule(static) if (nblocks > 4)
  for (std::ptrdiff_t b = 0; b < nb; ++b) {
    const auto ub = static_cast<std::size_t>(b);
    block_moments(plan, X, ub * kCoeffBlock, std::min(n, (ub + 1) * kCoeffBlock),
                  blocks.data() + ub * width);
  }
  return finish(plan, coupling, mean_subtract, theta, blocks, nblocks, n);
}

HermiteCoeffSet estimate_coeffs_serial(std::span<const double> X, std::size_t dim,
                                       const CouplingSpec& coupling, bool mean_subtract,
                                       double theta, int max_degree) {
  const BasisPlan plan = make_plan(X, dim, coupling, mean_subtract, theta, max_degree);
  const std::size_t n = X.size() / dim;
  const std::size_t width = 2 * plan.index.size();
  const std::size_t nblocks = (n + kCoeffBlock - 1) / kCoeffBlock;
  std::vector<double> blocks(nblocks * width);
  for (std::size_t b = 0; b < nblocks; ++b)
    block_moments(plan, X, b * kCoeffBlock, std::min(n, (b + 1) * kCoeffBlock),
                  blocks.data() + b * width);
  return finish(plan, coupling, mean_subtract, theta, blocks, nblocks, n);
}

HermiteCoeffSet estimate_coeffs(const EnsembleState& state, const CouplingSpec& coupling,
                                bool mean_subtract, double theta, int max_degree) {
  return estimate_coeffs(state.X, state.dim, coupling, mean_subtract, theta, max_degree);
}

double l2_distance_to_q0(const HermiteCoeffSet& coeffs, bool debias) {
  const Vec ref = reference_coeffs(coeffs.index, coeffs.theta, coeffs.coupling);
  double s = 0.0;
  for (std::size_t j = 0; j < ref.size(); ++j) s += (coeffs.coeffs[j] - ref[j]) * (coeffs.coeffs[j] - ref[j]);
  if (debias) s = std::max(0.0, s - sampling_floor_sq(coeffs));
  return std::sqrt(s);
}

double sampling_floor_sq(const HermiteCoeffSet& coeffs) {
  if (coeffs.samples == 0) return 0.0;
  double s = 0.0;
  for (std::size_t j = 0; j < coeffs.index.size(); ++j) {
    int deg = 0;
    for (int v : coeffs.index[j]) deg += v;
    if (deg == 0 || (deg == 1 && coeffs.mean_subtracted)) continue;
    s += coeffs.variances[j];
  }
  return s / static_cast<double>(coeffs.samples);
}

void write_coeff_csv(const CoeffSeries& series, std::ostream& os) {
  if (series.times.size() != series.sets.size()) throw DomainError("coefficient series is ragged");
  os << "t,l,c\n";
  for (std::size_t r = 0; r < series.times.size(); ++r) {
    const auto& set = series.sets[r];
    for (std::size_t j = 0; j < set.index.size(); ++j) {
      os << format_double(series.times[r]) << ',';
      for (std::size_t i = 0; i < set.index[j].size(); ++i) os << (i ? ";" : "") << set.index[j][i];
      os << ',' << format_double(set.coeffs[j]) << '\n';
    }
  }
}

// ---------------------------------------------------------------------------

double log_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("log_slope: need >= 2 paired points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const auto n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(y[i] > 0.0)) throw DomainError("log_slope: y must be positive");
    const double ly = std::log(y[i]);
    sx += x[i];
    sy += ly;
    sxx += x[i] * x[i];
    sxy += x[i] * ly;
  }
  const double den = n * sxx - sx * sx;
  if (den == 0.0) throw DomainError("log_slope: degenerate abscissae");
  return (n * sxy - sx * sy) / den;
}

std::vector<DecayFit> ou_decay_rates(const CoeffSeries& series, int max_degree, double floor_sigmas,
                                     double min_initial_sigmas) {
  std::vector<DecayFit> fits;
  if (series.sets.empty()) return fits;
  const HermiteCoeffSet& first = series.sets.front();
  const double n = static_cast<double>(first.samples);
  for (std::size_t j = 0; j < first.index.size(); ++j) {
    const MultiIndex& l = first.index[j];
    int deg = 0;
    for (int v : l) deg += v;
    if (deg == 0 || deg > max_degree) continue;
    DecayFit fit;
    fit.l = l;
    for (std::size_t i = 0; i < l.size(); ++i)
      fit.predicted += first.theta * first.coupling.k()[i] * static_cast<double>(l[i]);
    const double se0 = std::sqrt(first.variances[j] / n);
    const double c0 = std::abs(first.coeffs[j]);
    if (c0 > std::max(min_initial_sigmas * se0, 10.0 / std::sqrt(n))) {
      std::vector<double> t, c;
      for (std::size_t r = 0; r < series.sets.size(); ++r) {
        const double cr = std::abs(series.sets[r].coeffs[j]);
        const double se = std::sqrt(series.sets[r].variances[j] / n);
        if (!(cr > floor_sigmas * se)) break;
        t.push_back(series.times[r]);
        c.push_back(cr);
      }
      if (t.size() >= 3) {
        fit.rate = -log_slope(t, c);
        fit.resolved = true;
        fit.points = t.size();
      }
    }
    fits.push_back(std::move(fit));
  }
  return fits;
}

ContractionReport contraction_test(const SimConfig& base, const InitLaw& a, const InitLaw& b,
                                   double fit_from, double theta, int max_degree) {
  SimConfig ca = base, cb = base;
  ca.init = a;
  cb.init = b;
  EnsembleState sa = init_ensemble(ca);
  EnsembleState sb = init_ensemble(cb);
  ContractionReport rep;
  rep.fit_from = fit_from;
  auto record = [&] {
    const auto ha = estimate_coeffs(sa, base.coupling, true, theta, max_degree);
    const auto hb = estimate_coeffs(sb, base.coupling, true, theta, max_degree);
    double s = 0.0;
    for (std::size_t j = 0; j < ha.coeffs.size(); ++j)
      s += (ha.coeffs[j] - hb.coeffs[j]) * (ha.coeffs[j] - hb.coeffs[j]);
    rep.times.push_back(sa.t);
    rep.distance.push_back(std::sqrt(s));
  };
  const auto nsteps = static_cast<std::uint64_t>(std::llround(base.t_end / base.dt));
  record();
  for (std::uint64_t s = 1; s <= nsteps; ++s) {
    step(sa, ca);
    step(sb, cb);
    if (s % base.record_every == 0 || s == nsteps) record();
  }
  std::vector<double> t, dist;
  for (std::size_t i = 0; i < rep.times.size(); ++i) {
    if (rep.times[i] >= fit_from && rep.distance[i] > 0.0) {
      t.push_back(rep.times[i]);
      dist.push_back(rep.distance[i]);
    }
  }
  rep.rate = t.size() >= 2 ? -log_slope(t, dist) : 0.0;
  return rep;
}

// ---------------------------------------------------------------------------

std::size_t default_smoothing_window(double dt_record) {
  if (!(dt_record > 0.0)) throw DomainError("default_smoothing_window: dt_record must be > 0");
  return std::max<std::size_t>(5, static_cast<std::size_t>(std::llround(0.1 / dt_record)));
}

namespace {

// Weights w_j, j = -r..r, with sum_j w_j m_j / h the derivative at 0 of the
// least-squares cubic through the samples.
std::vector<double> savgol_derivative_weights(std::size_t r) {
  const auto n = static_cast<Eigen::Index>(2 * r + 1);
  Eigen::MatrixXd A(n, 4);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = static_cast<double>(i) - static_cast<double>(r);
    A(i, 0) = 1.0;
    A(i, 1) = x;
    A(i, 2) = x * x;
    A(i, 3) = x * x * x;
  }
  const Eigen::MatrixXd P = (A.transpose() * A).ldlt().solve(A.transpose());
  std::vector<double> w(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) w[static_cast<std::size_t>(i)] = P(1, i);
  return w;
}

}  // namespace

std::vector<Vec> smoothed_derivative(const MeanTrajectory& traj, std::size_t window) {
  const std::size_t n = traj.size();
  const std::size_t d = traj.dim;
  if (window < 5) window = 5;
  if (window % 2 == 0) ++window;
  const std::size_t r = window / 2;
  std::vector<Vec> out(n, Vec(d, std::numeric_limits<double>::quiet_NaN()));
  if (n < window) return out;
  const auto w = savgol_derivative_weights(r);
  for (std::size_t c = r; c + r < n; ++c) {
    const double h = traj.times[c + 1] - traj.times[c];
    bool uniform = h > 0.0;
    for (std::size_t k = c - r; k + 1 <= c + r && uniform; ++k)
      uniform = std::abs((traj.times[k + 1] - traj.times[k]) - h) <= 1e-9 * h;
    if (!uniform) continue;
    for (std::size_t i = 0; i < d; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < window; ++k) s += w[k] * traj.means[c - r + k][i];
      out[c][i] = s / h;
    }
  }
  return out;
}

ResidualScalingReport phase_residual_scaling(const AveragedField& rhs,
                                             const std::vector<ResidualRun>& runs,
                                             ResidualEstimator estimator, std::size_t window) {
  ResidualScalingReport rep;
  rep.estimator = estimator;
  const std::size_t d = rhs.dim();
  for (std::size_t q = 0; q < runs.size(); ++q) {
    const ResidualRun& run = runs[q];
    if (!(run.delta > 0.0)) throw DomainError("phase_residual_scaling: delta must be > 0");
    if (q > 0 && !(run.delta > runs[q - 1].delta))
      throw DomainError("phase_residual_scaling: deltas must be strictly increasing");
    if (run.traj.dim != d) throw DomainError("phase_residual_scaling: dimension mismatch");
    const double h = run.traj.size() > 1 ? run.traj.times[1] - run.traj.times[0] : 0.0;
    std::size_t w = 0;
    std::vector<Vec> mdot;
    if (estimator == ResidualEstimator::kDifference) {
      w = window > 0 ? window : default_smoothing_window(h);
      if (w % 2 == 0) ++w;
      mdot = smoothed_derivative(run.traj, w);
      for (auto& v : mdot)
        for (double& x : v) x /= run.delta;
    } else {
      if (run.drift.size() != run.traj.size())
        throw DomainError("phase_residual_scaling: drift series missing or ragged");
      mdot = run.drift;
    }
    Vec fbar(d);
    double sup = 0.0;
    std::size_t used = 0;
    for (std::size_t k = 0; k < run.traj.size(); ++k) {
      if (run.traj.times[k] < run.settle_time || !std::isfinite(mdot[k][0])) continue;
      rhs.eval(run.traj.means[k], fbar);
      double s = 0.0;
      for (std::size_t i = 0; i < d; ++i) s += (mdot[k][i] - fbar[i]) * (mdot[k][i] - fbar[i]);
      sup = std::max(sup, std::sqrt(s));
      ++used;
    }
    if (run.settle_time <= 0.0)
      rep.warnings.push_back("run " + std::to_string(q) + ": no settling time given; transient included");
    if (used < 10)
      rep.warnings.push_back("run " + std::to_string(q) + ": only " + std::to_string(used) +
                             " settled records");
    double floor = 0.0;
    if (run.particles > 0) {
      const auto np = static_cast<double>(run.particles);
      if (estimator == ResidualEstimator::kDifference && h > 0.0) {
        // The mean diffuses with variance 2 sigma_i^2 / N per unit time; push
        // that through the filter weights (as increments of a random walk).
        const auto wts = savgol_derivative_weights(w / 2);
        double g2 = 0.0, tail = 0.0;
        for (std::size_t k = wts.size(); k-- > 1;) {
          tail += wts[k];
          g2 += tail * tail;
        }
        double diff = 0.0;
        for (double s : rhs.coupling().sigma()) diff += 2.0 * s * s / np;
        floor = std::sqrt(diff * h * g2) / h / run.delta;
      } else if (estimator == ResidualEstimator::kDrift && run.drift_var.size() == run.drift.size()) {
        // Sampling error of a particle average of F.
        double acc = 0.0;
        std::size_t cnt = 0;
        for (std::size_t k = 0; k < run.drift_var.size(); ++k) {
          if (run.traj.times[k] < run.settle_time) continue;
          for (double v : run.drift_var[k]) acc += v;
          ++cnt;
        }
        floor = cnt > 0 ? std::sqrt(acc / static_cast<double>(cnt) / np) : 0.0;
      }
    }
    rep.deltas.push_back(run.delta);
    rep.residual_norms.push_back(sup);
    rep.predicted_floor.push_back(floor);
    rep.window.push_back(w);
  }
  if (rep.deltas.size() >= 2) {
    std::vector<double> ld(rep.deltas.size());
    for (std::size_t i = 0; i < ld.size(); ++i) ld[i] = std::log(rep.deltas[i]);
    bool positive = true;
    for (double v : rep.residual_norms) positive = positive && v > 0.0;
    if (positive) rep.slope = log_slope(ld, rep.residual_norms);
  }
  return rep;
}

EnsembleObserver drift_recorder(const ModelSpec& model, std::vector<Vec>& mean,
                                std::vector<Vec>& variance) {
  return [field = model.field, &mean, &variance](const EnsembleState& s) {
    const std::size_t d = s.dim;
    const std::size_t n = s.size();
    std::vector<double> f(n * d);
    const auto nn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (n > 4096)
    for (std::ptrdiff_t i = 0; i < nn; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      field->eval(s.row(ui), std::span<double>(f.data() + ui * d, d));
    }
    Vec mu = kernels::mean_parallel(f, d);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        const double c = f[i * d + j] - mu[j];
        f[i * d + j] = c * c;
      }
    Vec var = kernels::mean_parallel(f, d);
    if (n > 1)
      for (double& v : var) v *= static_cast<double>(n) / static_cast<double>(n - 1);
    mean.push_back(std::move(mu));
    variance.push_back(std::move(var));
  };
}

}  // namespace mfsim

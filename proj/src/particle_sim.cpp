#include "mfsim/particle_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "mfsim/errors.hpp"
#include "mfsim/philox.hpp"

namespace mfsim {

InitLaw InitLaw::point_mass(Vec m0) {
  InitLaw law;
  law.kind = Kind::kPointMass;
  law.m0 = std::move(m0);
  return law;
}

InitLaw InitLaw::gaussian(Vec m0) {
  InitLaw law;
  law.kind = Kind::kGaussian;
  law.m0 = std::move(m0);
  return law;
}

InitLaw InitLaw::explicit_rows(std::vector<double> rows, std::vector<std::uint64_t> ids) {
  InitLaw law;
  law.kind = Kind::kExplicit;
  law.rows = std::move(rows);
  law.stream_ids = std::move(ids);
  return law;
}

void SimConfig::validate() const {
  std::vector<std::string> errs;
  if (!model.field) {
    errs.emplace_back("model is not set");
  } else if (model.dim() != coupling.dim()) {
    errs.push_back("model dimension " + std::to_string(model.dim()) +
                   " does not match coupling dimension " + std::to_string(coupling.dim()));
  }
  if (N < 1) errs.emplace_back("N must be >= 1");
  if (!(dt > 0.0) || !std::isfinite(dt)) errs.emplace_back("dt must be > 0");
  else if (coupling.dim() > 0 && !(dt * coupling.k_max() < 1.0))
    errs.emplace_back("dt * max(k) must be < 1");
  if (!(t_end >= 0.0) || !std::isfinite(t_end)) errs.emplace_back("t_end must be >= 0");
  if (record_every < 1) errs.emplace_back("record_every must be >= 1");
  const std::size_t d = coupling.dim();
  switch (init.kind) {
    case InitLaw::Kind::kPointMass:
    case InitLaw::Kind::kGaussian:
      if (init.m0.size() != d)
        errs.push_back("init mean has dimension " + std::to_string(init.m0.size()) +
                       ", expected " + std::to_string(d));
      break;
    case InitLaw::Kind::kExplicit:
      if (init.rows.size() != N * d)
        errs.push_back("explicit init has " + std::to_string(init.rows.size()) +
                       " values, expected N*d = " + std::to_string(N * d));
      if (!init.stream_ids.empty()) {
        if (init.stream_ids.size() != N) {
          errs.emplace_back("explicit init stream ids must have N entries");
        } else {
          auto ids = init.stream_ids;
          std::sort(ids.begin(), ids.end());
          if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
            errs.emplace_back("explicit init stream ids must be distinct");
        }
      }
      break;
  }
  if (!errs.empty()) throw ConfigError(std::move(errs));
}

namespace kernels {

namespace {

// Per-block partial sums, then a pairwise tree over blocks.
void block_sum(const double* X, std::size_t dim, std::size_t begin, std::size_t end,
               double* out) {
  std::fill(out, out + dim, 0.0);
  for (std::size_t i = begin; i < end; ++i)
    for (std::size_t j = 0; j < dim; ++j) out[j] += X[i * dim + j];
}

void tree_sum(const std::vector<double>& blocks, std::size_t dim, std::size_t lo, std::size_t hi,
              double* out) {
  if (hi - lo == 1) {
    std::copy_n(blocks.data() + lo * dim, dim, out);
    return;
  }
  const std::size_t mid = lo + (hi - lo) / 2;
  std::vector<double> right(dim);
  tree_sum(blocks, dim, lo, mid, out);
  tree_sum(blocks, dim, mid, hi, right.data());
  for (std::size_t j = 0; j < dim; ++j) out[j] += right[j];
}

Vec finish_mean(const std::vector<double>& blocks, std::size_t nblocks, std::size_t dim,
                std::size_t n) {
  Vec mean(dim, 0.0);
  if (nblocks == 0) return mean;
  tree_sum(blocks, dim, 0, nblocks, mean.data());
  for (double& v : mean) v /= static_cast<double>(n);
  return mean;
}

// Advances one particle in place; returns |x|^2 after the update (NaN if not finite).
inline double update_row(double* x, std::uint64_t id, std::size_t dim, const StepArgs& a,
                         double* f) {
  if (a.delta != 0.0) {
    a.field->eval({x, dim}, {f, dim});
  } else {
    std::fill(f, f + dim, 0.0);
  }
  double norm2 = 0.0;
  for (std::size_t j = 0; j < dim; j += 2) {
    const std::size_t jend = std::min(j + 2, dim);
    std::array<double, 2> z{0.0, 0.0};
    if (a.noise_scale[j] != 0.0 || (jend > j + 1 && a.noise_scale[j + 1] != 0.0))
      z = normal_pair(a.seed, id, a.step_index, static_cast<std::uint32_t>(j / 2));
    for (std::size_t jj = j; jj < jend; ++jj) {
      const double drift = a.delta * f[jj] - a.k[jj] * (x[jj] - a.mean[jj]);
      x[jj] += drift * a.dt + a.noise_scale[jj] * z[jj - j];
      norm2 += x[jj] * x[jj];
    }
  }
  return norm2;
}

struct Worst {
  double badness = -1.0;
  std::size_t index = std::numeric_limits<std::size_t>::max();

  void offer(double norm2, std::size_t i) {
    const double b = std::isfinite(norm2) ? norm2 : std::numeric_limits<double>::infinity();
    if (b > kBlowUpThreshold * kBlowUpThreshold && (b > badness || (b == badness && i < index))) {
      badness = b;
      index = i;
    }
  }
  void merge(const Worst& o) {
    if (o.index == std::numeric_limits<std::size_t>::max()) return;
    if (o.badness > badness || (o.badness == badness && o.index < index)) *this = o;
  }
};

}  // namespace

Vec mean_serial(std::span<const double> X, std::size_t dim) {
  const std::size_t n = X.size() / dim;
  const std::size_t nblocks = (n + kReduceBlock - 1) / kReduceBlock;
  std::vector<double> blocks(nblocks * dim);
  for (std::size_t b = 0; b < nblocks; ++b)
    block_sum(X.data(), dim, b * kReduceBlock, std::min(n, (b + 1) * kReduceBlock),
              blocks.data() + b * dim);
  return finish_mean(blocks, nblocks, dim, n);
}

Vec mean_parallel(std::span<const double> X, std::size_t dim) {
  const std::size_t n = X.size() / dim;
  const std::size_t nblocks = (n + kReduceBlock - 1) / kReduceBlock;
  std::vector<double> blocks(nblocks * dim);
  const auto nb = static_cast<std::ptrdiff_t>(nblocks);
#pragma omp parallel for schedule(static) if (nblocks > 8)
  for (std::ptrdiff_t b = 0; b < nb; ++b) {
    const auto ub = static_cast<std::size_t>(b);
    block_sum(X.data(), dim, ub * kReduceBlock, std::min(n, (ub + 1) * kReduceBlock),
              blocks.data() + ub * dim);
  }
  return finish_mean(blocks, nblocks, dim, n);
}

std::size_t step_serial(std::span<double> X, std::span<const std::uint64_t> stream,
                        std::size_t dim, const StepArgs& args) {
  const std::size_t n = X.size() / dim;
  std::vector<double> f(dim);
  Worst worst;
  for (std::size_t i = 0; i < n; ++i)
    worst.offer(update_row(X.data() + i * dim, stream[i], dim, args, f.data()), i);
  return worst.index;
}

std::size_t step_parallel(std::span<double> X, std::span<const std::uint64_t> stream,
                          std::size_t dim, const StepArgs& args) {
  const auto n = static_cast<std::ptrdiff_t>(X.size() / dim);
  Worst worst;
#pragma omp parallel if (n > 1024)
  {
    std::vector<double> f(dim);
    Worst local;
#pragma omp for schedule(static) nowait
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      local.offer(update_row(X.data() + ui * dim, stream[ui], dim, args, f.data()), ui);
    }
#pragma omp critical(mfsim_step_worst)
    worst.merge(local);
  }
  return worst.index;
}

}  // namespace kernels

EnsembleState init_ensemble(const SimConfig& config) {
  config.validate();
  const std::size_t d = config.coupling.dim();
  const std::size_t n = config.N;
  EnsembleState s;
  s.dim = d;
  s.master_seed = config.seed;
  s.X.resize(n * d);
  s.stream.resize(n);
  const InitLaw& init = config.init;

  switch (init.kind) {
    case InitLaw::Kind::kPointMass:
      for (std::size_t i = 0; i < n; ++i) {
        std::copy(init.m0.begin(), init.m0.end(), s.X.begin() + static_cast<std::ptrdiff_t>(i * d));
        s.stream[i] = i;
      }
      break;
    case InitLaw::Kind::kGaussian: {
      const Vec& w = config.coupling.varpi();
      for (std::size_t i = 0; i < n; ++i) {
        s.stream[i] = i;
        for (std::size_t j = 0; j < d; j += 2) {
          const auto z = normal_pair(config.seed, i, 0, static_cast<std::uint32_t>(j / 2),
                                     StreamDomain::kInit);
          for (std::size_t jj = j; jj < std::min(j + 2, d); ++jj)
            s.X[i * d + jj] = init.m0[jj] + std::sqrt(w[jj]) * z[jj - j];
        }
      }
      const Vec shift = kernels::mean_parallel(s.X, d);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) s.X[i * d + j] += init.m0[j] - shift[j];
      break;
    }
    case InitLaw::Kind::kExplicit: {
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), std::size_t{0});
      if (!init.stream_ids.empty())
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
          return init.stream_ids[a] < init.stream_ids[b];
        });
      for (std::size_t r = 0; r < n; ++r) {
        const std::size_t src = order[r];
        s.stream[r] = init.stream_ids.empty() ? src : init.stream_ids[src];
        std::copy_n(init.rows.begin() + static_cast<std::ptrdiff_t>(src * d), d,
                    s.X.begin() + static_cast<std::ptrdiff_t>(r * d));
      }
      for (double v : s.X)
        if (!std::isfinite(v)) throw ConfigError("explicit init contains non-finite values");
      break;
    }
  }
  s.mean = kernels::mean_parallel(s.X, d);
  return s;
}

void step(EnsembleState& state, const SimConfig& config) {
  const std::size_t d = state.dim;
  const CouplingSpec& c = config.coupling;
  Vec noise_scale(d);
  for (std::size_t j = 0; j < d; ++j) noise_scale[j] = std::sqrt(2.0 * config.dt) * c.sigma()[j];
  const kernels::StepArgs args{config.model.field.get(), c.k().data(), noise_scale.data(),
                               state.mean.data(), c.delta(), config.dt, state.master_seed,
                               state.step_index};
  const std::size_t bad = kernels::step_parallel(state.X, state.stream, d, args);
  const double t_new = static_cast<double>(state.step_index + 1) * config.dt;
  if (bad != std::numeric_limits<std::size_t>::max()) {
    throw BlowUpError("particle " + std::to_string(bad) + " left |x| <= 1e6 at t = " +
                          format_double(t_new),
                      t_new, bad);
  }
  ++state.step_index;
  state.t = t_new;
  state.mean = kernels::mean_parallel(state.X, d);
}

Vec centered_covariance(const EnsembleState& state) {
  const std::size_t d = state.dim;
  const std::size_t n = state.size();
  // Outer products of centred rows reduced with the same fixed-shape sum as the mean.
  std::vector<double> prods(n * d * d);
  const auto nn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (n > 4096)
  for (std::ptrdiff_t i = 0; i < nn; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b)
        prods[(ui * d + a) * d + b] =
            (state.X[ui * d + a] - state.mean[a]) * (state.X[ui * d + b] - state.mean[b]);
  }
  return kernels::mean_parallel(prods, d * d);
}

MeanTrajectory run(const SimConfig& config, const EnsembleObserver& observer) {
  return run_from(init_ensemble(config), config, observer);
}

MeanTrajectory run_from(EnsembleState state, const SimConfig& config,
                        const EnsembleObserver& observer) {
  config.validate();
  if (state.dim != config.coupling.dim()) throw DomainError("state dimension mismatch");
  const auto nsteps = static_cast<std::uint64_t>(std::llround(config.t_end / config.dt));
  const std::uint64_t first = state.step_index;
  const std::uint64_t last = first + nsteps;
  MeanTrajectory traj;
  traj.dim = state.dim;
  auto record = [&] {
    traj.append(state.t, state.mean, config.record_cov ? centered_covariance(state) : Vec{});
    if (observer) observer(state);
  };
  record();
  while (state.step_index < last) {
    step(state, config);
    const std::uint64_t done = state.step_index - first;
    if (done % config.record_every == 0 || state.step_index == last) record();
  }
  return traj;
}

}  // namespace mfsim

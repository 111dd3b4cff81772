#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <omp.h>

#include "mfsim/errors.hpp"
#include "mfsim/particle_sim.hpp"
#include "mfsim/philox.hpp"
#include "test_support.hpp"

using namespace mfsim;

namespace {

SimConfig small_fhn(std::size_t n, double t_end) {
  SimConfig c;
  c.model = testing::fhn_excitable();
  c.coupling = CouplingSpec::from_sigma2({1.0, 1.0}, {0.2, 0.2}, 0.2);
  c.N = n;
  c.dt = 1e-2;
  c.t_end = t_end;
  c.record_every = 10;
  c.init = InitLaw::gaussian({-1.0, -2.0 / 3.0});
  c.seed = 42;
  c.record_cov = true;
  return c;
}

std::string csv_of(const MeanTrajectory& t) {
  std::ostringstream os;
  write_csv(t, os);
  return os.str();
}

}  // namespace

TEST_CASE("Philox4x32-10 known-answer vectors") {
  CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) ==
        PhiloxCounter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
        PhiloxCounter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
        PhiloxCounter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("normal pairs have unit variance and no correlation") {
  const int n = 200000;
  double s0 = 0, s1 = 0, q0 = 0, q1 = 0, c01 = 0;
  for (int i = 0; i < n; ++i) {
    const auto z = normal_pair(9, static_cast<std::uint64_t>(i), 3, 0);
    s0 += z[0];
    s1 += z[1];
    q0 += z[0] * z[0];
    q1 += z[1] * z[1];
    c01 += z[0] * z[1];
  }
  const double se = 1.0 / std::sqrt(n);
  CHECK(std::abs(s0 / n) < 5 * se);
  CHECK(std::abs(s1 / n) < 5 * se);
  CHECK(std::abs(q0 / n - 1.0) < 5 * std::sqrt(2.0) * se);
  CHECK(std::abs(q1 / n - 1.0) < 5 * std::sqrt(2.0) * se);
  CHECK(std::abs(c01 / n) < 5 * se);
  // Domains and blocks index different draws.
  CHECK(normal_pair(1, 2, 3, 0)[0] != normal_pair(1, 2, 3, 0, StreamDomain::kInit)[0]);
  CHECK(normal_pair(1, 2, 3, 0)[0] != normal_pair(1, 2, 3, 1)[0]);
}

TEST_CASE("serial and parallel kernels agree bit for bit") {
  auto cfg = small_fhn(5000, 0.0);
  auto a = init_ensemble(cfg);
  auto b = a;
  CHECK(kernels::mean_serial(a.X, 2) == kernels::mean_parallel(a.X, 2));
  Vec k = cfg.coupling.k(), scale(2);
  for (std::size_t i = 0; i < 2; ++i) scale[i] = std::sqrt(2.0 * cfg.dt) * cfg.coupling.sigma()[i];
  for (std::uint64_t s = 1; s <= 20; ++s) {
    const Vec mean = kernels::mean_serial(a.X, 2);
    kernels::StepArgs args{cfg.model.field.get(), k.data(), scale.data(), mean.data(), 0.2, cfg.dt, 42, s};
    CHECK(kernels::step_serial(a.X, a.stream, 2, args) == SIZE_MAX);
    CHECK(kernels::step_parallel(b.X, b.stream, 2, args) == SIZE_MAX);
  }
  CHECK(a.X == b.X);
}

TEST_CASE("trajectories do not depend on the thread count") {
  const auto cfg = small_fhn(3000, 2.0);
  std::vector<std::string> out;
  for (int threads : {1, 2, 8}) {
    omp_set_num_threads(threads);
    out.push_back(csv_of(run(cfg)));
  }
  omp_set_num_threads(omp_get_num_procs());
  CHECK(out[0] == out[1]);
  CHECK(out[0] == out[2]);
}

TEST_CASE("particles are exchangeable: row order of the initial data is irrelevant") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  const std::size_t n = 500;
  std::vector<double> rows(2 * n);
  for (double& v : rows) v = g(rng);
  std::vector<std::uint64_t> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<double> prow(2 * n);
  std::vector<std::uint64_t> pids(n);
  for (std::size_t i = 0; i < n; ++i) {
    prow[2 * i] = rows[2 * perm[i]];
    prow[2 * i + 1] = rows[2 * perm[i] + 1];
    pids[i] = ids[perm[i]];
  }
  auto cfg = small_fhn(n, 1.0);
  cfg.init = InitLaw::explicit_rows(rows, ids);
  auto pcfg = cfg;
  pcfg.init = InitLaw::explicit_rows(prow, pids);
  CHECK(csv_of(run(cfg)) == csv_of(run(pcfg)));
}

TEST_CASE("Gaussian initial law is re-centred exactly") {
  const auto s = init_ensemble(small_fhn(1001, 0.0));
  CHECK(s.mean[0] == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(s.mean[1] == doctest::Approx(-2.0 / 3.0).epsilon(1e-14));
  // Spread follows sigma^2 / k = 0.2.
  const auto cov = centered_covariance(s);
  CHECK(cov[0] == doctest::Approx(0.2).epsilon(0.15));
}

TEST_CASE("interaction alone leaves the mean unchanged") {
  auto cfg = small_fhn(2000, 1.0);
  cfg.coupling = CouplingSpec({1.0, 2.0}, {0.0, 0.0}, 0.0);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  std::vector<double> rows(2 * cfg.N);
  for (double& v : rows) v = 3.0 * g(rng);
  cfg.init = InitLaw::explicit_rows(rows);
  const auto tr = run(cfg);
  for (std::size_t i = 0; i < 2; ++i) CHECK(std::abs(tr.means.back()[i] - tr.means.front()[i]) < 1e-12);
  // and contracts the spread at rate k_i per unit time: (1 - k dt)^steps.
  const auto cov = tr.cov.back();
  const auto cov0 = tr.cov.front();
  CHECK(cov[0] / cov0[0] == doctest::Approx(std::pow(1.0 - 1e-2, 2 * 100)).epsilon(1e-9));
  CHECK(cov[3] / cov0[3] == doctest::Approx(std::pow(1.0 - 2e-2, 2 * 100)).epsilon(1e-9));
}

TEST_CASE("without noise a point mass follows the explicit Euler scheme for F") {
  auto cfg = small_fhn(64, 5.0);
  cfg.coupling = CouplingSpec({1.0, 1.0}, {0.0, 0.0}, 0.7);
  cfg.init = InitLaw::point_mass({0.5, 0.2});
  cfg.record_every = 1;
  const auto tr = run(cfg);
  Vec x{0.5, 0.2};
  for (std::size_t s = 1; s < tr.size(); ++s) {
    const auto f = cfg.model.eval_F(x);
    for (std::size_t i = 0; i < 2; ++i) x[i] += 0.7 * f[i] * cfg.dt;
  }
  CHECK(tr.means.back()[0] == doctest::Approx(x[0]).epsilon(1e-12));
  CHECK(tr.means.back()[1] == doctest::Approx(x[1]).epsilon(1e-12));
}

TEST_CASE("Ornstein-Uhlenbeck stationary variance of the Euler scheme") {
  // delta = 0: X <- (1 - k dt) X + sqrt(2 dt) sigma xi, stationary variance
  // sigma^2 / (k (1 - k dt / 2)).
  SimConfig cfg;
  cfg.model = make_model("cucker_smale", {{"d", 2}});
  cfg.coupling = CouplingSpec({1.0, 2.0}, {0.5, 0.3}, 0.0);
  cfg.N = 20000;
  cfg.dt = 2e-2;
  cfg.t_end = 6.0;
  cfg.record_every = 1000;
  cfg.record_cov = true;
  cfg.init = InitLaw::point_mass({0.0, 0.0});
  cfg.seed = 3;
  const auto tr = run(cfg);
  const auto& cov = tr.cov.back();
  for (std::size_t i = 0; i < 2; ++i) {
    const double k = cfg.coupling.k()[i], s = cfg.coupling.sigma()[i];
    // Start from a point mass: variance has relaxed to within exp(-2 k t) of the limit.
    const double v = s * s / (k * (1.0 - 0.5 * k * cfg.dt)) * (1.0 - std::pow(1.0 - k * cfg.dt, 2 * 300));
    CHECK(std::abs(cov[i * 3] - v) < 5.0 * v * std::sqrt(2.0 / cfg.N));
  }
  CHECK(std::abs(cov[1]) < 5.0 * std::sqrt(cov[0] * cov[3] / cfg.N));
}

TEST_CASE("record schedule includes t = 0 and the final step") {
  auto cfg = small_fhn(10, 0.95);
  cfg.record_every = 20;
  const auto tr = run(cfg);
  // 95 steps: records at 0, 20, 40, 60, 80 and 95.
  REQUIRE(tr.size() == 6);
  CHECK(tr.times[1] == doctest::Approx(0.2));
  CHECK(tr.times.back() == doctest::Approx(0.95));
  CHECK(tr.has_cov());
}

TEST_CASE("observer sees every record") {
  auto cfg = small_fhn(10, 1.0);
  std::vector<double> seen;
  run(cfg, [&](const EnsembleState& s) { seen.push_back(s.t); });
  CHECK(seen.size() == 11);
}

TEST_CASE("blow-up is reported with time and particle") {
  SimConfig cfg;
  cfg.model = make_custom_model("explosive", 1, [](std::span<const double> x, std::span<double> out) {
    out[0] = x[0] * x[0] * x[0];
  });
  cfg.coupling = CouplingSpec({1.0}, {0.0}, 1.0);
  cfg.N = 4;
  cfg.dt = 1e-2;
  cfg.t_end = 10.0;
  cfg.init = InitLaw::explicit_rows({0.1, 0.2, 3.0, 0.0});
  try {
    run(cfg);
    FAIL("expected BlowUpError");
  } catch (const BlowUpError& e) {
    CHECK(e.index() == 2);
    CHECK(e.time() > 0.0);
    CHECK(e.time() < 1.0);
  }
}

TEST_CASE("configuration errors are collected") {
  SimConfig cfg = small_fhn(0, -1.0);
  cfg.dt = 2.0;
  cfg.record_every = 0;
  try {
    cfg.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.messages().size() == 4);
  }
  auto bad = small_fhn(10, 1.0);
  bad.init = InitLaw::gaussian({0.0});
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(CouplingSpec({1.0}, {-0.1}, 0.0), ConfigError);
  CHECK_THROWS_AS(CouplingSpec({0.0}, {0.1}, 0.0), ConfigError);
}

#include <doctest.h>

#include <cmath>
#include <random>

#include "mfsim/errors.hpp"
#include "mfsim/gauss_avg.hpp"
#include "mfsim/model_zoo.hpp"
#include "test_support.hpp"

using namespace mfsim;

namespace {

std::vector<ModelSpec> all_models() {
  return {
      make_model("fhn", {{"u", 0.9}, {"a", 1.0 / 3.0}, {"b", 1.0}, {"tau", 10.0}}),
      make_model("stuart_landau", {{"a", 1.0}, {"omega", 2.0}}),
      make_model("stuart_landau_modified", {{"omega", 1.0}, {"b", 1.01}}),
      make_model("saddle_node_toy", {{"a", 0.3}, {"b", 1.0}}),
      make_model("cucker_smale", {}),
      make_model("cucker_smale", {{"d", 3}}),
  };
}

}  // namespace

TEST_CASE("registry names and keys") {
  const auto names = model_names();
  CHECK(names.size() == 5);
  CHECK(model_param_keys("fhn") == std::vector<std::string>{"u", "a", "b", "tau"});
  CHECK_THROWS_AS(model_param_keys("lorenz"), ConfigError);
}

TEST_CASE("construction errors list every problem") {
  try {
    make_model("fhn", {{"u", 1.0}, {"c", 2.0}});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    // unknown c, missing a, b, tau
    CHECK(e.messages().size() == 4);
  }
  CHECK_THROWS_AS(make_model("fhn", {{"u", 1}, {"a", 0}, {"b", 1}, {"tau", 0}}), ConfigError);
  CHECK_THROWS_AS(make_model("cucker_smale", {{"d", 1.5}}), ConfigError);
  CHECK_THROWS_AS(make_model("fhn", {{"u", NAN}, {"a", 0}, {"b", 1}, {"tau", 1}}), ConfigError);
}

TEST_CASE("field values against hand-evaluated points") {
  const auto fhn = make_model("fhn", {{"u", 1.0}, {"a", 1.0 / 3.0}, {"b", 1.0}, {"tau", 10.0}});
  // (x, y) = (-1, -2/3) is the rest point of the isolated unit.
  const auto f = fhn.eval_F({-1.0, -2.0 / 3.0});
  CHECK(std::abs(f[0]) < 1e-15);
  CHECK(std::abs(f[1]) < 1e-15);
  const auto g = fhn.eval_F({2.0, 1.0});
  CHECK(g[0] == doctest::Approx(2.0 - 8.0 / 3.0 - 1.0).epsilon(1e-15));
  CHECK(g[1] == doctest::Approx((2.0 + 1.0 / 3.0 - 1.0) / 10.0).epsilon(1e-15));

  // Unit circle is invariant for Stuart-Landau with a = 1: radial part vanishes.
  const auto sl = make_model("stuart_landau", {{"a", 1.0}, {"omega", 2.0}});
  const double c = std::cos(0.7), s = std::sin(0.7);
  const auto h = sl.eval_F({c, s});
  CHECK(std::abs(h[0] * c + h[1] * s) < 1e-15);
  CHECK(h[1] * c - h[0] * s == doctest::Approx(2.0));

  // Modified Stuart-Landau: angular speed omega - b r sin(theta) on r = 1.
  const auto slm = make_model("stuart_landau_modified", {{"omega", 1.0}, {"b", 1.01}});
  const auto k = slm.eval_F({c, s});
  CHECK(std::abs(k[0] * c + k[1] * s) < 1e-15);
  CHECK(k[1] * c - k[0] * s == doctest::Approx(1.0 - 1.01 * s).epsilon(1e-14));

  const auto cs = make_model("cucker_smale", {{"d", 3}});
  const auto v = cs.eval_F({0.5, 0.0, 0.5});
  CHECK(v[0] == doctest::Approx(0.5 * 0.5));
}

TEST_CASE("analytic Jacobians match finite differences") {
  std::mt19937_64 rng(11);
  for (const auto& m : all_models()) {
    CAPTURE(m.name);
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
      const Vec x = testing::random_point(rng, m.dim(), 2.0);
      const auto fd = testing::fd_jacobian([&](const Vec& p) { return m.eval_F(p); }, x);
      worst = std::max(worst, testing::max_rel_diff(m.eval_DF(x), fd));
    }
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("custom model falls back to a difference Jacobian") {
  const auto m = make_custom_model("pendulum", 2, [](std::span<const double> x, std::span<double> out) {
    out[0] = x[1];
    out[1] = -std::sin(x[0]);
  });
  const auto J = m.eval_DF({0.3, 0.1});
  CHECK(J(0, 1) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(J(1, 0) == doctest::Approx(-std::cos(0.3)).epsilon(1e-7));
  CHECK_FALSE(m.has_closed_avg());
  CHECK_FALSE(m.closed_avg({0, 0}, {0.1, 0.1}).has_value());
  CHECK_THROWS_AS(make_custom_model("bad", 0, {}), ConfigError);
}

TEST_CASE("closed-form averages equal quadrature for every model") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> var(0.0, 0.5);
  for (const auto& m : all_models()) {
    CAPTURE(m.name);
    const QuadratureRule rule(6, m.dim());  // exact for cubic fields
    for (int rep = 0; rep < 50; ++rep) {
      Vec k(m.dim()), sigma(m.dim());
      for (std::size_t i = 0; i < m.dim(); ++i) {
        k[i] = 0.5 + var(rng);
        sigma[i] = std::sqrt(var(rng));
      }
      const CouplingSpec c(k, sigma, 1.0);
      const Vec x = testing::random_point(rng, m.dim(), 2.0);
      const auto closed = *m.closed_avg(x, c.varpi());
      const auto quad = average_field(m, c, x, rule);
      for (std::size_t i = 0; i < x.size(); ++i) CHECK(closed[i] == doctest::Approx(quad[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("FitzHugh-Nagumo average is the same model with u shifted by varpi_1") {
  const auto fhn = make_model("fhn", {{"u", 1.0}, {"a", 0.0}, {"b", 1.45}, {"tau", 10.0}});
  const auto shifted = make_model("fhn", {{"u", 1.0 - 0.2025}, {"a", 0.0}, {"b", 1.45}, {"tau", 10.0}});
  const auto avg = *fhn.closed_avg({0.4, -0.3}, {0.2025, 0.7});
  const auto direct = shifted.eval_F({0.4, -0.3});
  CHECK(avg[0] == doctest::Approx(direct[0]).epsilon(1e-15));
  CHECK(avg[1] == doctest::Approx(direct[1]).epsilon(1e-15));
}

TEST_CASE("hypothesis check on the Cucker-Smale field") {
  const auto m = make_model("cucker_smale", {});
  const auto rep = check_hypothesis(m, 3.0, 21, CouplingSpec::isotropic(1, 1.0, 0.3, 1.0), 1);
  CHECK(rep.items[0].verdict == Verdict::kSatisfied);
  // One-sided Lipschitz constant of v (1 - v^2) is sup (1 - 3 v^2) = 1.
  CHECK(rep.items[0].C_F == doctest::Approx(1.0).epsilon(1e-2));
  CHECK(rep.items[2].verdict == Verdict::kNotChecked);
  CHECK(rep.items[4].verdict == Verdict::kNotChecked);
  CHECK(std::string(to_string(Verdict::kViolated)) == "violated");
}

#include <doctest.h>

#include <cmath>
#include <numbers>

#include "mfsim/errors.hpp"
#include "mfsim/reduced_flow.hpp"
#include "test_support.hpp"

using namespace mfsim;

namespace {

// dx/dt = A x with A a rotation plus decay; exp(tA) is explicit.
ModelSpec spiral() {
  return make_custom_model("spiral", 2, [](std::span<const double> x, std::span<double> out) {
    out[0] = -0.3 * x[0] - 2.0 * x[1];
    out[1] = 2.0 * x[0] - 0.3 * x[1];
  });
}

double spiral_error(double dt) {
  ReducedConfig c;
  c.model = spiral();
  c.coupling = CouplingSpec({1.0, 1.0}, {0.0, 0.0}, 1.0);
  c.m0 = {1.0, 0.5};
  c.dt = dt;
  c.t_end = 2.0;
  c.use_closed_avg = false;
  const auto tr = integrate(c);
  const double e = std::exp(-0.3 * 2.0), th = 2.0 * 2.0;
  const double x = e * (std::cos(th) * 1.0 - std::sin(th) * 0.5);
  const double y = e * (std::sin(th) * 1.0 + std::cos(th) * 0.5);
  return std::hypot(tr.means.back()[0] - x, tr.means.back()[1] - y);
}

double cs_terminal_norm(std::size_t d, double sigma2) {
  ReducedConfig c;
  c.model = make_model("cucker_smale", {{"d", static_cast<double>(d)}});
  c.coupling = CouplingSpec::from_sigma2(Vec(d, 1.0), Vec(d, sigma2), 1.0);
  c.m0 = Vec(d, 0.0);
  c.m0[0] = 0.5;
  if (d > 1) c.m0[1] = 0.3;
  c.dt = 1e-2;
  c.t_end = 200.0;
  c.record_every = 1000;
  const auto tr = integrate(c);
  double s = 0;
  for (double v : tr.means.back()) s += v * v;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("RK4 converges at fourth order") {
  const double e1 = spiral_error(0.1), e2 = spiral_error(0.05), e3 = spiral_error(0.025);
  CHECK(std::log2(e1 / e2) == doctest::Approx(4.0).epsilon(0.05));
  CHECK(std::log2(e2 / e3) == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("closed-form and quadrature right-hand sides agree") {
  const auto model = testing::fhn_excitable();
  const auto coupling = CouplingSpec::from_sigma2({1.0, 1.0}, {0.2, 0.2}, 0.2);
  const AveragedField closed(model, coupling, true), quad(model, coupling, false);
  CHECK(closed.uses_closed_form());
  CHECK_FALSE(quad.uses_closed_form());
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    const auto m = testing::random_point(rng, 2, 3.0);
    const auto a = closed(m), b = quad(m);
    CHECK(a[0] == doctest::Approx(b[0]).epsilon(1e-12).scale(1.0));
    CHECK(a[1] == doctest::Approx(b[1]).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("averaged Jacobian matches finite differences") {
  const auto model = make_model("stuart_landau_modified", {{"omega", 1.0}, {"b", 1.01}});
  const AveragedField rhs(model, CouplingSpec({1.0, 1.0}, {0.3, 0.3}, 0.5), true);
  std::mt19937_64 rng(6);
  for (int i = 0; i < 20; ++i) {
    const auto m = testing::random_point(rng, 2, 2.0);
    const auto fd = testing::fd_jacobian([&](const Vec& x) { return rhs(x); }, m);
    CHECK(testing::max_rel_diff(rhs.jacobian(m), fd) < 1e-6);
  }
}

TEST_CASE("Cucker-Smale mean settles on |m| = sqrt(1 - (2 + d) sigma^2)") {
  CHECK(cs_terminal_norm(1, 0.2) == doctest::Approx(std::sqrt(1.0 - 3 * 0.2)).epsilon(1e-6));
  CHECK(cs_terminal_norm(2, 0.1) == doctest::Approx(std::sqrt(1.0 - 4 * 0.1)).epsilon(1e-6));
  CHECK(cs_terminal_norm(3, 0.05) == doctest::Approx(std::sqrt(1.0 - 5 * 0.05)).epsilon(1e-6));
  // Past the threshold the origin is the attractor.
  CHECK(cs_terminal_norm(1, 0.4) < 1e-6);
  CHECK(cs_terminal_norm(2, 0.3) < 1e-6);
}

TEST_CASE("time is measured in the particle clock") {
  // delta scales the speed: halving delta and doubling t_end lands on the same point.
  ReducedConfig a;
  a.model = spiral();
  a.coupling = CouplingSpec({1.0, 1.0}, {0.0, 0.0}, 1.0);
  a.m0 = {1.0, 0.0};
  a.dt = 1e-3;
  a.t_end = 1.0;
  a.use_closed_avg = false;
  auto b = a;
  b.coupling = a.coupling.with_delta(0.5);
  b.dt = 2e-3;
  b.t_end = 2.0;
  const auto ta = integrate(a), tb = integrate(b);
  CHECK(ta.means.back()[0] == doctest::Approx(tb.means.back()[0]).epsilon(1e-12));
  CHECK(ta.means.back()[1] == doctest::Approx(tb.means.back()[1]).epsilon(1e-12));
}

TEST_CASE("records and blow-up") {
  ReducedConfig c;
  c.model = spiral();
  c.coupling = CouplingSpec({1.0, 1.0}, {0.0, 0.0}, 1.0);
  c.m0 = {1.0, 0.0};
  c.dt = 0.1;
  c.t_end = 1.1;
  c.record_every = 4;
  c.use_closed_avg = false;
  const auto tr = integrate(c);
  REQUIRE(tr.size() == 4);  // steps 0, 4, 8 and the final step 11
  CHECK(tr.times.back() == doctest::Approx(1.1));

  c.model = make_custom_model("explosive", 2, [](std::span<const double> x, std::span<double> out) {
    out[0] = x[0] * x[0];
    out[1] = 0.0;
  });
  c.m0 = {2.0, 0.0};
  c.t_end = 10.0;
  CHECK_THROWS_AS(integrate(c), BlowUpError);

  ReducedConfig bad;
  bad.model = spiral();
  bad.coupling = CouplingSpec({1.0, 1.0}, {0.0, 0.0}, 1.0);
  bad.m0 = {1.0};
  bad.dt = -1.0;
  try {
    bad.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.messages().size() >= 2);
  }
}

TEST_CASE("boundary inward test on the modified Stuart-Landau model") {
  const auto model = make_model("stuart_landau_modified", {{"omega", 1.0}, {"b", 1.01}});
  const auto coupling = CouplingSpec({1.0, 1.0}, {0.3, 0.3}, 0.5);
  const auto far = boundary_inward_test(model, coupling, 10.0, 360);
  CHECK(far.strictly_inward);
  CHECK(far.max_normal_drift < 0.0);
  CHECK(far.samples == 360);
  // Near the unstable origin the field points outward somewhere.
  const auto near = boundary_inward_test(model, coupling, 0.05, 360);
  CHECK_FALSE(near.strictly_inward);
}

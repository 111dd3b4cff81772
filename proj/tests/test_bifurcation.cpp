#include <doctest.h>

#include <cmath>
#include <numbers>

#include "mfsim/bifurcation.hpp"
#include "mfsim/errors.hpp"
#include "test_support.hpp"

using namespace mfsim;

namespace {

// Independent root of x^3 + 3(1/b - u) x + 3a/b by plain bisection.
double bisect_x0(double u, double a, double b) {
  auto g = [&](double x) { return x * x * x + 3.0 * (1.0 / b - u) * x + 3.0 * a / b; };
  double lo = -10.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (g(lo) * g(mid) <= 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

// Circle of radius r about c sampled every dt, period T, with optional radial
// drift and angular jitter.
MeanTrajectory circle(double r, double T, double t_end, double dt, double growth = 0.0,
                      double jitter = 0.0, Vec c = {0.0, 0.0}) {
  MeanTrajectory tr;
  tr.dim = 2;
  for (double t = 0.0; t <= t_end + 1e-12; t += dt) {
    const double th = 2.0 * std::numbers::pi * t / T + jitter * std::sin(97.0 * t);
    const double rad = r * std::exp(growth * t);
    tr.append(t, {c[0] + rad * std::cos(th), c[1] + rad * std::sin(th)});
  }
  return tr;
}

}  // namespace

TEST_CASE("FHN fixed point agrees with an independent bisection") {
  for (double u = 0.1; u < 0.999; u += 0.05)
    CHECK(fhn_fixed_point_x0(u, 1.0 / 3.0, 1.0) == doctest::Approx(bisect_x0(u, 1.0 / 3.0, 1.0)).epsilon(1e-12));
  // Near u = 1 the Cardano form is rearranged; the cancellation must not show.
  for (double u : {0.999, 0.99999, 1.0})
    CHECK(fhn_fixed_point_x0(u, 1.0 / 3.0, 1.0) == doctest::Approx(bisect_x0(u, 1.0 / 3.0, 1.0)).epsilon(1e-12));
  CHECK(fhn_fixed_point_x0(0.5, 0.2, 2.0) == doctest::Approx(bisect_x0(0.5, 0.2, 2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(fhn_fixed_point_x0(1.0, 0.0, 1.45), DomainError);
}

TEST_CASE("depressed cubic roots") {
  const auto r = depressed_cubic_roots(-3.0, 0.0);
  REQUIRE(r.size() == 3);
  CHECK(r[0] == doctest::Approx(-std::sqrt(3.0)));
  CHECK(r[1] == doctest::Approx(0.0));
  CHECK(r[2] == doctest::Approx(std::sqrt(3.0)));
  CHECK(depressed_cubic_roots(1.0, 2.0).size() == 1);
  CHECK(depressed_cubic_roots(1.0, 2.0)[0] == doctest::Approx(-1.0));
}

TEST_CASE("FHN Hopf and pitchfork loci") {
  const double third = 1.0 / 3.0;
  const auto sub = hopf_locus_fhn(third, 1.0, 10.0, 0.8, 0.95);
  CHECK(sub.value == doctest::Approx(0.88604).epsilon(1e-4 / 0.88604));
  CHECK(sub.kind == BifurcationKind::kHopf);
  CHECK(sub.method == DetectionMethod::kRootFind);
  const auto super = hopf_locus_fhn(third, 1.0, 10.0, 0.1, 0.5);
  CHECK(std::abs(super.value - 0.28383) < 1e-4);
  // Trace vanishes at the returned value.
  CHECK(std::abs(fhn_hopf_trace(sub.value, third, 1.0, 10.0, FhnBranch::kPrincipal)) < 1e-10);

  const auto bistable = hopf_locus_fhn(0.0, 1.45, 10.0, 0.8, 0.99, FhnBranch::kNontrivial);
  CHECK(std::abs(bistable.value - 0.96198) < 1e-4);
  const auto trivial = hopf_locus_fhn(0.0, 1.45, 10.0, 0.0, 0.5, FhnBranch::kTrivial);
  CHECK(std::abs(trivial.value - 0.145) < 1e-12);

  CHECK(pitchfork_locus_fhn(1.45).value == 1.0 / 1.45);
  CHECK_THROWS_AS(pitchfork_locus_fhn(0.0), DomainError);
  CHECK_THROWS_AS(hopf_locus_fhn(third, 1.0, 10.0, 0.5, 0.6), BracketError);
}

TEST_CASE("bifurcation points serialise") {
  const auto p = pitchfork_locus_fhn(2.0);
  const auto js = p.to_json();
  CHECK(js.find("\"kind\":\"pitchfork\"") != std::string::npos);
  CHECK(js.find("\"value\":0.5") != std::string::npos);
}

TEST_CASE("stability classification") {
  using C = std::complex<double>;
  CHECK(classify({C(-1, 0), C(-2, 0)}) == Stability::kStable);
  CHECK(classify({C(-0.1, 1), C(-0.1, -1)}) == Stability::kStable);
  CHECK(classify({C(0.1, 1), C(0.1, -1)}) == Stability::kUnstable);
  CHECK(classify({C(1, 0), C(-1, 0)}) == Stability::kSaddle);
  CHECK(classify({C(0, 1), C(0, -1)}) == Stability::kMarginal);
}

TEST_CASE("fixed points of the bistable averaged flow") {
  const auto model = make_model("fhn", {{"u", 0.8}, {"a", 0.0}, {"b", 1.45}, {"tau", 10.0}});
  const AveragedField rhs(model, CouplingSpec({1.0, 1.0}, {0.0, 0.0}, 1.0), true);
  const auto set = solve_fixed_points(rhs, {-3.0, -3.0}, {3.0, 3.0}, 9);
  REQUIRE(set.points.size() == 3);
  const double x = std::sqrt(3.0 * (0.8 - 1.0 / 1.45));
  CHECK(set.points[0].location[0] == doctest::Approx(-x).epsilon(1e-10));
  CHECK(set.points[1].location[0] == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
  CHECK(set.points[2].location[0] == doctest::Approx(x).epsilon(1e-10));
  CHECK(set.points[1].stability == Stability::kSaddle);
  // u = 0.8 < 0.96198: the outer pair is past its subcritical Hopf and unstable.
  CHECK(set.points[0].stability == Stability::kUnstable);
  for (const auto& p : set.points) CHECK(p.residual < 1e-10);
}

TEST_CASE("limit cycle detection on synthetic orbits") {
  const auto c = detect_limit_cycle(circle(2.0, 7.0, 70.0, 0.01), {0.0, 0.0});
  REQUIRE(c.has_value());
  CHECK(c->period == doctest::Approx(7.0).epsilon(1e-4));
  CHECK(c->amplitude == doctest::Approx(2.0).epsilon(1e-3));
  CHECK(c->radius_spread < 1e-6);
  CHECK(c->stable);

  // Off-centre and clockwise.
  MeanTrajectory cw = circle(1.0, 5.0, 60.0, 0.01, 0.0, 0.0, {3.0, -1.0});
  for (auto& m : cw.means) m[1] = -2.0 - m[1];
  const auto c2 = detect_limit_cycle(cw, {3.0, -1.0});
  REQUIRE(c2.has_value());
  CHECK(c2->period == doctest::Approx(5.0).epsilon(1e-4));

  // A decaying spiral has steadily shrinking radii.
  CHECK_FALSE(detect_limit_cycle(circle(2.0, 7.0, 70.0, 0.01, -0.05), {0.0, 0.0}).has_value());
  // A slowly growing spiral passes a loose spread bound but is not settled.
  CycleOptions loose;
  loose.radius_spread = 0.05;
  const auto grow = detect_limit_cycle(circle(2.0, 7.0, 70.0, 0.01, 5e-4), {0.0, 0.0}, loose);
  REQUIRE(grow.has_value());
  CHECK_FALSE(grow->stable);
  // Too few turns.
  CHECK_FALSE(detect_limit_cycle(circle(2.0, 7.0, 20.0, 0.01), {0.0, 0.0}).has_value());
  // Orbit that stopped turning long before the end.
  auto stalled = circle(2.0, 7.0, 50.0, 0.01);
  for (double t = 50.01; t < 100.0; t += 0.01) stalled.append(t, {0.5, 0.5});
  CHECK_FALSE(detect_limit_cycle(stalled, {0.0, 0.0}).has_value());
}

TEST_CASE("jitter across the section ray does not add turns") {
  const auto c = detect_limit_cycle(circle(2.0, 7.0, 70.0, 0.01, 0.0, 0.05), {0.0, 0.0});
  REQUIRE(c.has_value());
  CHECK(c->period == doctest::Approx(7.0).epsilon(1e-2));
  CHECK(c->section_times.size() >= 5);
  for (std::size_t i = 1; i < c->section_times.size(); ++i)
    CHECK(c->section_times[i] - c->section_times[i - 1] > 6.0);
}

TEST_CASE("transversal section and turn maxima") {
  // Ellipse: the widest point lies on the x axis.
  MeanTrajectory tr;
  tr.dim = 2;
  for (double t = 0.0; t <= 60.0; t += 0.01)
    tr.append(t, {3.0 * std::cos(t + 0.3), std::sin(t + 0.3)});
  const auto s = transversal_section(tr, {0.0, 0.0}, 30.0);
  CHECK(s.max_radius == doctest::Approx(3.0).epsilon(1e-4));
  CHECK(std::abs(std::sin(s.angle)) < 1e-2);
  CycleOptions opts;
  opts.spread = SpreadMeasure::kTurnMaximum;
  opts.section_angle = s.angle;
  opts.min_section_radius = 0.5 * s.max_radius;
  const auto c = detect_limit_cycle(tr, {0.0, 0.0}, opts);
  REQUIRE(c.has_value());
  CHECK(c->period == doctest::Approx(2.0 * std::numbers::pi).epsilon(1e-4));
  for (double r : c->turn_max_radii) CHECK(r == doctest::Approx(3.0).epsilon(1e-4));
}

TEST_CASE("saddle-node of cycles, excitable FHN") {
  auto probe = fhn_cycle_probe(1.0 / 3.0, 1.0, 10.0, {2.5, 0.0});
  CHECK(probe.has_cycle(0.90));
  CHECK_FALSE(probe.has_cycle(0.93));
  const auto p = snc_bisection(probe, 0.89, 0.93, 1e-3);
  CHECK(p.kind == BifurcationKind::kSaddleNodeOfCycles);
  CHECK(p.tolerance <= 5e-4);
  CHECK(std::abs(p.value - 0.91435) < 2e-3);
  CHECK_THROWS_AS(snc_bisection(probe, 0.93, 0.95, 1e-3), BracketError);
}

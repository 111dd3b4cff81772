#include "mfsim/bifurcation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/tools/roots.hpp>
#include <json.hpp>

#include "mfsim/errors.hpp"

namespace mfsim {

const char* to_string(Stability s) {
  switch (s) {
    case Stability::kStable: return "stable";
    case Stability::kUnstable: return "unstable";
    case Stability::kSaddle: return "saddle";
    case Stability::kMarginal: return "marginal";
  }
  return "?";
}

const char* to_string(BifurcationKind k) {
  switch (k) {
    case BifurcationKind::kHopf: return "hopf";
    case BifurcationKind::kPitchfork: return "pitchfork";
    case BifurcationKind::kSaddleNodeOfCycles: return "saddle_node_of_cycles";
    case BifurcationKind::kHomoclinic: return "homoclinic";
  }
  return "?";
}

const char* to_string(DetectionMethod m) {
  switch (m) {
    case DetectionMethod::kClosedForm: return "closed_form";
    case DetectionMethod::kRootFind: return "root_find";
    case DetectionMethod::kBisectionSim: return "bisection_sim";
  }
  return "?";
}

std::string BifurcationPoint::to_json() const {
  nlohmann::ordered_json j;
  j["kind"] = to_string(kind);
  j["parameter"] = parameter;
  j["value"] = value;
  j["tolerance"] = tolerance;
  j["method"] = to_string(method);
  if (!note.empty()) j["note"] = note;
  return j.dump();
}

// ---------------------------------------------------------------------------

Stability classify(const std::vector<std::complex<double>>& eigenvalues) {
  double scale = 1.0;
  for (const auto& l : eigenvalues) scale = std::max(scale, std::abs(l));
  const double tol = 1e-9 * scale;
  bool neg = false, pos = false, zero = false;
  for (const auto& l : eigenvalues) {
    if (l.real() < -tol) neg = true;
    else if (l.real() > tol) pos = true;
    else zero = true;
  }
  if (pos && neg) return Stability::kSaddle;
  if (zero) return Stability::kMarginal;
  return pos ? Stability::kUnstable : Stability::kStable;
}

namespace {

double norm(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

Eigen::MatrixXd fd_jacobian(const AveragedField& rhs, const Vec& m, const Vec& f0) {
  const std::size_t d = m.size();
  Eigen::MatrixXd J(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  Vec mp = m, fp(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double h = 1e-7 * (1.0 + std::abs(m[j]));
    mp[j] = m[j] + h;
    rhs.eval(mp, fp);
    mp[j] = m[j];
    for (std::size_t i = 0; i < d; ++i)
      J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (fp[i] - f0[i]) / h;
  }
  return J;
}

std::optional<Vec> newton(const AveragedField& rhs, Vec m) {
  constexpr int kMaxIter = 50;
  const std::size_t d = m.size();
  Vec f(d), trial(d), ft(d);
  rhs.eval(m, f);
  double res = norm(f);
  for (int it = 0; it < kMaxIter && res > 1e-12; ++it) {
    if (!std::isfinite(res)) return std::nullopt;
    const Eigen::MatrixXd J = fd_jacobian(rhs, m, f);
    const Eigen::VectorXd rhs_v = Eigen::Map<const Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(d));
    const Eigen::VectorXd dx = J.fullPivLu().solve(-rhs_v);
    if (!dx.allFinite()) return std::nullopt;
    double lambda = 1.0;
    double res_trial = std::numeric_limits<double>::infinity();
    for (int halving = 0; halving < 30; ++halving) {
      for (std::size_t i = 0; i < d; ++i) trial[i] = m[i] + lambda * dx(static_cast<Eigen::Index>(i));
      rhs.eval(trial, ft);
      res_trial = norm(ft);
      if (res_trial < res) break;
      lambda *= 0.5;
    }
    if (!(res_trial < res)) break;
    m = trial;
    f = ft;
    res = res_trial;
    if (norm(m) > 1e6) return std::nullopt;
  }
  if (!(res <= 1e-10)) return std::nullopt;
  return m;
}

}  // namespace

FixedPointSet solve_fixed_points(const AveragedField& rhs, const Vec& lo, const Vec& hi, int grid) {
  const std::size_t d = rhs.dim();
  if (lo.size() != d || hi.size() != d) throw DomainError("solve_fixed_points: box dimension mismatch");
  if (grid < 1) throw DomainError("solve_fixed_points: grid must be >= 1");
  FixedPointSet out;
  std::vector<Vec> roots;
  std::size_t total = 1;
  for (std::size_t i = 0; i < d; ++i) total *= static_cast<std::size_t>(grid);
  Vec seed(d);
  for (std::size_t n = 0; n < total; ++n) {
    std::size_t r = n;
    for (std::size_t i = 0; i < d; ++i) {
      const auto g = static_cast<std::size_t>(grid);
      const std::size_t idx = r % g;
      r /= g;
      seed[i] = grid == 1 ? 0.5 * (lo[i] + hi[i])
                          : lo[i] + (hi[i] - lo[i]) * static_cast<double>(idx) / (grid - 1);
    }
    ++out.seeds;
    const auto root = newton(rhs, seed);
    if (!root) continue;
    ++out.converged;
    bool dup = false;
    for (const Vec& q : roots) {
      Vec diff(d);
      for (std::size_t i = 0; i < d; ++i) diff[i] = q[i] - (*root)[i];
      if (norm(diff) <= 1e-8) {
        dup = true;
        break;
      }
    }
    if (!dup) roots.push_back(*root);
  }
  std::sort(roots.begin(), roots.end());
  const double delta = rhs.coupling().delta();
  for (const Vec& m : roots) {
    FixedPoint fp;
    fp.location = m;
    fp.residual = norm(rhs(m));
    fp.jacobian = rhs.jacobian(m) * (delta > 0.0 ? delta : 1.0);
    if (d == 1) {
      fp.eigenvalues = {std::complex<double>(fp.jacobian(0, 0), 0.0)};
    } else {
      Eigen::EigenSolver<Eigen::MatrixXd> es(fp.jacobian, false);
      for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) fp.eigenvalues.push_back(es.eigenvalues()(i));
      std::sort(fp.eigenvalues.begin(), fp.eigenvalues.end(), [](const auto& a, const auto& b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
      });
    }
    fp.stability = classify(fp.eigenvalues);
    out.points.push_back(std::move(fp));
  }
  if (out.converged == 0)
    out.diagnostic = "Newton did not converge from any of the " + std::to_string(out.seeds) + " seeds";
  return out;
}

// ---------------------------------------------------------------------------

std::vector<double> depressed_cubic_roots(double p, double q) {
  std::vector<double> roots;
  const double D = 0.25 * q * q + p * p * p / 27.0;
  if (D > 0.0) {
    // One real root; pick the cube root without cancellation.
    const double t = std::cbrt(-0.5 * q - std::copysign(std::sqrt(D), q));
    roots.push_back(t == 0.0 ? 0.0 : t - p / (3.0 * t));
  } else if (p == 0.0) {
    roots.push_back(0.0);
  } else {
    const double r = 2.0 * std::sqrt(-p / 3.0);
    const double arg = std::clamp(3.0 * q / (p * r), -1.0, 1.0);
    const double phi = std::acos(arg) / 3.0;
    for (int k = 0; k < 3; ++k) roots.push_back(r * std::cos(phi - 2.0 * std::numbers::pi * k / 3.0));
  }
  for (double& x : roots) {
    for (int it = 0; it < 3; ++it) {
      const double g = (x * x + p) * x + q;
      const double dg = 3.0 * x * x + p;
      if (dg == 0.0) break;
      x -= g / dg;
    }
  }
  std::sort(roots.begin(), roots.end());
  const double scale = 1.0 + std::abs(roots.back());
  roots.erase(std::unique(roots.begin(), roots.end(),
                          [&](double a, double b) { return std::abs(a - b) <= 1e-9 * scale; }),
              roots.end());
  return roots;
}

double fhn_fixed_point_x0(double u, double a, double b) {
  if (b == 0.0) throw DomainError("fhn_fixed_point_x0: b must be nonzero");
  const double p = 3.0 * (1.0 / b - u);
  const double q = 3.0 * a / b;
  if (a == 1.0 / 3.0 && b == 1.0) {
    const double w = 1.0 - u;
    const double R = 1.0 + 4.0 * w * w * w;  // = 5 - 12u + 12u^2 - 4u^3
    if (R >= 0.0) {
      const double sr = std::sqrt(R);
      // (sqrt(R) - 1)/2 rewritten as 2(1-u)^3/(sqrt(R) + 1).
      double x = std::cbrt(2.0 * w * w * w / (sr + 1.0)) - std::cbrt(0.5 * (sr + 1.0));
      for (int it = 0; it < 2; ++it) {
        const double dg = 3.0 * x * x + p;
        if (dg == 0.0) break;
        x -= ((x * x + p) * x + q) / dg;
      }
      return x;
    }
  }
  const auto roots = depressed_cubic_roots(p, q);
  if (roots.size() != 1)
    throw DomainError("fhn_fixed_point_x0: " + std::to_string(roots.size()) +
                      " fixed points at u = " + format_double(u) + "; use solve_fixed_points");
  return roots.front();
}

double fhn_hopf_trace(double u, double a, double b, double tau, FhnBranch branch) {
  double x0sq = 0.0;
  switch (branch) {
    case FhnBranch::kPrincipal: {
      const double x0 = fhn_fixed_point_x0(u, a, b);
      x0sq = x0 * x0;
      break;
    }
    case FhnBranch::kTrivial:
      if (a != 0.0) throw DomainError("trivial branch requires a = 0");
      break;
    case FhnBranch::kNontrivial:
      if (a != 0.0) throw DomainError("nontrivial branch requires a = 0");
      if (!(u > 1.0 / b)) throw DomainError("nontrivial branch requires u > 1/b");
      x0sq = 3.0 * (u - 1.0 / b);
      break;
  }
  return u - x0sq - b / tau;
}

BifurcationPoint hopf_locus_fhn(double a, double b, double tau, double u_lo, double u_hi,
                                FhnBranch branch) {
  if (!(tau > 0.0)) throw DomainError("hopf_locus_fhn: tau must be > 0");
  if (!(u_lo < u_hi)) throw BracketError("hopf_locus_fhn: need u_lo < u_hi");
  auto f = [&](double u) { return fhn_hopf_trace(u, a, b, tau, branch); };
  const double f_lo = f(u_lo), f_hi = f(u_hi);
  if (f_lo * f_hi > 0.0)
    throw BracketError("hopf_locus_fhn: trace has no sign change on [" + format_double(u_lo) +
                       ", " + format_double(u_hi) + "]");
  BifurcationPoint bp;
  bp.kind = BifurcationKind::kHopf;
  bp.method = DetectionMethod::kRootFind;
  if (f_lo == 0.0 || f_hi == 0.0) {
    bp.value = f_lo == 0.0 ? u_lo : u_hi;
    bp.tolerance = std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(bp.value));
  } else {
    std::uintmax_t max_iter = 200;
    const auto [l, h] = boost::math::tools::toms748_solve(
        f, u_lo, u_hi, f_lo, f_hi, boost::math::tools::eps_tolerance<double>(50), max_iter);
    bp.value = 0.5 * (l + h);
    bp.tolerance = std::max(0.5 * (h - l),
                            std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(bp.value)));
  }
  // A Hopf point also needs det > 0 (complex pair): det = (1 - b (u - x0^2)) / tau.
  const double trace_part = f(bp.value) + b / tau;
  const double det = (1.0 - b * trace_part) / tau;
  bp.note = det > 0.0 ? "criticality not classified"
                      : "determinant <= 0 at the root: real eigenvalue crossing, not a Hopf point";
  return bp;
}

BifurcationPoint pitchfork_locus_fhn(double b) {
  if (!(b > 0.0)) throw DomainError("pitchfork_locus_fhn: b must be > 0");
  BifurcationPoint bp;
  bp.kind = BifurcationKind::kPitchfork;
  bp.method = DetectionMethod::kClosedForm;
  bp.value = 1.0 / b;
  bp.tolerance = std::numeric_limits<double>::epsilon() * bp.value;
  return bp;
}

// ---------------------------------------------------------------------------

std::optional<LimitCycle> detect_limit_cycle(const MeanTrajectory& traj, const Vec& center,
                                             const CycleOptions& opts) {
  if (opts.crossings < 2) throw DomainError("detect_limit_cycle: need at least 2 crossings");
  if (traj.size() < 2) return std::nullopt;
  const PolarTrace p = polar_readout(traj, center);
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  struct Crossing {
    double t, r;
    int dir;
  };
  // Crossings in the direction of net rotation, at radius >= min_section_radius.
  // A turn counts only if its level is above every level counted so far, so
  // noisy back-and-forth passes do not register as extra turns.
  const double net = p.angle.back() - p.angle.front();
  if (net == 0.0) return std::nullopt;
  const int dir = net > 0.0 ? 1 : -1;
  auto rel = [&](std::size_t k) { return dir * (p.angle[k] - opts.section_angle); };
  std::vector<Crossing> same;
  double counted = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < p.times.size(); ++k) {
    const double a0 = rel(k - 1), a1 = rel(k);
    const double n0 = std::floor(a0 / kTwoPi), n1 = std::floor(a1 / kTwoPi);
    for (double n = n0 + 1.0; n <= n1; n += 1.0) {
      const double level = n * kTwoPi;
      const double w = (level - a0) / (a1 - a0);
      const double t = p.times[k - 1] + w * (p.times[k] - p.times[k - 1]);
      const double x = traj.means[k - 1][0] + w * (traj.means[k][0] - traj.means[k - 1][0]) - center[0];
      const double y = traj.means[k - 1][1] + w * (traj.means[k][1] - traj.means[k - 1][1]) - center[1];
      const double r = std::hypot(x, y);
      if (n <= counted || r < opts.min_section_radius) continue;
      counted = n;
      same.push_back({t, r, dir});
    }
  }
  if (same.size() < opts.crossings) return std::nullopt;
  same.erase(same.begin(), same.end() - static_cast<std::ptrdiff_t>(opts.crossings));

  LimitCycle lc;
  for (const auto& c : same) {
    lc.section_times.push_back(c.t);
    lc.section_radii.push_back(c.r);
  }
  for (std::size_t i = 0; i + 1 < same.size(); ++i) {
    double m = std::max(same[i].r, same[i + 1].r);
    for (std::size_t k = 0; k < p.times.size(); ++k)
      if (p.times[k] > same[i].t && p.times[k] < same[i + 1].t) m = std::max(m, p.radius[k]);
    lc.turn_max_radii.push_back(m);
  }
  const auto& spread_of =
      opts.spread == SpreadMeasure::kSectionRadius ? lc.section_radii : lc.turn_max_radii;
  const auto [rmin, rmax] = std::minmax_element(spread_of.begin(), spread_of.end());
  double rmean = 0.0;
  for (double r : spread_of) rmean += r;
  rmean /= static_cast<double>(spread_of.size());
  if (!(rmean > 1e-9) || (*rmax - *rmin) / rmean > opts.radius_spread) return std::nullopt;
  lc.radius_spread = (*rmax - *rmin) / rmean;
  lc.period = (same.back().t - same.front().t) / static_cast<double>(same.size() - 1);
  // The orbit must still be turning at the end of the record.
  if (p.times.back() - same.back().t > 2.0 * lc.period) return std::nullopt;
  for (std::size_t k = 0; k < p.times.size(); ++k)
    if (p.times[k] >= same.back().t - lc.period) lc.amplitude = std::max(lc.amplitude, p.radius[k]);
  const double first_step = std::abs(lc.section_radii[1] - lc.section_radii[0]);
  const double last_step = std::abs(lc.section_radii.back() - lc.section_radii[lc.section_radii.size() - 2]);
  // Settled orbits show only interpolation jitter in the section radii.
  lc.stable = last_step <= first_step || last_step <= 1e-3 * rmean;
  return lc;
}

Section transversal_section(const MeanTrajectory& traj, const Vec& center, double t_from) {
  const PolarTrace p = polar_readout(traj, center);
  Section sec;
  double best = -1.0;
  for (std::size_t k = 0; k < p.times.size(); ++k) {
    if (p.times[k] < t_from || !(p.radius[k] > best)) continue;
    best = p.radius[k];
    sec.angle = std::remainder(p.angle[k], 2.0 * std::numbers::pi);
    sec.max_radius = best;
  }
  return sec;
}

bool CycleProbe::has_cycle(double param) const {
  const AveragedField rhs = family(param);
  try {
    const MeanTrajectory traj = integrate(rhs, start, dt, t_end, record_every);
    return detect_limit_cycle(traj, center(param), options).has_value();
  } catch (const BlowUpError&) {
    return false;
  }
}

CycleProbe fhn_cycle_probe(double a, double b, double tau, Vec start) {
  CycleProbe probe;
  probe.family = [a, b, tau](double u) {
    return AveragedField(make_model("fhn", {{"u", u}, {"a", a}, {"b", b}, {"tau", tau}}),
                         CouplingSpec::isotropic(2, 1.0, 0.0, 1.0), true);
  };
  probe.center = [a, b](double u) {
    const auto roots = depressed_cubic_roots(3.0 * (1.0 / b - u), 3.0 * a / b);
    const double x = roots[roots.size() / 2];
    return Vec{x, (x + a) / b};
  };
  probe.start = std::move(start);
  return probe;
}

BifurcationPoint snc_bisection(const CycleProbe& probe, double lo, double hi, double tol) {
  if (!(lo < hi) || !(tol > 0.0)) throw BracketError("snc_bisection: need lo < hi and tol > 0");
  if (!probe.has_cycle(lo))
    throw BracketError("snc_bisection: no cycle at the lower end " + format_double(lo));
  if (probe.has_cycle(hi))
    throw BracketError("snc_bisection: cycle still present at the upper end " + format_double(hi));
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (probe.has_cycle(mid) ? lo : hi) = mid;
  }
  BifurcationPoint bp;
  bp.kind = BifurcationKind::kSaddleNodeOfCycles;
  bp.method = DetectionMethod::kBisectionSim;
  bp.value = 0.5 * (lo + hi);
  bp.tolerance = 0.5 * (hi - lo);
  return bp;
}

BifurcationPoint homoclinic_bisection(const CycleProbe& near_saddle, const CycleProbe& far,
                                      double lo, double hi, double tol) {
  if (!(lo < hi) || !(tol > 0.0)) throw BracketError("homoclinic_bisection: need lo < hi and tol > 0");
  if (!far.has_cycle(lo) || !far.has_cycle(hi))
    throw BracketError("homoclinic_bisection: the outer cycle must exist across the bracket");
  if (!near_saddle.has_cycle(lo) || near_saddle.has_cycle(hi))
    throw BracketError("homoclinic_bisection: orbits from the saddle do not change basin on the bracket");
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (near_saddle.has_cycle(mid) ? lo : hi) = mid;
  }
  BifurcationPoint bp;
  bp.kind = BifurcationKind::kHomoclinic;
  bp.method = DetectionMethod::kBisectionSim;
  bp.value = 0.5 * (lo + hi);
  bp.tolerance = std::max(0.5 * (hi - lo), 5e-3);
  bp.note = "experimental: basin change of orbits leaving the saddle";
  return bp;
}

}  // namespace mfsim

#include "mfsim/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>

#include <json.hpp>

#include "mfsim/errors.hpp"
#include "mfsim/manifold_diag.hpp"
#include "mfsim/particle_sim.hpp"
#include "mfsim/reduced_flow.hpp"

namespace mfsim {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

class OutputDir {
 public:
  OutputDir(const OutputBlock& out) : dir_(out.directory), prefix_(out.prefix) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_))
      throw Error("cannot create output directory '" + dir_.string() + "': " + ec.message());
  }

  // Opens <prefix>_<suffix> for writing and records it in the manifest.
  std::ofstream open(const std::string& suffix) {
    const std::string name = prefix_ + "_" + suffix;
    std::ofstream os(dir_ / name, std::ios::binary);
    if (!os) throw Error("cannot write '" + (dir_ / name).string() + "'");
    files_.push_back(name);
    return os;
  }

  void close(std::ofstream& os, const std::string& suffix) {
    os.close();
    if (!os) throw Error("write failed for '" + (dir_ / (prefix_ + "_" + suffix)).string() + "'");
  }

  void write(const std::string& suffix, const std::string& text) {
    auto os = open(suffix);
    os << text;
    close(os, suffix);
  }

  std::string directory() const { return dir_.string(); }
  const std::vector<std::string>& files() const { return files_; }

 private:
  fs::path dir_;
  std::string prefix_;
  std::vector<std::string> files_;
};

json vec_json(const Vec& v) {
  json j = json::array();
  for (double x : v) j.push_back(x);
  return j;
}

double norm(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Fixed-point search box: the extent of the second half of the trajectory,
// padded so an interior equilibrium is inside.
std::pair<Vec, Vec> settled_box(const MeanTrajectory& traj) {
  const std::size_t d = traj.dim;
  Vec lo(d, 1e300), hi(d, -1e300);
  for (std::size_t r = traj.size() / 2; r < traj.size(); ++r)
    for (std::size_t i = 0; i < d; ++i) {
      lo[i] = std::min(lo[i], traj.means[r][i]);
      hi[i] = std::max(hi[i], traj.means[r][i]);
    }
  for (std::size_t i = 0; i < d; ++i) {
    const double pad = 0.1 * (hi[i] - lo[i]) + 0.5;
    lo[i] -= pad;
    hi[i] += pad;
  }
  return {lo, hi};
}

json cycle_json(const std::string& source, const LimitCycle& lc) {
  json j;
  j["source"] = source;
  j["period"] = lc.period;
  j["amplitude"] = lc.amplitude;
  j["crossings"] = lc.section_times.size();
  j["radius_spread"] = lc.radius_spread;
  j["stable"] = lc.stable;
  return j;
}

std::optional<LimitCycle> find_cycle(const ScenarioConfig& c, const AveragedField& rhs,
                                     const MeanTrajectory& traj, Vec& center_out) {
  if (traj.dim < 2 || traj.size() < 3) return std::nullopt;
  if (c.analysis.cycle_center) {
    center_out = *c.analysis.cycle_center;
  } else {
    const auto [lo, hi] = settled_box(traj);
    center_out = cycle_center(rhs, lo, hi);
  }
  CycleOptions opts;
  opts.crossings = c.analysis.cycle_crossings;
  opts.radius_spread = c.analysis.cycle_spread;
  // Section on the outer half of the ray through the settled orbit's widest point.
  const Section sec = transversal_section(traj, center_out, 0.5 * traj.times.back());
  opts.section_angle = sec.angle;
  opts.min_section_radius = 0.5 * sec.max_radius;
  opts.spread = SpreadMeasure::kTurnMaximum;
  return detect_limit_cycle(traj, center_out, opts);
}

SimConfig sim_config(const ScenarioConfig& c, const ModelSpec& model, const CouplingSpec& coupling) {
  SimConfig s;
  s.model = model;
  s.coupling = coupling;
  s.N = c.run.N;
  s.dt = c.run.dt;
  s.t_end = c.run.t_end;
  s.record_every = c.run.record_every;
  s.init = c.run.init == InitKind::kGaussian ? InitLaw::gaussian(c.run.m0) : InitLaw::point_mass(c.run.m0);
  s.seed = c.run.seed;
  s.record_cov = c.run.record_cov;
  return s;
}

MeanTrajectory run_particles(const SimConfig& s, const std::string& what, const EnsembleObserver& obs) {
  try {
    return run(s, obs);
  } catch (const BlowUpError& e) {
    throw BlowUpError(what + ": " + e.what(), e.time(), e.index());
  }
}

// Time average of the Hermite distance over t >= settle.
struct DistanceStats {
  double raw = 0.0;
  double debiased = 0.0;
  double floor = 0.0;
  std::size_t records = 0;
};

DistanceStats distance_stats(const CoeffSeries& series, double settle) {
  DistanceStats st;
  for (std::size_t r = 0; r < series.sets.size(); ++r) {
    if (series.times[r] < settle) continue;
    st.raw += l2_distance_to_q0(series.sets[r], false);
    st.debiased += l2_distance_to_q0(series.sets[r], true);
    st.floor += std::sqrt(sampling_floor_sq(series.sets[r]));
    ++st.records;
  }
  if (st.records > 0) {
    const auto n = static_cast<double>(st.records);
    st.raw /= n;
    st.debiased /= n;
    st.floor /= n;
  }
  return st;
}

json residual_study(const ScenarioConfig& c, const ModelSpec& model, const CouplingSpec& coupling) {
  const auto& a = c.analysis;
  std::vector<ResidualRun> runs;
  json per = json::array();
  std::vector<double> dist;
  const bool hermite = std::all_of(coupling.sigma().begin(), coupling.sigma().end(),
                                   [](double s) { return s > 0.0; });
  for (std::size_t q = 0; q < a.residual_deltas.size(); ++q) {
    const double delta = a.residual_deltas[q];
    SimConfig s = sim_config(c, model, coupling.with_delta(delta));
    ResidualRun rr;
    rr.delta = delta;
    rr.settle_time = a.settle_time;
    rr.particles = s.N;
    CoeffSeries series;
    auto drift = drift_recorder(model, rr.drift, rr.drift_var);
    auto obs = [&](const EnsembleState& st) {
      drift(st);
      if (hermite) {
        series.times.push_back(st.t);
        series.sets.push_back(estimate_coeffs(st, s.coupling, true, a.hermite_theta, a.hermite_degree));
      }
    };
    rr.traj = run_particles(s, "residual run at delta = " + format_double(delta), obs);
    json j;
    j["delta"] = delta;
    if (hermite) {
      const auto st = distance_stats(series, a.settle_time);
      j["mean_distance"] = st.raw;
      j["mean_distance_debiased"] = st.debiased;
      j["distance_floor"] = st.floor;
      dist.push_back(st.raw);
    }
    per.push_back(j);
    runs.push_back(std::move(rr));
  }
  const AveragedField rhs(model, coupling.with_delta(1.0), model.has_closed_avg());
  const auto rep = phase_residual_scaling(rhs, runs, ResidualEstimator::kDrift);
  for (std::size_t q = 0; q < per.size(); ++q) {
    per[q]["residual"] = rep.residual_norms[q];
    per[q]["residual_floor"] = rep.predicted_floor[q];
  }
  json j;
  j["estimator"] = "drift";
  j["runs"] = per;
  j["residual_slope"] = rep.residual_norms.size() >= 2 ? json(rep.slope) : json(nullptr);
  if (dist.size() >= 2 && std::all_of(dist.begin(), dist.end(), [](double v) { return v > 0.0; })) {
    std::vector<double> ld;
    for (double d : a.residual_deltas) ld.push_back(std::log(d));
    j["distance_slope"] = log_slope(ld, dist);
  }
  j["warnings"] = rep.warnings;
  return j;
}

// Reduced flow self-check: smoothed derivative of the reduced trajectory
// against delta F̄ on the same records.
double reduced_self_residual(const AveragedField& rhs, const MeanTrajectory& traj) {
  if (traj.size() < 7 || !(rhs.coupling().delta() > 0.0)) return 0.0;
  const auto mdot = smoothed_derivative(traj, 5);
  const double delta = rhs.coupling().delta();
  Vec f(rhs.dim());
  double sup = 0.0;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    if (!std::isfinite(mdot[k][0])) continue;
    rhs.eval(traj.means[k], f);
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += (mdot[k][i] / delta - f[i]) * (mdot[k][i] / delta - f[i]);
    sup = std::max(sup, std::sqrt(s));
  }
  return sup;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepOutput {
  std::vector<BifurcationPoint> points;
  json details;
};

FhnBranch parse_branch(const std::string& s) {
  if (s == "trivial") return FhnBranch::kTrivial;
  if (s == "nontrivial") return FhnBranch::kNontrivial;
  return FhnBranch::kPrincipal;
}

CycleProbe make_probe(const ScenarioConfig& c) {
  const SweepBlock& s = *c.sweep;
  CycleProbe probe;
  probe.family = [&c, name = s.parameter](double v) {
    auto [model, coupling] = with_parameter(c, name, v);
    // Cycle existence does not depend on the time scale; the probe runs at delta = 1.
    if (name != "delta") coupling = coupling.with_delta(1.0);
    return AveragedField(model, coupling, model.has_closed_avg());
  };
  Vec start = s.probe.empty() ? c.run.m0 : s.probe;
  probe.center = [&c, name = s.parameter, start](double v) {
    auto [model, coupling] = with_parameter(c, name, v);
    const AveragedField rhs(model, coupling.with_delta(1.0), model.has_closed_avg());
    const double r = std::max(3.0, 2.0 * norm(start));
    return cycle_center(rhs, Vec(rhs.dim(), -r), Vec(rhs.dim(), r));
  };
  probe.start = start;
  probe.dt = s.dt;
  probe.t_end = s.t_end;
  probe.options.crossings = c.analysis.cycle_crossings;
  probe.options.radius_spread = c.analysis.cycle_spread;
  return probe;
}

SweepOutput do_sweep(const ScenarioConfig& c) {
  const SweepBlock& s = *c.sweep;
  SweepOutput out;
  out.details["parameter"] = s.parameter;
  out.details["detector"] = to_string(s.detector);
  const CouplingSpec coupling = c.coupling();
  const double varpi1 = coupling.varpi()[0];
  auto fhn = [&](const char* key) { return c.model_params.at(key); };

  switch (s.detector) {
    case SweepDetector::kHopf: {
      // The averaged FHN field is FHN with u replaced by u - varpi_1, so the
      // threshold in the unit's own u is shifted by varpi_1.
      auto bp = hopf_locus_fhn(fhn("a"), fhn("b"), fhn("tau"), s.bracket->first - varpi1,
                               s.bracket->second - varpi1, parse_branch(s.branch));
      if (varpi1 != 0.0) {
        bp.note = "averaged-flow threshold u - varpi_1 = " + format_double(bp.value);
        bp.value += varpi1;
      }
      out.points.push_back(bp);
      break;
    }
    case SweepDetector::kPitchfork: {
      if (fhn("a") != 0.0) throw BracketError("pitchfork sweep needs the symmetric family a = 0");
      auto bp = pitchfork_locus_fhn(fhn("b"));
      if (varpi1 != 0.0) {
        bp.note = "averaged-flow threshold u - varpi_1 = " + format_double(bp.value);
        bp.value += varpi1;
      }
      out.points.push_back(bp);
      break;
    }
    case SweepDetector::kSnc: {
      auto bp = snc_bisection(make_probe(c), s.bracket->first, s.bracket->second, s.tolerance);
      bp.parameter = s.parameter;
      out.points.push_back(bp);
      break;
    }
    case SweepDetector::kCyclePresence: {
      const CycleProbe probe = make_probe(c);
      const std::size_t n = s.values.size();
      std::vector<std::optional<LimitCycle>> found(n);
      std::vector<std::string> failures(n);
      const auto nn = static_cast<std::ptrdiff_t>(n);
      // Values are independent; results land in their own slot.
#pragma omp parallel for schedule(dynamic)
      for (std::ptrdiff_t i = 0; i < nn; ++i) {
        const double v = s.values[static_cast<std::size_t>(i)];
        try {
          const AveragedField rhs = probe.family(v);
          const auto traj = integrate(rhs, probe.start, probe.dt, probe.t_end, probe.record_every);
          found[static_cast<std::size_t>(i)] = detect_limit_cycle(traj, probe.center(v), probe.options);
        } catch (const std::exception& e) {
          failures[static_cast<std::size_t>(i)] = e.what();
        }
      }
      std::vector<std::pair<double, std::size_t>> order;
      for (std::size_t i = 0; i < n; ++i) order.emplace_back(s.values[i], i);
      std::sort(order.begin(), order.end());
      json rows = json::array();
      json transitions = json::array();
      for (std::size_t q = 0; q < n; ++q) {
        const std::size_t i = order[q].second;
        json r;
        r["value"] = order[q].first;
        r["cycle"] = found[i].has_value();
        if (found[i]) {
          r["period"] = found[i]->period;
          r["amplitude"] = found[i]->amplitude;
        }
        if (!failures[i].empty()) r["error"] = failures[i];
        rows.push_back(r);
        if (q > 0 && found[i].has_value() != found[order[q - 1].second].has_value())
          transitions.push_back({order[q - 1].first, order[q].first});
      }
      out.details["results"] = rows;
      out.details["transitions"] = transitions;
      break;
    }
  }
  return out;
}

json bifurcations_json(const std::vector<BifurcationPoint>& points) {
  json arr = json::array();
  for (const auto& p : points) arr.push_back(json::parse(p.to_json()));
  return arr;
}

ScenarioResult finish(OutputDir& out, json& summary, Clock::time_point t0) {
  summary["timing"]["wall_seconds"] = seconds_since(t0);
  summary["files"] = out.files();
  ScenarioResult res;
  res.summary_json = summary.dump(2) + "\n";
  out.write("summary.json", res.summary_json);
  // The manifest lists itself.
  auto files = out.files();
  files.push_back(summary["scenario"].get<std::string>() + "_manifest.json");
  res.directory = out.directory();
  res.files = files;
  out.write("manifest.json", res.manifest_json());
  return res;
}

}  // namespace

std::string ScenarioResult::manifest_json() const {
  json j;
  j["directory"] = directory;
  j["files"] = files;
  return j.dump(2) + "\n";
}

std::pair<ModelSpec, CouplingSpec> with_parameter(const ScenarioConfig& config, const std::string& name,
                                                  double value) {
  ParamMap params = config.model_params;
  Vec k = config.k, sigma = config.sigma;
  double delta = config.delta;
  if (params.count(name)) {
    params[name] = value;
  } else if (name == "delta") {
    delta = value;
  } else if (name == "sigma") {
    std::fill(sigma.begin(), sigma.end(), value);
  } else if (name == "sigma2") {
    if (value < 0.0) throw DomainError("sigma2 must be >= 0");
    std::fill(sigma.begin(), sigma.end(), std::sqrt(value));
  } else if (name == "k") {
    std::fill(k.begin(), k.end(), value);
  } else {
    throw ConfigError("unknown sweep parameter '" + name + "'");
  }
  return {make_model(config.model, params), CouplingSpec(k, sigma, delta)};
}

Vec cycle_center(const AveragedField& rhs, const Vec& lo, const Vec& hi) {
  const auto set = solve_fixed_points(rhs, lo, hi, 9);
  Vec c(rhs.dim(), 0.0);
  if (set.points.empty()) {
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = 0.5 * (lo[i] + hi[i]);
    return c;
  }
  for (const auto& p : set.points)
    for (std::size_t i = 0; i < c.size(); ++i) c[i] += p.location[i];
  for (double& v : c) v /= static_cast<double>(set.points.size());
  return c;
}

ScenarioResult run_scenario(const ScenarioConfig& c) {
  const auto t0 = Clock::now();
  const ModelSpec model = c.make_model();
  const CouplingSpec coupling = c.coupling();
  OutputDir out(c.output);

  json summary;
  summary["scenario"] = c.output.prefix;
  summary["seed"] = c.run.seed;
  summary["mode"] = to_string(c.run.mode);
  summary["model"] = c.model;
  json cycles = json::array();
  json diag = json::object();
  json timing = json::object();
  const AveragedField rhs(model, coupling, model.has_closed_avg());

  std::optional<MeanTrajectory> particles, reduced;
  if (c.run.mode != RunMode::kReduced) {
    const auto tp = Clock::now();
    SimConfig s = sim_config(c, model, coupling);
    CoeffSeries series;
    std::size_t record = 0;
    EnsembleObserver obs;
    if (c.analysis.hermite)
      obs = [&](const EnsembleState& st) {
        if (record++ % c.analysis.hermite_every != 0) return;
        series.times.push_back(st.t);
        series.sets.push_back(estimate_coeffs(st, coupling, true, c.analysis.hermite_theta,
                                              c.analysis.hermite_degree));
      };
    particles = run_particles(s, "particle run", obs);
    timing["particles_seconds"] = seconds_since(tp);
    auto os = out.open("particles.csv");
    write_csv(*particles, os);
    out.close(os, "particles.csv");
    json pj;
    pj["terminal_mean"] = vec_json(particles->means.back());
    pj["terminal_norm"] = norm(particles->means.back());
    if (c.analysis.hermite) {
      auto cs = out.open("coeffs.csv");
      write_coeff_csv(series, cs);
      out.close(cs, "coeffs.csv");
      const auto st = distance_stats(series, c.analysis.settle_time);
      pj["hermite_mean_distance"] = st.raw;
      pj["hermite_mean_distance_debiased"] = st.debiased;
      pj["hermite_distance_floor"] = st.floor;
      pj["hermite_final_distance"] = l2_distance_to_q0(series.sets.back(), false);
    }
    diag["particles"] = pj;
  }

  if (c.run.mode != RunMode::kParticles) {
    const auto tr = Clock::now();
    const double h = c.run.reduced_dt.value_or(c.run.dt);
    // Align reduced records with the particle records where possible.
    const double spacing = static_cast<double>(c.run.record_every) * c.run.dt;
    const auto every = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(spacing / h)));
    try {
      reduced = integrate(rhs, c.run.m0, h, c.run.t_end, every);
    } catch (const BlowUpError& e) {
      throw BlowUpError(std::string("reduced flow: ") + e.what(), e.time(), e.index());
    }
    timing["reduced_seconds"] = seconds_since(tr);
    auto os = out.open("reduced.csv");
    write_csv(*reduced, os);
    out.close(os, "reduced.csv");
    json rj;
    rj["terminal_mean"] = vec_json(reduced->means.back());
    rj["terminal_norm"] = norm(reduced->means.back());
    rj["closed_form_average"] = rhs.uses_closed_form();
    rj["self_residual"] = reduced_self_residual(rhs, *reduced);
    diag["reduced"] = rj;
  }

  if (particles && reduced) diag["sup_mean_gap"] = sup_mean_gap(*particles, *reduced);

  if (c.analysis.cycle_detection) {
    for (const auto& [source, traj] : {std::pair{"particles", &particles}, std::pair{"reduced", &reduced}}) {
      if (!*traj) continue;
      Vec center;
      if (auto lc = find_cycle(c, rhs, **traj, center)) {
        json j = cycle_json(source, *lc);
        j["center"] = vec_json(center);
        cycles.push_back(j);
      }
    }
  }

  if (!c.analysis.residual_deltas.empty() && c.run.mode != RunMode::kReduced) {
    const auto ts = Clock::now();
    diag["residual_scaling"] = residual_study(c, model, coupling);
    timing["residual_seconds"] = seconds_since(ts);
  }

  json bifurcations = json::array();
  if (c.sweep) {
    const auto ts = Clock::now();
    auto sw = do_sweep(c);
    bifurcations = bifurcations_json(sw.points);
    out.write("bifurcations.json", bifurcations.dump(2) + "\n");
    diag["sweep"] = sw.details;
    timing["sweep_seconds"] = seconds_since(ts);
  }

  summary["cycles"] = cycles;
  summary["bifurcations"] = bifurcations;
  summary["diagnostics"] = diag;
  summary["timing"] = timing;
  return finish(out, summary, t0);
}

ScenarioResult run_sweep(const ScenarioConfig& c) {
  if (!c.sweep) throw ConfigError("[sweep] section required for a sweep");
  const auto t0 = Clock::now();
  OutputDir out(c.output);
  auto sw = do_sweep(c);
  const json bifurcations = bifurcations_json(sw.points);
  out.write("bifurcations.json", bifurcations.dump(2) + "\n");
  json summary;
  summary["scenario"] = c.output.prefix;
  summary["seed"] = c.run.seed;
  summary["mode"] = "sweep";
  summary["model"] = c.model;
  summary["cycles"] = json::array();
  summary["bifurcations"] = bifurcations;
  summary["diagnostics"]["sweep"] = sw.details;
  summary["timing"] = json::object();
  return finish(out, summary, t0);
}

std::string error_json(const std::exception& e) {
  json j;
  std::vector<std::string> messages{e.what()};
  if (const auto* ce = dynamic_cast<const ConfigError*>(&e)) {
    j["error"] = "config";
    messages = ce->messages();
  } else if (const auto* be = dynamic_cast<const BlowUpError*>(&e)) {
    j["error"] = "blow_up";
    j["time"] = be->time();
    j["index"] = be->index();
  } else if (dynamic_cast<const BracketError*>(&e)) {
    j["error"] = "bracket";
  } else if (dynamic_cast<const NumericError*>(&e)) {
    j["error"] = "numeric";
  } else if (dynamic_cast<const DomainError*>(&e)) {
    j["error"] = "domain";
  } else {
    j["error"] = "runtime";
  }
  j["messages"] = messages;
  return j.dump();
}

int exit_code_for(const std::exception& e) {
  return dynamic_cast<const ConfigError*>(&e) ? 2 : 1;
}

}  // namespace mfsim

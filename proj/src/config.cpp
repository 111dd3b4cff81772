#include "mfsim/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "mfsim/errors.hpp"
#include "mfsim/trajectory.hpp"

namespace mfsim {

const char* to_string(RunMode m) {
  switch (m) {
    case RunMode::kParticles: return "particles";
    case RunMode::kReduced: return "reduced";
    case RunMode::kBoth: return "both";
  }
  return "?";
}

const char* to_string(InitKind k) {
  switch (k) {
    case InitKind::kGaussian: return "gaussian";
    case InitKind::kPoint: return "point";
  }
  return "?";
}

const char* to_string(SweepDetector d) {
  switch (d) {
    case SweepDetector::kHopf: return "hopf";
    case SweepDetector::kPitchfork: return "pitchfork";
    case SweepDetector::kSnc: return "snc";
    case SweepDetector::kCyclePresence: return "cycle_presence";
  }
  return "?";
}

ModelSpec ScenarioConfig::make_model() const { return mfsim::make_model(model, model_params); }

CouplingSpec ScenarioConfig::coupling() const { return CouplingSpec(k, sigma, delta); }

namespace {

struct Entry {
  std::string value;
  std::string where;  // "line 7" or "override 'run.N=5'"
};

using Section = std::map<std::string, Entry>;
using Document = std::map<std::string, Section>;

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s = {
      {"model", {"name"}},  // plus the model's own parameters
      {"coupling", {"k", "sigma", "sigma2", "delta"}},
      {"run",
       {"mode", "N", "dt", "t_end", "record_every", "seed", "init", "m0", "record_cov",
        "reduced_dt"}},
      {"analysis",
       {"hermite", "hermite_theta", "hermite_degree", "hermite_every", "cycle_detection",
        "cycle_crossings", "cycle_spread", "cycle_center", "residual_deltas", "settle_time"}},
      {"sweep",
       {"parameter", "detector", "bracket", "values", "branch", "probe", "dt", "t_end",
        "tolerance"}},
      {"output", {"directory", "prefix"}},
  };
  return s;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

void put(Document& doc, const std::string& section, const std::string& key, Entry e,
         std::vector<std::string>& errors, bool replace) {
  auto& sec = doc[section];
  auto it = sec.find(key);
  if (it != sec.end() && !replace) {
    errors.push_back(e.where + ": duplicate key " + section + "." + key + " (first at " +
                     it->second.where + ")");
    return;
  }
  sec[key] = std::move(e);
}

Document tokenize(const std::string& text, const std::vector<std::string>& overrides,
                  std::vector<std::string>& errors) {
  Document doc;
  std::istringstream is(text);
  std::string raw;
  std::string section;
  for (int lineno = 1; std::getline(is, raw); ++lineno) {
    const std::string where = "line " + std::to_string(lineno);
    std::string line = raw.substr(0, raw.find('#'));
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        errors.push_back(where + ": malformed section header '" + line + "'");
        section.clear();
        continue;
      }
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (!schema().count(section)) {
        errors.push_back(where + ": unknown section [" + section + "]");
        section.clear();
        continue;
      }
      doc[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back(where + ": expected 'key = value', got '" + line + "'");
      continue;
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) {
      errors.push_back(where + ": empty key");
      continue;
    }
    if (section.empty()) {
      errors.push_back(where + ": key '" + key + "' outside a known section");
      continue;
    }
    put(doc, section, key, {value, where}, errors, false);
  }
  for (const auto& o : overrides) {
    const std::string where = "override '" + o + "'";
    const auto eq = o.find('=');
    const auto dot = o.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      errors.push_back(where + ": expected section.key=value");
      continue;
    }
    const std::string sec = trim(std::string_view(o).substr(0, dot));
    const std::string key = trim(std::string_view(o).substr(dot + 1, eq - dot - 1));
    if (!schema().count(sec)) {
      errors.push_back(where + ": unknown section [" + sec + "]");
      continue;
    }
    put(doc, sec, key, {trim(std::string_view(o).substr(eq + 1)), where}, errors, true);
  }
  return doc;
}

// Typed access to one section, recording errors instead of throwing.
class Reader {
 public:
  Reader(const Document& doc, std::string section, std::vector<std::string>& errors)
      : section_(std::move(section)), errors_(errors) {
    auto it = doc.find(section_);
    if (it != doc.end()) sec_ = &it->second;
  }

  bool present() const { return sec_ != nullptr; }
  bool has(const std::string& key) const { return sec_ && sec_->count(key); }
  const Entry* entry(const std::string& key) const {
    if (!sec_) return nullptr;
    auto it = sec_->find(key);
    return it == sec_->end() ? nullptr : &it->second;
  }

  void require(const std::string& key) {
    if (!has(key)) errors_.push_back(section_ + "." + key + " required");
  }

  std::optional<double> number(const std::string& key) {
    const Entry* e = entry(key);
    if (!e) return std::nullopt;
    auto v = parse_number(e->value);
    if (!v) mismatch(*e, key, "a finite decimal number");
    return v;
  }

  std::optional<std::uint64_t> integer(const std::string& key) {
    const Entry* e = entry(key);
    if (!e) return std::nullopt;
    auto v = parse_integer(e->value);
    if (!v) mismatch(*e, key, "a non-negative integer");
    return v;
  }

  std::optional<bool> boolean(const std::string& key) {
    const Entry* e = entry(key);
    if (!e) return std::nullopt;
    const std::string& s = e->value;
    if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
    if (s == "false" || s == "no" || s == "off" || s == "0") return false;
    mismatch(*e, key, "true or false");
    return std::nullopt;
  }

  std::optional<Vec> vector(const std::string& key) {
    const Entry* e = entry(key);
    if (!e) return std::nullopt;
    Vec out;
    std::string_view rest = e->value;
    while (true) {
      const auto comma = rest.find(',');
      auto v = parse_number(trim(rest.substr(0, comma)));
      if (!v) {
        mismatch(*e, key, "comma-separated decimal numbers");
        return std::nullopt;
      }
      out.push_back(*v);
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    return out;
  }

  std::optional<std::string> text(const std::string& key) {
    const Entry* e = entry(key);
    if (!e) return std::nullopt;
    if (e->value.empty()) {
      mismatch(*e, key, "a non-empty value");
      return std::nullopt;
    }
    return e->value;
  }

  template <class Enum>
  std::optional<Enum> choice(const std::string& key,
                             const std::vector<std::pair<const char*, Enum>>& options) {
    const Entry* e = entry(key);
    if (!e) return std::nullopt;
    std::string expected;
    for (const auto& [name, value] : options) {
      if (e->value == name) return value;
      expected += (expected.empty() ? "" : ", ") + std::string(name);
    }
    mismatch(*e, key, "one of " + expected);
    return std::nullopt;
  }

  void invalid(const std::string& key, const std::string& what) {
    const Entry* e = entry(key);
    errors_.push_back((e ? e->where + ": " : std::string()) + section_ + "." + key + ": " + what);
  }

  static std::optional<double> parse_number(std::string_view s) {
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
  }

  static std::optional<std::uint64_t> parse_integer(std::string_view s) {
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc() && p == s.data() + s.size()) return v;
    // Exponent notation such as 5e4 is accepted when the value is integral.
    auto d = parse_number(s);
    if (d && *d >= 0.0 && *d < 1.8e19 && std::floor(*d) == *d) return static_cast<std::uint64_t>(*d);
    return std::nullopt;
  }

 private:
  void mismatch(const Entry& e, const std::string& key, const std::string& expected) {
    errors_.push_back(e.where + ": " + section_ + "." + key + ": expected " + expected + ", got '" +
                      e.value + "'");
  }

  std::string section_;
  std::vector<std::string>& errors_;
  const Section* sec_ = nullptr;
};

void check_known_keys(const Document& doc, std::vector<std::string>& errors) {
  for (const auto& [section, entries] : doc) {
    const auto& allowed = schema().at(section);
    for (const auto& [key, e] : entries) {
      if (allowed.count(key)) continue;
      if (section == "model") continue;  // checked against the model's keys
      errors.push_back(e.where + ": unknown key '" + key + "' in [" + section + "]");
    }
  }
}

bool is_coupling_scalar(const std::string& p) {
  return p == "delta" || p == "sigma" || p == "sigma2" || p == "k";
}

}  // namespace

ScenarioConfig parse_config(const std::string& text, const std::vector<std::string>& overrides) {
  std::vector<std::string> errors;
  const Document doc = tokenize(text, overrides, errors);
  check_known_keys(doc, errors);
  ScenarioConfig c;

  // [model]
  std::size_t dim = 0;
  {
    Reader r(doc, "model", errors);
    r.require("name");
    if (auto name = r.text("name")) {
      c.model = *name;
      const auto names = model_names();
      if (std::find(names.begin(), names.end(), c.model) == names.end()) {
        r.invalid("name", "unknown model '" + c.model + "'");
      } else {
        const auto keys = model_param_keys(c.model);
        bool params_ok = true;
        for (const auto& [key, e] : doc.at("model")) {
          if (key == "name") continue;
          if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
            errors.push_back(e.where + ": unknown key '" + key + "' in [model] for " + c.model);
            params_ok = false;
            continue;
          }
          if (auto v = r.number(key)) c.model_params[key] = *v;
          else params_ok = false;
        }
        for (const auto& key : keys) {
          if (c.model == "cucker_smale" && key == "d") continue;
          if (!r.has(key)) {
            r.require(key);
            params_ok = false;
          }
        }
        if (params_ok) {
          try {
            dim = c.make_model().dim();
          } catch (const ConfigError& e) {
            for (const auto& m : e.messages()) errors.push_back("model: " + m);
          }
        }
      }
    }
  }

  // Vectors given as a single number are broadcast to the model dimension.
  auto fit_dim = [&](Reader& r, const std::string& key, Vec v) -> Vec {
    if (dim == 0) return v;
    if (v.size() == 1 && dim > 1) return Vec(dim, v[0]);
    if (v.size() != dim)
      r.invalid(key, "expected " + std::to_string(dim) + " components, got " + std::to_string(v.size()));
    return v;
  };

  // [coupling]
  {
    Reader r(doc, "coupling", errors);
    r.require("k");
    r.require("delta");
    if (auto k = r.vector("k")) c.k = fit_dim(r, "k", *k);
    if (r.has("sigma") && r.has("sigma2")) {
      r.invalid("sigma2", "give either sigma or sigma2, not both");
    } else if (auto s = r.vector("sigma")) {
      c.sigma = fit_dim(r, "sigma", *s);
    } else if (auto s2 = r.vector("sigma2")) {
      c.sigma = fit_dim(r, "sigma2", *s2);
      for (double& v : c.sigma) {
        if (v < 0.0) {
          r.invalid("sigma2", "must be >= 0");
          break;
        }
        v = std::sqrt(v);
      }
    } else if (!r.has("sigma") && !r.has("sigma2")) {
      errors.push_back("coupling.sigma or coupling.sigma2 required");
    }
    if (auto d = r.number("delta")) c.delta = *d;
    if (c.k.size() == c.sigma.size() && !c.k.empty()) {
      try {
        c.coupling();
      } catch (const ConfigError& e) {
        for (const auto& m : e.messages()) errors.push_back("coupling: " + m);
      }
    }
  }

  // [run]
  {
    Reader r(doc, "run", errors);
    if (!r.present()) errors.push_back("[run] section required");
    c.run.mode = r.choice<RunMode>("mode", {{"particles", RunMode::kParticles},
                                            {"reduced", RunMode::kReduced},
                                            {"both", RunMode::kBoth}})
                     .value_or(RunMode::kParticles);
    const bool particles = c.run.mode != RunMode::kReduced;
    if (particles) r.require("N");
    r.require("dt");
    r.require("t_end");
    r.require("m0");
    if (auto n = r.integer("N")) {
      c.run.N = *n;
      if (particles && c.run.N == 0) r.invalid("N", "must be >= 1");
    }
    if (auto v = r.number("dt")) {
      c.run.dt = *v;
      if (!(c.run.dt > 0.0)) r.invalid("dt", "must be > 0");
    }
    if (auto v = r.number("t_end")) {
      c.run.t_end = *v;
      if (c.run.t_end < 0.0) r.invalid("t_end", "must be >= 0");
    }
    if (auto v = r.integer("record_every")) {
      c.run.record_every = *v;
      if (*v == 0) r.invalid("record_every", "must be >= 1");
    }
    if (auto v = r.integer("seed")) c.run.seed = *v;
    c.run.init = r.choice<InitKind>("init", {{"gaussian", InitKind::kGaussian},
                                             {"point", InitKind::kPoint}})
                     .value_or(InitKind::kGaussian);
    if (auto v = r.vector("m0")) c.run.m0 = fit_dim(r, "m0", *v);
    if (auto v = r.boolean("record_cov")) c.run.record_cov = *v;
    if (auto v = r.number("reduced_dt")) {
      c.run.reduced_dt = *v;
      if (!(*v > 0.0)) r.invalid("reduced_dt", "must be > 0");
    }
  }

  // [analysis]
  {
    Reader r(doc, "analysis", errors);
    auto& a = c.analysis;
    if (auto v = r.boolean("hermite")) a.hermite = *v;
    if (auto v = r.number("hermite_theta")) {
      a.hermite_theta = *v;
      if (!(*v > 0.0)) r.invalid("hermite_theta", "must be > 0");
    }
    if (auto v = r.integer("hermite_degree")) {
      a.hermite_degree = static_cast<int>(std::min<std::uint64_t>(*v, 1000));
      if (*v > 12) r.invalid("hermite_degree", "must be <= 12");
    }
    if (auto v = r.integer("hermite_every")) {
      a.hermite_every = *v;
      if (*v == 0) r.invalid("hermite_every", "must be >= 1");
    }
    if (auto v = r.boolean("cycle_detection")) a.cycle_detection = *v;
    if (auto v = r.integer("cycle_crossings")) {
      a.cycle_crossings = *v;
      if (*v < 2) r.invalid("cycle_crossings", "must be >= 2");
    }
    if (auto v = r.number("cycle_spread")) {
      a.cycle_spread = *v;
      if (!(*v > 0.0)) r.invalid("cycle_spread", "must be > 0");
    }
    if (auto v = r.vector("cycle_center")) a.cycle_center = fit_dim(r, "cycle_center", *v);
    if (auto v = r.vector("residual_deltas")) {
      a.residual_deltas = *v;
      for (std::size_t i = 0; i < v->size(); ++i) {
        if (!((*v)[i] > 0.0) || (i > 0 && !((*v)[i] > (*v)[i - 1]))) {
          r.invalid("residual_deltas", "must be positive and strictly increasing");
          break;
        }
      }
    }
    if (auto v = r.number("settle_time")) {
      a.settle_time = *v;
      if (*v < 0.0) r.invalid("settle_time", "must be >= 0");
    }
    if (a.hermite && !c.sigma.empty() &&
        std::any_of(c.sigma.begin(), c.sigma.end(), [](double s) { return !(s > 0.0); }))
      r.invalid("hermite", "the Hermite basis needs sigma > 0 on every axis");
  }

  // [sweep]
  if (doc.count("sweep")) {
    Reader r(doc, "sweep", errors);
    SweepBlock s;
    r.require("parameter");
    r.require("detector");
    if (auto v = r.text("parameter")) s.parameter = *v;
    if (auto v = r.choice<SweepDetector>("detector", {{"hopf", SweepDetector::kHopf},
                                                      {"pitchfork", SweepDetector::kPitchfork},
                                                      {"snc", SweepDetector::kSnc},
                                                      {"cycle_presence", SweepDetector::kCyclePresence}}))
      s.detector = *v;
    if (auto v = r.vector("bracket")) {
      if (v->size() != 2 || !((*v)[0] < (*v)[1])) r.invalid("bracket", "expected lo, hi with lo < hi");
      else s.bracket = std::make_pair((*v)[0], (*v)[1]);
    }
    if (auto v = r.vector("values")) s.values = *v;
    if (auto v = r.text("branch")) {
      s.branch = *v;
      if (s.branch != "principal" && s.branch != "trivial" && s.branch != "nontrivial")
        r.invalid("branch", "expected one of principal, trivial, nontrivial");
    }
    if (auto v = r.vector("probe")) s.probe = fit_dim(r, "probe", *v);
    if (auto v = r.number("dt")) {
      s.dt = *v;
      if (!(*v > 0.0)) r.invalid("dt", "must be > 0");
    }
    if (auto v = r.number("t_end")) {
      s.t_end = *v;
      if (!(*v > 0.0)) r.invalid("t_end", "must be > 0");
    }
    if (auto v = r.number("tolerance")) {
      s.tolerance = *v;
      if (!(*v > 0.0)) r.invalid("tolerance", "must be > 0");
    }
    if (!s.parameter.empty() && !c.model.empty()) {
      const bool model_param = c.model_params.count(s.parameter) > 0;
      if (!model_param && !is_coupling_scalar(s.parameter))
        r.invalid("parameter", "'" + s.parameter + "' is neither a model parameter nor one of delta, sigma, sigma2, k");
    }
    switch (s.detector) {
      case SweepDetector::kHopf:
      case SweepDetector::kPitchfork:
        if (!c.model.empty() && c.model != "fhn")
          r.invalid("detector", std::string(to_string(s.detector)) + " sweeps are defined for the fhn model");
        if (!s.parameter.empty() && s.parameter != "u")
          r.invalid("parameter", std::string(to_string(s.detector)) + " sweeps run over u");
        if (s.detector == SweepDetector::kHopf && !s.bracket && r.has("detector"))
          errors.push_back("sweep.bracket required for the hopf detector");
        break;
      case SweepDetector::kSnc:
        if (!s.bracket) errors.push_back("sweep.bracket required for the snc detector");
        if (dim != 0 && dim < 2) r.invalid("detector", "cycle detection needs d >= 2");
        break;
      case SweepDetector::kCyclePresence:
        if (s.values.empty()) errors.push_back("sweep.values required for the cycle_presence detector");
        break;
    }
    c.sweep = std::move(s);
  }

  // [output]
  {
    Reader r(doc, "output", errors);
    if (auto v = r.text("directory")) c.output.directory = *v;
    if (auto v = r.text("prefix")) {
      c.output.prefix = *v;
      if (v->find('/') != std::string::npos) r.invalid("prefix", "must not contain '/'");
    }
  }

  if (!errors.empty()) throw ConfigError(std::move(errors));
  return c;
}

namespace {

// Shortest representation that reads back to the same double.
std::string num(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, p) : format_double(v);
}

std::string vec(const Vec& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + num(v[i]);
  return out;
}

}  // namespace

std::string print_config(const ScenarioConfig& c) {
  std::ostringstream os;
  os << "[model]\nname = " << c.model << '\n';
  for (const auto& [key, v] : c.model_params) os << key << " = " << num(v) << '\n';

  os << "\n[coupling]\nk = " << vec(c.k) << "\nsigma = " << vec(c.sigma)
     << "\ndelta = " << num(c.delta) << '\n';

  const auto& r = c.run;
  os << "\n[run]\nmode = " << to_string(r.mode) << "\nN = " << r.N << "\ndt = " << num(r.dt)
     << "\nt_end = " << num(r.t_end) << "\nrecord_every = " << r.record_every
     << "\nseed = " << r.seed << "\ninit = " << to_string(r.init) << "\nm0 = " << vec(r.m0)
     << "\nrecord_cov = " << (r.record_cov ? "true" : "false") << '\n';
  if (r.reduced_dt) os << "reduced_dt = " << num(*r.reduced_dt) << '\n';

  const auto& a = c.analysis;
  os << "\n[analysis]\nhermite = " << (a.hermite ? "true" : "false")
     << "\nhermite_theta = " << num(a.hermite_theta) << "\nhermite_degree = " << a.hermite_degree
     << "\nhermite_every = " << a.hermite_every
     << "\ncycle_detection = " << (a.cycle_detection ? "true" : "false")
     << "\ncycle_crossings = " << a.cycle_crossings << "\ncycle_spread = " << num(a.cycle_spread)
     << '\n';
  if (a.cycle_center) os << "cycle_center = " << vec(*a.cycle_center) << '\n';
  if (!a.residual_deltas.empty()) os << "residual_deltas = " << vec(a.residual_deltas) << '\n';
  os << "settle_time = " << num(a.settle_time) << '\n';

  if (c.sweep) {
    const auto& s = *c.sweep;
    os << "\n[sweep]\nparameter = " << s.parameter << "\ndetector = " << to_string(s.detector) << '\n';
    if (s.bracket) os << "bracket = " << num(s.bracket->first) << ", " << num(s.bracket->second) << '\n';
    if (!s.values.empty()) os << "values = " << vec(s.values) << '\n';
    os << "branch = " << s.branch << '\n';
    if (!s.probe.empty()) os << "probe = " << vec(s.probe) << '\n';
    os << "dt = " << num(s.dt) << "\nt_end = " << num(s.t_end) << "\ntolerance = " << num(s.tolerance)
       << '\n';
  }

  os << "\n[output]\ndirectory = " << c.output.directory << "\nprefix = " << c.output.prefix << '\n';
  return os.str();
}

std::string preset_directory() {
  if (const char* env = std::getenv("MFSIM_PRESET_DIR"); env && *env) return env;
#ifdef MFSIM_PRESET_DIR
  return MFSIM_PRESET_DIR;
#else
  return "presets";
#endif
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  std::error_code ec;
  for (const auto& e : std::filesystem::directory_iterator(preset_directory(), ec))
    if (e.path().extension() == ".cfg") names.push_back(e.path().stem().string());
  std::sort(names.begin(), names.end());
  return names;
}

std::string preset_text(const std::string& name) {
  const auto path = std::filesystem::path(preset_directory()) / (name + ".cfg");
  std::ifstream in(path);
  if (!in) throw ConfigError("unknown preset '" + name + "' (looked in " + preset_directory() + ")");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace mfsim

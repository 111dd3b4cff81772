#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mfsim/config.hpp"
#include "mfsim/errors.hpp"

using namespace mfsim;

namespace {

const char* kMinimal = R"(
[model]
name = fhn
u = 1
a = 0.3333333333333333
b = 1
tau = 10

[coupling]
k = 1
sigma2 = 0.2
delta = 0.2

[run]
N = 100
dt = 1e-3
t_end = 1
m0 = -1, -0.5
)";

std::vector<std::string> errors_of(const std::string& text, const std::vector<std::string>& ov = {}) {
  try {
    parse_config(text, ov);
  } catch (const ConfigError& e) {
    return e.messages();
  }
  return {};
}

bool any_contains(const std::vector<std::string>& msgs, const std::string& needle) {
  return std::any_of(msgs.begin(), msgs.end(),
                     [&](const std::string& m) { return m.find(needle) != std::string::npos; });
}

}  // namespace

TEST_CASE("every shipped preset parses and round-trips") {
  const auto names = preset_names();
  CHECK(names.size() >= 4);
  for (const auto& name : names) {
    CAPTURE(name);
    const auto c = parse_config(preset_text(name));
    const auto text = print_config(c);
    CHECK(parse_config(text) == c);
    CHECK(print_config(parse_config(text)) == text);
  }
  CHECK_THROWS_AS(preset_text("no_such_preset"), ConfigError);
}

TEST_CASE("figure presets carry the caption parameters") {
  const auto u02 = parse_config(preset_text("fig_u02"));
  CHECK(u02.model == "fhn");
  CHECK(u02.model_params.at("u") == 1.0);
  CHECK(u02.model_params.at("tau") == 10.0);
  CHECK(u02.delta == 0.2);
  CHECK(u02.sigma[0] * u02.sigma[0] == doctest::Approx(0.2));
  CHECK(u02.run.N == 50000);
  CHECK(u02.run.mode == RunMode::kBoth);

  const auto sl = parse_config(preset_text("fig_SL_cycle"));
  CHECK(sl.model == "stuart_landau_modified");
  CHECK(sl.sigma == Vec{0.3, 0.3});
  CHECK(sl.delta == 0.5);
  const auto pt = parse_config(preset_text("fig_SL_pt_stable"));
  CHECK(pt.sigma == Vec{0.1, 0.1});
  const auto bi = parse_config(preset_text("fig_FHN_bistable"));
  CHECK(bi.model_params.at("b") == 1.45);
  CHECK(bi.model_params.at("a") == 0.0);
}

TEST_CASE("scalars broadcast and sigma2 becomes sigma") {
  const auto c = parse_config(kMinimal);
  CHECK(c.k == Vec{1.0, 1.0});
  CHECK(c.sigma[0] == std::sqrt(0.2));
  CHECK(c.sigma[1] == std::sqrt(0.2));
  CHECK(c.run.record_every == 1);
  CHECK(c.run.init == InitKind::kGaussian);
  CHECK_FALSE(c.sweep.has_value());
  CHECK(c.coupling().varpi()[0] == doctest::Approx(0.2));
}

TEST_CASE("overrides replace values and accept exponent integers") {
  const auto c = parse_config(kMinimal, {"run.N=5e4", "coupling.delta = 0.4", "analysis.hermite=yes"});
  CHECK(c.run.N == 50000);
  CHECK(c.delta == 0.4);
  CHECK(c.analysis.hermite);
  const auto e = errors_of(kMinimal, {"run.N=2.5"});
  REQUIRE(e.size() == 1);
  CHECK(e[0].rfind("override 'run.N=2.5'", 0) == 0);
  CHECK(any_contains(errors_of(kMinimal, {"nodot=1"}), "expected section.key=value"));
}

TEST_CASE("every error is reported with its line") {
  const std::string text = std::string(kMinimal) + "bogus = 1\ndt = 2e-3\n[nowhere]\n";
  const auto e = errors_of(text);
  CHECK(e.size() == 3);
  CHECK(any_contains(e, "line 19: unknown key 'bogus'"));
  CHECK(any_contains(e, "line 20: duplicate key run.dt"));
  CHECK(any_contains(e, "line 21: unknown section [nowhere]"));
}

TEST_CASE("missing and conflicting keys") {
  std::string no_dt = kMinimal;
  no_dt.erase(no_dt.find("dt = 1e-3"), 10);
  CHECK(any_contains(errors_of(no_dt), "run.dt required"));
  CHECK(any_contains(errors_of(kMinimal, {"coupling.sigma=0.1"}), "sigma"));
  CHECK(any_contains(errors_of(kMinimal, {"model.tau=-1"}), "tau"));
  CHECK(any_contains(errors_of(kMinimal, {"run.m0=1,2,3"}), "m0"));
  CHECK(any_contains(errors_of(kMinimal, {"output.prefix=a/b"}), "prefix"));
  CHECK(any_contains(errors_of(kMinimal, {"run.mode=sideways"}), "mode"));
  // A reduced-only run does not need N.
  std::string no_n = kMinimal;
  no_n.erase(no_n.find("N = 100"), 7);
  CHECK_FALSE(errors_of(no_n, {"run.mode=reduced"}).size());
  CHECK(any_contains(errors_of(no_n), "run.N required"));
}

TEST_CASE("sweep blocks are checked against their detector") {
  CHECK(any_contains(errors_of(kMinimal, {"sweep.parameter=u", "sweep.detector=hopf"}), "bracket"));
  CHECK(any_contains(errors_of(kMinimal, {"sweep.parameter=zzz", "sweep.detector=cycle_presence",
                                          "sweep.values=1,2"}),
                     "zzz"));
  const auto c = parse_config(kMinimal, {"sweep.parameter=sigma2", "sweep.detector=cycle_presence",
                                         "sweep.values=0.1,0.2", "sweep.probe=0,0"});
  REQUIRE(c.sweep.has_value());
  CHECK(c.sweep->detector == SweepDetector::kCyclePresence);
  CHECK(c.sweep->values == Vec{0.1, 0.2});
}

TEST_CASE("printing uses shortest round-trip numbers") {
  const auto text = print_config(parse_config(kMinimal));
  CHECK(text.find("tau = 10\n") != std::string::npos);
  CHECK(text.find("dt = 0.001\n") != std::string::npos);
  CHECK(text.find("m0 = -1, -0.5\n") != std::string::npos);
}

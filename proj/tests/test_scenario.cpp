#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <sys/wait.h>

#include <json.hpp>

#include "mfsim/config.hpp"
#include "mfsim/errors.hpp"
#include "mfsim/scenario.hpp"

using namespace mfsim;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("mfsim_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

const char* kCs = R"(
[model]
name = cucker_smale
d = 1
[coupling]
k = 1
sigma2 = 0.2
delta = 1
[run]
mode = reduced
dt = 1e-2
t_end = 200
record_every = 100
m0 = 0.5
[output]
prefix = cs
)";

const char* kFhnSmall = R"(
[model]
name = fhn
u = 1
a = 0.3333333333333333
b = 1
tau = 10
[coupling]
k = 1, 1
sigma2 = 0.2, 0.2
delta = 0.2
[run]
mode = both
N = 500
dt = 1e-2
t_end = 5
record_every = 10
seed = 3
m0 = -1, -0.6666666666666666
[analysis]
hermite = true
hermite_degree = 4
[output]
prefix = small
)";

}  // namespace

TEST_CASE("reduced Cucker-Smale scenario settles on the ordered state") {
  const auto dir = scratch("cs");
  const auto res = run_scenario(parse_config(kCs, {"output.directory=" + dir.string()}));
  const auto s = json::parse(res.summary_json);
  CHECK(s["scenario"] == "cs");
  CHECK(s["mode"] == "reduced");
  CHECK(std::abs(s["diagnostics"]["reduced"]["terminal_norm"].get<double>() - std::sqrt(0.4)) < 1e-4);
  CHECK(s["cycles"].empty());
  CHECK(fs::exists(dir / "cs_reduced.csv"));
  CHECK_FALSE(fs::exists(dir / "cs_particles.csv"));
}

TEST_CASE("manifest lists exactly the files written") {
  const auto dir = scratch("manifest");
  const auto res = run_scenario(parse_config(kFhnSmall, {"output.directory=" + dir.string()}));
  std::set<std::string> listed(res.files.begin(), res.files.end()), on_disk;
  for (const auto& e : fs::directory_iterator(dir)) on_disk.insert(e.path().filename().string());
  CHECK(listed == on_disk);
  CHECK(listed.count("small_particles.csv"));
  CHECK(listed.count("small_reduced.csv"));
  CHECK(listed.count("small_coeffs.csv"));
  CHECK(listed.count("small_summary.json"));
  CHECK(res.files.back() == "small_manifest.json");
  const auto manifest = json::parse(slurp(dir / "small_manifest.json"));
  CHECK(manifest["files"].size() == res.files.size());

  const auto s = json::parse(res.summary_json);
  CHECK(s["seed"] == 3);
  CHECK(s["diagnostics"].contains("sup_mean_gap"));
  CHECK(s["diagnostics"]["particles"].contains("hermite_final_distance"));
  CHECK(s.contains("timing"));
}

TEST_CASE("reruns with the same seed are byte identical") {
  const auto a = scratch("rerun_a"), b = scratch("rerun_b");
  run_scenario(parse_config(kFhnSmall, {"output.directory=" + a.string()}));
  run_scenario(parse_config(kFhnSmall, {"output.directory=" + b.string()}));
  for (const char* f : {"small_particles.csv", "small_reduced.csv", "small_coeffs.csv"})
    CHECK(slurp(a / f) == slurp(b / f));
  const auto c = scratch("rerun_c");
  run_scenario(parse_config(kFhnSmall, {"output.directory=" + c.string(), "run.seed=4"}));
  CHECK(slurp(a / "small_particles.csv") != slurp(c / "small_particles.csv"));
}

TEST_CASE("Hopf sweep from the shipped preset") {
  const auto dir = scratch("sweep");
  const auto res = run_sweep(parse_config(preset_text("sweep_fhn_hopf"), {"output.directory=" + dir.string()}));
  const auto b = json::parse(slurp(dir / "sweep_fhn_hopf_bifurcations.json"));
  REQUIRE(b.size() == 1);
  CHECK(b[0]["kind"] == "hopf");
  CHECK(std::abs(b[0]["value"].get<double>() - 0.88604) < 1e-4);
  CHECK(res.files.back() == "sweep_fhn_hopf_manifest.json");
}

TEST_CASE("pitchfork sweep") {
  const auto dir = scratch("pitchfork");
  run_sweep(parse_config(preset_text("sweep_fhn_pitchfork"), {"output.directory=" + dir.string()}));
  const auto b = json::parse(slurp(dir / "sweep_fhn_pitchfork_bifurcations.json"));
  REQUIRE(b.size() == 1);
  CHECK(b[0]["value"].get<double>() == doctest::Approx(1.0 / 1.45));
}

TEST_CASE("with_parameter replaces one scalar") {
  const auto c = parse_config(kFhnSmall);
  const auto [m, k] = with_parameter(c, "u", 0.5);
  CHECK(m.params.at("u") == 0.5);
  const auto [m2, k2] = with_parameter(c, "sigma2", 0.09);
  CHECK(k2.sigma()[1] == doctest::Approx(0.3));
  CHECK(with_parameter(c, "delta", 0.7).second.delta() == 0.7);
  CHECK_THROWS_AS(with_parameter(c, "nope", 1.0), ConfigError);
}

TEST_CASE("errors map to JSON and exit codes") {
  const auto dir = scratch("blowup");
  const std::string text = std::string(kFhnSmall) + "";
  // A huge start leaves the finite region within a few steps.
  try {
    run_scenario(parse_config(text, {"output.directory=" + dir.string(), "run.m0=1e5,0", "run.mode=particles",
                                     "coupling.delta=1", "coupling.sigma2=0,0", "analysis.hermite=false"}));
    FAIL("expected BlowUpError");
  } catch (const BlowUpError& e) {
    const auto j = json::parse(error_json(e));
    CHECK(j["error"] == "blow_up");
    CHECK(j.contains("time"));
    CHECK(j.contains("index"));
    CHECK(std::string(e.what()).rfind("particle run", 0) == 0);
    CHECK(exit_code_for(e) == 1);
  }
  try {
    parse_config(kFhnSmall, {"run.N=x"});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const auto j = json::parse(error_json(e));
    CHECK(j["error"] == "config");
    CHECK(j["messages"].size() == 1);
    CHECK(exit_code_for(e) == 2);
  }
}

TEST_CASE("command-line front end") {
  const auto dir = scratch("cli");
  const std::string cmd = std::string(MFSIM_CLI_PATH) + " run --config sweep_fhn_pitchfork --out " + dir.string() +
                          " > " + (dir.string() + ".out");
  CHECK(std::system(cmd.c_str()) == 0);
  CHECK(fs::exists(dir / "sweep_fhn_pitchfork_summary.json"));
  const std::string bad = std::string(MFSIM_CLI_PATH) + " validate --config /nonexistent/x.cfg > /dev/null";
  const int rc = std::system(bad.c_str());
  CHECK(WEXITSTATUS(rc) == 2);
}

// mfsim: run, sweep and validate scenario configs.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mfsim/config.hpp"
#include "mfsim/errors.hpp"
#include "mfsim/scenario.hpp"

namespace {

// A path to a config file, or the name of a shipped preset.
std::string load_config_text(const std::string& ref) {
  if (std::filesystem::is_regular_file(ref)) {
    std::ifstream in(ref);
    std::ostringstream os;
    os << in.rdbuf();
    if (!in) throw mfsim::Error("cannot read config '" + ref + "'");
    return os.str();
  }
  return mfsim::preset_text(ref);
}

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;

  mfsim::ScenarioConfig load() const {
    std::vector<std::string> all = overrides;
    if (seed) all.push_back("run.seed=" + std::to_string(*seed));
    if (out) all.push_back("output.directory=" + *out);
    return mfsim::parse_config(load_config_text(config), all);
  }
};

void add_common(CLI::App* cmd, Common& c, bool run_flags) {
  cmd->add_option("--config", c.config, "config file or preset name")->required();
  cmd->add_option("--override", c.overrides, "section.key=value (repeatable)");
  if (run_flags) {
    cmd->add_option("--seed", c.seed, "master seed (overrides run.seed)");
    cmd->add_option("--out", c.out, "output directory (overrides output.directory)");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-field particle simulator, averaged flow and bifurcation tools"};
  app.require_subcommand(1);

  Common run_opts, sweep_opts, validate_opts;
  auto* run_cmd = app.add_subcommand("run", "run a scenario and write its artifacts");
  add_common(run_cmd, run_opts, true);
  auto* sweep_cmd = app.add_subcommand("sweep", "run the [sweep] block of a scenario");
  add_common(sweep_cmd, sweep_opts, true);
  auto* validate_cmd = app.add_subcommand("validate", "parse a config and print it in canonical form");
  add_common(validate_cmd, validate_opts, false);
  auto* presets_cmd = app.add_subcommand("presets", "list shipped presets");
  bool show = false;
  std::string show_name;
  presets_cmd->add_option("name", show_name, "print this preset");
  presets_cmd->add_flag("--show", show, "print every preset");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      const auto res = mfsim::run_scenario(run_opts.load());
      std::cout << res.manifest_json();
    } else if (*sweep_cmd) {
      const auto res = mfsim::run_sweep(sweep_opts.load());
      std::cout << res.manifest_json();
    } else if (*validate_cmd) {
      std::cout << mfsim::print_config(validate_opts.load());
    } else if (*presets_cmd) {
      if (!show_name.empty()) {
        std::cout << mfsim::preset_text(show_name);
      } else {
        for (const auto& name : mfsim::preset_names()) {
          std::cout << name << '\n';
          if (show) std::cout << mfsim::preset_text(name) << '\n';
        }
      }
    }
  } catch (const std::exception& e) {
    std::cout << mfsim::error_json(e) << '\n';
    return mfsim::exit_code_for(e);
  }
  return 0;
}

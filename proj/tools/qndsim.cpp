#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "qnd/cli/scenarios.hpp"

using namespace qnd::cli;

namespace {

int cmd_run(const std::string& scenario, const std::string& config_path, const FlagOverrides& flags) {
  json cfg;
  try {
    cfg = load_config_file(config_path);
  } catch (const qnd::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  }
  const RunResult r = run_scenario(scenario, cfg, flags);
  if (r.exit_code != kExitOk) {
    std::cerr << r.message << "\n";
    return r.exit_code;
  }
  for (const auto& f : r.files) std::cout << f << "\n";
  return kExitOk;
}

int cmd_validate(const std::string& config_path, bool override_bounds) {
  try {
    const json cfg = load_config_file(config_path);
    const auto v = validate_config(cfg, override_bounds);
    if (!v.empty()) {
      std::cerr << "invalid configuration:\n" << format_violations(v);
      return kExitConfig;
    }
    build_protocol(cfg);
  } catch (const qnd::Error& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  }
  std::cout << "ok\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transverse-coupling qubit readout simulator"};
  app.require_subcommand(1);

  std::string scenario, config_path, out_dir, engine;
  std::uint64_t seed = 0;
  bool override_bounds = false;

  auto* run = app.add_subcommand("run", "run a scenario");
  run->add_option("scenario", scenario, "scenario name")->required();
  run->add_option("--config", config_path, "JSON config file")->required();
  auto* out_opt = run->add_option("--out", out_dir, "output directory");
  auto* seed_opt = run->add_option("--seed", seed, "random seed");
  auto* engine_opt = run->add_option("--engine", engine, "simulation engine")->check(CLI::IsMember({"exact", "moments"}));
  run->add_flag("--override-bounds", override_bounds, "allow physical values outside the search box");

  auto* validate = app.add_subcommand("validate", "check a config file");
  validate->add_option("--config", config_path, "JSON config file")->required();
  validate->add_flag("--override-bounds", override_bounds, "allow physical values outside the search box");

  app.add_subcommand("list-scenarios", "list built-in scenarios");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (*run) {
    FlagOverrides flags;
    if (*out_opt) flags.output_dir = out_dir;
    if (*seed_opt) flags.seed = seed;
    if (*engine_opt) flags.engine = engine;
    flags.override_bounds = override_bounds;
    return cmd_run(scenario, config_path, flags);
  }
  if (*validate) return cmd_validate(config_path, override_bounds);
  for (const auto& s : scenarios()) std::printf("%-20s %s\n", s.name.c_str(), s.description.c_str());
  return kExitOk;
}

// fiolab: run bundled scenarios.
//
//   fiolab run <scenario> [--out-dir DIR] [--threads N] [--override section.key=value]...
//   fiolab list-scenarios [--dir DIR]
//
// Exit codes: 0 every check passed, 1 a numeric check failed, 2 configuration
// error, 3 internal error.

#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "fiolab/cli.hpp"

namespace fs = std::filesystem;
using namespace fiolab::cli;

#ifndef FIOLAB_SCENARIO_DIR
#define FIOLAB_SCENARIO_DIR "scenarios"
#endif

namespace {

// A bare name is looked up in the scenario directory.
fs::path resolve(const std::string& arg, const fs::path& dir) {
  fs::path p(arg);
  if (fs::exists(p)) return p;
  for (const fs::path& cand : {dir / p, dir / (arg + ".cfg")})
    if (fs::exists(cand)) return cand;
  throw ConfigError("no scenario file '" + arg + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fourier integral operator lab"};
  app.require_subcommand(1);
  fs::path scenario_dir = FIOLAB_SCENARIO_DIR;
  app.add_option("--scenario-dir", scenario_dir, "Where bare scenario names are looked up");

  auto* run = app.add_subcommand("run", "Run one scenario");
  std::string scenario;
  RunOptions opts;
  std::vector<std::string> overrides;
  run->add_option("scenario", scenario, "Scenario file or bundled name")->required();
  run->add_option("--out-dir", opts.out_dir, "Output root; results go to <out-dir>/<name>/");
  run->add_option("--threads", opts.threads, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
  run->add_option("--override", overrides, "section.key=value, applied after loading");

  auto* list = app.add_subcommand("list-scenarios", "List bundled scenarios");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*list) {
      for (const auto& p : list_scenarios(scenario_dir)) {
        std::string desc;
        try {
          auto c = Config::load(p);
          if (c.has_section("scenario")) {
            const auto& e = c.section("scenario").entries;
            if (auto it = e.find("description"); it != e.end()) desc = it->second.value;
          }
        } catch (const ConfigError&) {
          desc = "(unreadable)";
        }
        std::cout << p.stem().string() << (desc.empty() ? "" : "  " + desc) << '\n';
      }
      return 0;
    }
    auto config = Config::load(resolve(scenario, scenario_dir));
    for (const auto& o : overrides) config.override_value(o);
    const auto res = run_scenario(config, opts);
    for (const auto& op : res.manifest["operations"])
      std::cout << (op["pass"].get<bool>() ? "PASS " : "FAIL ") << op["operation"].get<std::string>() << '\n';
    std::cout << "scenario " << res.manifest["scenario"].get<std::string>() << " hash "
              << res.manifest["scenario_hash"].get<std::string>() << " -> " << res.dir.string() << '\n';
    return res.exit_code;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 3;
  }
}

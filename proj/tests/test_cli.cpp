#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fiolab/cli.hpp"

using namespace fiolab::cli;
namespace fs = std::filesystem;

namespace {

const char* kSmall = R"([scenario]
name = small_identity
operations = build-operator, spectrum   # trailing comment

[phase]
S = x*t

[symbol.a]
expr = 1

[grid]
points = 64
radius = 4

[build-operator]
reference = identity
)";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("fiolab_cli_" + name);
  fs::remove_all(p);
  return p;
}

// Runs the scenario text and returns the ConfigError, failing if none is thrown.
ConfigError config_error(const std::string& text) {
  try {
    run_scenario(Config::parse(text), RunOptions{scratch("err"), 1});
  } catch (const ConfigError& e) {
    return e;
  }
  FAIL("no ConfigError");
  return ConfigError("unreachable");
}

}  // namespace

TEST_CASE("config parsing keeps line and column") {
  auto c = Config::parse(kSmall);
  CHECK(c.section("scenario").entries.at("operations").value == "build-operator, spectrum");
  CHECK(c.section("grid").entries.at("radius").line == 13);
  CHECK(c.section("grid").entries.at("radius").column == 10);
  CHECK(c.section_names().size() == 5);

  SUBCASE("missing equals sign") {
    try {
      Config::parse("[a]\nkey value\n");
      FAIL("parsed");
    } catch (const ConfigError& e) {
      CHECK(e.line() == 2);
      CHECK(e.column() == 1);
    }
  }
  SUBCASE("unterminated header") {
    try {
      Config::parse("[a]\nk = 1\n  [b\n");
      FAIL("parsed");
    } catch (const ConfigError& e) {
      CHECK(e.line() == 3);
      CHECK(e.column() == 3);
    }
  }
  SUBCASE("duplicates and orphans") {
    CHECK_THROWS_AS(Config::parse("[a]\nk = 1\nk = 2\n"), ConfigError);
    CHECK_THROWS_AS(Config::parse("[a]\n[a]\n"), ConfigError);
    CHECK_THROWS_AS(Config::parse("k = 1\n"), ConfigError);
  }
}

TEST_CASE("overrides and hashing") {
  auto c = Config::parse(kSmall);
  const auto h0 = c.hash();
  CHECK(h0.size() == 16);
  CHECK(Config::parse(std::string("# header comment\n") + kSmall).hash() == h0);
  c.override_value("grid.points=128");
  CHECK(c.section("grid").entries.at("points").value == "128");
  CHECK(c.hash() != h0);
  c.override_value("symbol.a.expr=2");
  CHECK(c.section("symbol.a").entries.at("expr").value == "2");
  CHECK_THROWS_AS(c.override_value("points=3"), ConfigError);
  CHECK_THROWS_AS(c.override_value("grid.points"), ConfigError);
}

TEST_CASE("validation errors point at the entry") {
  SUBCASE("undefined symbol") {
    const auto e = config_error(std::string(kSmall) + "[spectrum]\nsymbol = b\n");
    CHECK(std::string(e.what()).find("undefined symbol 'b'") != std::string::npos);
    CHECK(e.line() == 18);
  }
  SUBCASE("expression does not parse") {
    std::string text = kSmall;
    text.replace(text.find("S = x*t"), 7, "S = x*(t");
    const auto e = config_error(text);
    CHECK(e.line() == 6);
  }
  SUBCASE("unknown weight tag") {
    const auto e = config_error(std::string(kSmall) + "[symbol.w]\nexpr = 1\nweight = banana:3\n");
    CHECK(e.line() == 19);
  }
  SUBCASE("unknown key, section and operation") {
    CHECK(config_error(std::string(kSmall) + "[spectrum]\ntoll = 1\n").line() == 18);
    CHECK(std::string(config_error(std::string(kSmall) + "[compactness]\n").what()).find("not in the operation list") !=
          std::string::npos);
    std::string text = kSmall;
    text.replace(text.find("spectrum   #"), 8, "spectrom");
    CHECK(std::string(config_error(text).what()).find("unknown operation 'spectrom'") != std::string::npos);
  }
  SUBCASE("non-numeric grid") {
    std::string text = kSmall;
    text.replace(text.find("points = 64"), 11, "points = many");
    const auto e = config_error(text);
    CHECK(e.line() == 12);
    CHECK(e.column() == 10);
  }
}

TEST_CASE("a run writes tagged, repeatable outputs") {
  const auto out = scratch("run");
  const auto c = Config::parse(kSmall, "small.cfg");
  const auto r1 = run_scenario(c, RunOptions{out, 1});
  CHECK(r1.exit_code == 0);
  CHECK(r1.manifest["pass"] == true);
  CHECK(r1.manifest["scenario_hash"] == c.hash());
  REQUIRE(r1.files.back().filename() == "manifest.json");
  std::map<fs::path, std::string> first;
  for (const auto& f : r1.files) {
    first[f] = slurp(f);
    if (f.extension() == ".json") CHECK(first[f].find(c.hash()) != std::string::npos);
  }
  CHECK(fs::exists(out / "small_identity" / "timing.json"));
  CHECK(slurp(out / "small_identity" / "singular_values.csv").rfind("index,singular_value\n", 0) == 0);

  const auto r2 = run_scenario(c, RunOptions{out, 1});
  REQUIRE(r2.files.size() == r1.files.size());
  for (const auto& f : r2.files) CHECK(slurp(f) == first[f]);
}

TEST_CASE("failed checks give exit code 1") {
  std::string text = kSmall;
  text += "tolerance = 1e-30\n";
  const auto r = run_scenario(Config::parse(text), RunOptions{scratch("fail"), 1});
  CHECK(r.exit_code == 1);
  CHECK(r.manifest["operations"][0]["pass"] == false);
}

TEST_CASE("csv writer") {
  const auto p = scratch("csv.csv");
  write_csv(p, {"sigma", "residual"}, {{16, 0.1}, {32, 1e-300}});
  CHECK(slurp(p) == "sigma,residual\n16.0,0.1\n32.0,1e-300\n");
}

#pragma once

// Scenario runner behind the `fiolab` executable.
//
// A scenario is a flat text file of named sections with key = value entries:
//
//   [scenario]
//   name = fourier_inversion
//   operations = build-operator, spectrum
//   [phase]
//   S = x*t
//   [symbol.a]
//   expr = 1
//
// Every operation writes <out>/<name>/<operation>.json (plus CSV tables where
// there is something to plot), and the run ends with manifest.json. Timing
// goes to a separate timing.json so the rest stays byte-identical between runs.

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fiolab/operators.hpp"
#include "fiolab/phases.hpp"
#include "fiolab/symbols.hpp"
#include "json.hpp"

namespace fiolab::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Parse or validation failure; exit code 2.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line = 0, int column = 0);
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_, column_;
};

class Config {
 public:
  struct Entry {
    std::string value;
    int line = 0, column = 0;
  };
  struct Section {
    std::string name;
    int line = 0;
    std::map<std::string, Entry> entries;
  };

  static Config parse(std::string_view text, const std::string& source = "<string>");
  static Config load(const std::filesystem::path& path);

  /// `section.key=value`; the section is everything before the last dot.
  void override_value(const std::string& spec);

  const std::string& source() const noexcept { return source_; }
  bool has_section(const std::string& name) const;
  const Section& section(const std::string& name) const;
  std::vector<std::string> section_names() const;

  /// Sections and entries in sorted order, one `section.key=value` per line.
  std::string canonical() const;
  /// FNV-1a of canonical().
  std::string hash() const;

 private:
  std::string source_;
  std::map<std::string, Section> sections_;
};

struct RunOptions {
  std::filesystem::path out_dir = "results";
  int threads = 0;  // 0: hardware concurrency
};

struct RunResult {
  int exit_code = 0;  // 0 pass, 1 failed check
  std::filesystem::path dir;
  nlohmann::json manifest;
  std::vector<std::filesystem::path> files;  // everything written, manifest last
};

/// Validates the whole scenario before running anything (throws ConfigError),
/// then runs the operations in order. Module errors are rethrown as
/// std::runtime_error with the scenario and operation named.
RunResult run_scenario(const Config& config, const RunOptions& options);

/// The mathematical content of a validated scenario, for tools that rebuild
/// its objects outside run_scenario.
struct ScenarioParts {
  std::string name;
  int n = 1;
  std::optional<GeneratingFunction> S;
  std::map<std::string, SymbolField> symbols;
  std::map<std::string, std::string> symbol_space;  // phase, fio or y
  int points = 256;
  double radius = 8.0;
  double x_fraction = 1.0;
  Route route = Route::Spectral;
};
ScenarioParts scenario_parts(const Config& config);

/// *.cfg files in `dir`, sorted by name.
std::vector<std::filesystem::path> list_scenarios(const std::filesystem::path& dir);

/// CSV with a header line; values in shortest round-trip form.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

}  // namespace fiolab::cli

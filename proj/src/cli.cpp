#include "fiolab/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "fiolab/operators.hpp"
#include "fiolab/oscillatory.hpp"
#include "fiolab/parallel.hpp"
#include "fiolab/pdo_check.hpp"
#include "fiolab/phases.hpp"
#include "fiolab/symbols.hpp"
#include "fiolab/weights.hpp"

namespace fiolab::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

ConfigError::ConfigError(const std::string& what, int line, int column)
    : std::runtime_error(line > 0 ? what + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")"
                                  : what),
      line_(line),
      column_(column) {}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool name_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.'; }

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    auto t = trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------- Config

Config Config::parse(std::string_view text, const std::string& source) {
  Config c;
  c.source_ = source;
  Section* current = nullptr;
  int lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++lineno;
    std::string line(raw);
    // Comments: a line starting with # or ;, or " #" after an entry.
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#' || line[first] == ';') continue;
    if (auto h = line.find(" #"); h != std::string::npos) line.resize(h);
    const int col = static_cast<int>(first) + 1;
    if (line[first] == '[') {
      const auto close = line.find(']', first);
      if (close == std::string::npos) throw ConfigError("unterminated section header", lineno, col);
      if (!trim(line.substr(close + 1)).empty())
        throw ConfigError("text after section header", lineno, static_cast<int>(close) + 2);
      const std::string name = trim(line.substr(first + 1, close - first - 1));
      if (name.empty() || !std::all_of(name.begin(), name.end(), name_char))
        throw ConfigError("bad section name '" + name + "'", lineno, col + 1);
      if (c.sections_.count(name)) throw ConfigError("duplicate section [" + name + "]", lineno, col);
      current = &c.sections_[name];
      current->name = name;
      current->line = lineno;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value", lineno, col);
    if (!current) throw ConfigError("entry before the first section", lineno, col);
    const std::string key = trim(line.substr(0, eq));
    if (key.empty() || !std::all_of(key.begin(), key.end(), name_char))
      throw ConfigError("bad key '" + key + "'", lineno, col);
    if (current->entries.count(key))
      throw ConfigError("duplicate key '" + key + "' in [" + current->name + "]", lineno, col);
    const std::string value = trim(line.substr(eq + 1));
    const auto vcol = line.find_first_not_of(" \t", eq + 1);
    current->entries[key] = Entry{value, lineno, vcol == std::string::npos ? static_cast<int>(eq) + 2
                                                                           : static_cast<int>(vcol) + 1};
  }
  return c;
}

Config Config::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read scenario file " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return parse(s.str(), path.string());
}

void Config::override_value(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + spec + "' is not key=value");
  const std::string path = trim(spec.substr(0, eq)), value = trim(spec.substr(eq + 1));
  const auto dot = path.rfind('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == path.size())
    throw ConfigError("override '" + spec + "' needs section.key");
  const std::string sec = path.substr(0, dot), key = path.substr(dot + 1);
  if (!std::all_of(sec.begin(), sec.end(), name_char) || !std::all_of(key.begin(), key.end(), name_char))
    throw ConfigError("bad override name '" + path + "'");
  auto& s = sections_[sec];
  s.name = sec;
  s.entries[key] = Entry{value, 0, 0};
}

bool Config::has_section(const std::string& name) const { return sections_.count(name) > 0; }

const Config::Section& Config::section(const std::string& name) const {
  auto it = sections_.find(name);
  if (it == sections_.end()) throw ConfigError("missing section [" + name + "]");
  return it->second;
}

std::vector<std::string> Config::section_names() const {
  std::vector<std::string> v;
  for (const auto& [k, s] : sections_) v.push_back(k);
  return v;
}

std::string Config::canonical() const {
  std::ostringstream o;
  for (const auto& [name, s] : sections_)
    for (const auto& [k, e] : s.entries) o << name << '.' << k << '=' << e.value << '\n';
  return o.str();
}

std::string Config::hash() const { return fnv1a_hex(canonical()); }

// ---------------------------------------------------------------- validation helpers

namespace {

// Typed access to one section; every key must be consumed by the time
// finish() runs, so typos surface as validation errors.
class Reader {
 public:
  Reader(const Config& c, const std::string& name) : name_(name) {
    if (c.has_section(name)) s_ = &c.section(name);
  }
  bool present() const { return s_ != nullptr; }

  std::optional<std::string> raw(const std::string& key) {
    used_.insert(key);
    if (!s_) return std::nullopt;
    auto it = s_->entries.find(key);
    if (it == s_->entries.end()) return std::nullopt;
    return it->second.value;
  }
  std::string str(const std::string& key, const std::string& def) { return raw(key).value_or(def); }
  std::string required(const std::string& key) {
    auto v = raw(key);
    if (!v || v->empty()) throw ConfigError("[" + name_ + "] needs '" + key + "'", s_ ? s_->line : 0, 1);
    return *v;
  }
  double num(const std::string& key, double def) {
    auto v = raw(key);
    return v ? to_double(key, *v) : def;
  }
  double positive(const std::string& key, double def) {
    const double v = num(key, def);
    if (!(v > 0)) fail(key, "must be positive");
    return v;
  }
  int integer(const std::string& key, int def) {
    auto v = raw(key);
    if (!v) return def;
    const double d = to_double(key, *v);
    if (d != std::floor(d) || std::abs(d) > 1e9) fail(key, "must be an integer");
    return static_cast<int>(d);
  }
  bool flag(const std::string& key, bool def) {
    auto v = raw(key);
    if (!v) return def;
    if (*v == "true" || *v == "yes" || *v == "1") return true;
    if (*v == "false" || *v == "no" || *v == "0") return false;
    fail(key, "must be true or false");
    return def;
  }
  std::vector<double> nums(const std::string& key, std::vector<double> def) {
    auto v = raw(key);
    if (!v) return def;
    std::vector<double> out;
    for (const auto& s : split(*v, ',')) out.push_back(to_double(key, s));
    if (out.empty()) fail(key, "is empty");
    return out;
  }
  std::vector<std::string> list(const std::string& key, std::vector<std::string> def) {
    auto v = raw(key);
    return v ? split(*v, ',') : def;
  }
  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    int line = s_ ? s_->line : 0, col = 1;
    if (s_) {
      auto it = s_->entries.find(key);
      if (it != s_->entries.end()) {
        line = it->second.line;
        col = it->second.column;
      }
    }
    throw ConfigError("[" + name_ + "] " + key + " " + what, line, col);
  }
  void finish() const {
    if (!s_) return;
    for (const auto& [k, e] : s_->entries)
      if (!used_.count(k)) throw ConfigError("unknown key '" + k + "' in [" + name_ + "]", e.line, 1);
  }
  const std::string& name() const { return name_; }

 private:
  double to_double(const std::string& key, const std::string& v) const {
    try {
      std::size_t used = 0;
      const double d = std::stod(v, &used);
      if (trim(v.substr(used)).empty() && std::isfinite(d)) return d;
    } catch (const std::exception&) {
    }
    fail(key, "is not a number: '" + v + "'");
  }
  std::string name_;
  const Config::Section* s_ = nullptr;
  std::set<std::string> used_;
};

// Expression parse errors become config errors at the entry.
template <class F>
auto parse_in(Reader& r, const std::string& key, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ParseError& e) {
    r.fail(key, std::string("does not parse: ") + e.what());
  } catch (const WeightError& e) {
    r.fail(key, std::string("bad weight: ") + e.what());
  } catch (const std::invalid_argument& e) {
    r.fail(key, e.what());
  }
}

Eigen::MatrixXd parse_matrix(Reader& r, const std::string& key, int n) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  auto v = r.raw(key);
  if (!v) return m;
  auto rows = split(*v, ';');
  if (static_cast<int>(rows.size()) != n) r.fail(key, "needs " + std::to_string(n) + " rows separated by ';'");
  for (int i = 0; i < n; ++i) {
    auto cols = split(rows[static_cast<std::size_t>(i)], ',');
    if (static_cast<int>(cols.size()) != n) r.fail(key, "row " + std::to_string(i + 1) + " has the wrong length");
    for (int j = 0; j < n; ++j) {
      try {
        m(i, j) = std::stod(cols[static_cast<std::size_t>(j)]);
      } catch (const std::exception&) {
        r.fail(key, "has a non-numeric entry");
      }
    }
  }
  return m;
}

// ---------------------------------------------------------------- scenario model

struct SymbolDef {
  std::string name, expr, weight, space;
  double rho = 0.0;
  std::shared_ptr<SymbolField> field;
};

struct GridDef {
  int points = 256;
  double radius = 8.0;
  double x_fraction = 1.0;
  Route route = Route::Spectral;
};

struct Scenario {
  std::string name, description, hash;
  int n = 1;
  LambdaConvention conv = LambdaConvention::SqrtSumSquares;
  std::vector<std::string> operations;
  std::optional<GeneratingFunction> S;
  std::map<std::string, SymbolDef> symbols;
  GridDef grid;
  // Parsed parameters per operation, as readers that have been validated.
  std::map<std::string, std::function<json(const fs::path&, std::vector<fs::path>&, bool&)>> ops;
};

const std::set<std::string> kOperations{"verify-symbol", "verify-phase", "oscint",     "build-operator",
                                        "check-ffstar",  "spectrum",     "cv-check", "compactness"};

VariableTable space_vars(const std::string& space, int n) {
  if (space == "phase") return VariableTable::phase_space(n);
  if (space == "fio") return VariableTable::fio_space(n, n);
  if (space == "y") return VariableTable::y_space(n);
  throw ConfigError("unknown symbol space '" + space + "'");
}

const SymbolField& symbol_ref(const Scenario& sc, Reader& r, const std::string& key, const std::string& space = "phase",
                              const std::string& def = "") {
  const std::string name = def.empty() ? r.required(key) : r.str(key, def);
  auto it = sc.symbols.find(name);
  if (it == sc.symbols.end()) r.fail(key, "refers to undefined symbol '" + name + "'");
  if (it->second.space != space)
    r.fail(key, "symbol '" + name + "' is over the " + it->second.space + " space, expected " + space);
  return *it->second.field;
}

const GeneratingFunction& need_S(const Scenario& sc, Reader& r) {
  if (!sc.S) throw ConfigError("operation [" + r.name() + "] needs a generating function in [phase]");
  return *sc.S;
}

GridSpec y_grid(int n, int M, double R) { return GridSpec{n, R, M, true}; }

DiscreteOperator build(const GeneratingFunction& S, const SymbolField& a, int n, int M, double R, double x_fraction,
                       Route route) {
  const GridSpec y = y_grid(n, M, R);
  const GridSpec x = x_fraction == 1.0 ? y : GridSpec{n, R * x_fraction, M, false};
  return discretize_fio(S, a, x, y, y.dual(), route);
}

// sup |a| over the operator's (x, theta) nodes.
double grid_sup(const SymbolField& a, const GridSpec& x, const GridSpec& t) {
  double s = 0.0;
  const int n = x.dim;
  std::vector<double> p(static_cast<std::size_t>(2 * n));
  for (std::size_t i = 0; i < x.total(); ++i) {
    x.coords(i, p.data());
    for (std::size_t k = 0; k < t.total(); ++k) {
      t.coords(k, p.data() + n);
      s = std::max(s, std::abs(a(p)));
    }
  }
  return s;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

HypothesisGrid hypothesis_grid(Reader& r, int default_points) {
  HypothesisGrid g;
  g.radii = r.nums("radii", g.radii);
  g.points = r.integer("points", default_points);
  if (g.points < 1 || g.points % 2 == 0) r.fail("points", "must be odd and positive");
  g.cap = r.positive("cap", g.cap);
  g.floor = r.positive("floor", g.floor);
  g.growth_tolerance = r.positive("growth_tolerance", g.growth_tolerance);
  for (double R : g.radii)
    if (!(R > 0)) r.fail("radii", "must be positive");
  return g;
}

// ---------------------------------------------------------------- operations

using OpFn = std::function<json(const fs::path&, std::vector<fs::path>&, bool&)>;

OpFn make_verify_phase(const Scenario& sc, const Config& c) {
  Reader r(c, "verify-phase");
  const auto& S = need_S(sc, r);
  auto grid = hypothesis_grid(r, sc.n == 1 ? 25 : 9);
  const int max_order = r.integer("max_order", 3);
  const double eps0 = r.positive("eps0", kDefaultOmegaEps0);
  const int samples = r.integer("samples", 4000);
  const int pairs = r.integer("pairs", 400);
  const auto all = std::vector<std::string>{"G1", "G2", "G3", "H1", "H2", "H3", "H3star", "separation", "lambda_equivalence"};
  auto checks = r.list("checks", all);
  auto expect_fail = r.list("expect_fail", {});
  for (const auto& k : checks)
    if (std::find(all.begin(), all.end(), k) == all.end()) r.fail("checks", "has unknown check '" + k + "'");
  for (const auto& k : expect_fail)
    if (std::find(checks.begin(), checks.end(), k) == checks.end())
      r.fail("expect_fail", "names '" + k + "' which is not among the checks");
  r.finish();
  const int n = sc.n;
  return [=](const fs::path&, std::vector<fs::path>&, bool& pass) {
    json reports = json::object();
    const auto phi = special_phase(S);
    const double Rmax = grid.radii.back();
    for (const auto& k : checks) {
      HypothesisReport rep;
      if (k == "G1") rep = verify_G1(S, grid);
      else if (k == "H1") rep = verify_H1(phi, grid);
      else if (k == "G2") rep = verify_G2(S, grid);
      else if (k == "G3") rep = verify_G3(S, grid, max_order);
      else if (k == "H2") rep = verify_H2(phi, grid, max_order);
      else if (k == "H3") rep = verify_H3(phi, grid);
      else if (k == "H3star") rep = verify_H3star(phi, grid);
      else if (k == "lambda_equivalence") rep = lambda_equivalence(S, eps0, grid, samples);
      else {
        std::mt19937_64 rng(0x5e9);
        std::uniform_real_distribution<double> u(-Rmax, Rmax);
        std::vector<SeparationSample> ps;
        for (int i = 0; i < pairs; ++i) {
          SeparationSample s;
          for (int d = 0; d < n; ++d) s.x.push_back(u(rng));
          for (int d = 0; d < n; ++d) s.x_prime.push_back(u(rng));
          for (int d = 0; d < n; ++d) s.theta.push_back(u(rng));
          ps.push_back(std::move(s));
        }
        rep = verify_separation(S, ps, grid.cap);
      }
      const bool want_fail = std::find(expect_fail.begin(), expect_fail.end(), k) != expect_fail.end();
      const bool ok = want_fail ? (!rep.pass && rep.witness.has_value()) : rep.pass;
      pass = pass && ok;
      json j = rep;
      j["expected"] = want_fail ? "fail" : "pass";
      j["as_expected"] = ok;
      reports[k] = j;
    }
    return json{{"reports", reports}, {"grid", {{"radii", grid.radii}, {"points", grid.points}}}};
  };
}

OpFn make_verify_symbol(const Scenario& sc, const Config& c) {
  Reader r(c, "verify-symbol");
  std::vector<std::string> names;
  for (const auto& [k, s] : sc.symbols)
    if (s.space == "phase") names.push_back(k);
  names = r.list("symbols", names);
  for (const auto& s : names)
    if (!sc.symbols.count(s)) r.fail("symbols", "refers to undefined symbol '" + s + "'");
  const int order = r.integer("order", 2);
  const double radius = r.positive("radius", 8.0);
  const int points = r.integer("points", sc.n == 1 ? 41 : 9);
  if (points < 3 || points % 2 == 0) r.fail("points", "must be odd and at least 3");
  const bool derivative = r.flag("derivative", true);
  const bool product = r.flag("product", names.size() >= 2);
  std::optional<std::string> recip;
  if (auto v = r.raw("reciprocal")) {
    if (!sc.symbols.count(*v)) r.fail("reciprocal", "refers to undefined symbol '" + *v + "'");
    recip = *v;
  }
  const double C0 = r.positive("reciprocal_C0", 1.0);
  const double mu = r.num("reciprocal_mu", 0.0);
  const std::string expect = r.str("reciprocal_expect", "ok");
  if (expect != "ok" && expect != "violation") r.fail("reciprocal_expect", "must be ok or violation");
  r.finish();
  std::vector<std::pair<std::string, SymbolField>> fields;
  for (const auto& s : names) fields.emplace_back(s, *sc.symbols.at(s).field);
  std::optional<SymbolField> rsym;
  if (recip) rsym = *sc.symbols.at(*recip).field;

  return [=](const fs::path& dir, std::vector<fs::path>& files, bool& pass) {
    const int dim = fields.empty() ? 2 * sc.n : fields.front().second.dim();
    auto grids = std::vector<SampleGrid>{SampleGrid{dim, radius, points}, SampleGrid{dim, radius, 2 * points - 1},
                                         SampleGrid{dim, radius, 4 * points - 3}};
    // Finite on every grid and nondecreasing under nested refinement.
    auto suite = [&](const SymbolField& a, int k, std::vector<std::vector<double>>& rows) {
      json out = json::array();
      bool ok = true;
      const auto space = jet_space(a.dim(), std::min(k, a.max_order()));
      for (std::size_t i = 0; i < space->size(); ++i) {
        auto e = space->exponent(i);
        MultiIndex alpha(e.begin(), e.end());
        std::vector<double> est;
        for (const auto& g : grids) est.push_back(seminorm_estimate(a, alpha, g));
        bool finite = std::all_of(est.begin(), est.end(), [](double v) { return std::isfinite(v); });
        bool mono = est[1] >= est[0] && est[2] >= est[1];
        ok = ok && finite && mono;
        out.push_back({{"alpha", alpha}, {"estimates", est}, {"finite", finite}, {"monotone", mono}});
        rows.push_back({static_cast<double>(rows.size()), est[0], est[2]});
      }
      return std::pair<json, bool>{out, ok};
    };
    json res = json::object();
    json sym = json::object();
    for (const auto& [nm, a] : fields) {
      std::vector<std::vector<double>> rows;
      auto [tab, ok] = suite(a, order, rows);
      sym[nm] = {{"seminorms", tab}, {"pass", ok}, {"weight", a.weight().tag()}, {"rho", a.rho()}};
      pass = pass && ok;
      const auto csv = dir / ("seminorms_" + nm + ".csv");
      write_csv(csv, {"term_index", "estimate_coarse", "estimate_fine"}, rows);
      files.push_back(csv);
    }
    res["symbols"] = sym;
    if (derivative) {
      json d = json::object();
      for (const auto& [nm, a] : fields) {
        MultiIndex e1(static_cast<std::size_t>(a.dim()), 0);
        e1[0] = 1;
        auto da = derivative_symbol(a, e1);
        std::vector<std::vector<double>> rows;
        auto [tab, ok] = suite(da, std::max(0, order - 1), rows);
        d[nm] = {{"alpha", e1}, {"seminorms", tab}, {"pass", ok}, {"weight", da.weight().tag()}};
        pass = pass && ok;
      }
      res["derivative"] = d;
    }
    if (product && fields.size() >= 2) {
      const auto& [n1, a] = fields[0];
      const auto& [n2, b] = fields[1];
      auto ab = product_symbol(a, b);
      std::vector<std::vector<double>> rows;
      auto [tab, ok] = suite(ab, order, rows);
      const MultiIndex zero(static_cast<std::size_t>(a.dim()), 0);
      const double lhs = seminorm_estimate(ab, zero, grids[1]);
      const double rhs = seminorm_estimate(a, zero, grids[1]) * seminorm_estimate(b, zero, grids[1]);
      const bool bounded = lhs <= rhs * (1 + 1e-12);
      res["product"] = {{"factors", {n1, n2}}, {"seminorms", tab}, {"sup_bound", bounded}, {"pass", ok && bounded}};
      pass = pass && ok && bounded;
    }
    if (rsym) {
      json j = {{"symbol", *recip}, {"C0", C0}, {"mu", mu}, {"expected", expect}};
      try {
        auto inv = reciprocal_symbol(*rsym, C0, mu, grids[0]);
        std::vector<std::vector<double>> rows;
        auto [tab, ok] = suite(inv, order, rows);
        j["outcome"] = "ok";
        j["seminorms"] = tab;
        j["pass"] = expect == "ok" && ok;
      } catch (const SymbolError& e) {
        j["outcome"] = "violation";
        j["witness"] = e.witness();
        // The witness must actually violate |a| >= C0 lambda^mu.
        bool genuine = false;
        if (!e.witness().empty()) {
          const double lam = lambda_value(e.witness(), rsym->weight().lambda_convention());
          genuine = std::abs((*rsym)(e.witness())) < C0 * std::pow(lam, mu);
        }
        j["witness_violates"] = genuine;
        j["pass"] = expect == "violation" && genuine;
      }
      pass = pass && j["pass"].get<bool>();
      res["reciprocal"] = j;
    }
    res["grids"] = json::array();
    for (const auto& g : grids) res["grids"].push_back({{"dim", g.dim}, {"radius", g.radius}, {"points", g.points}});
    return res;
  };
}

OpFn make_build_operator(const Scenario& sc, const Config& c) {
  Reader r(c, "build-operator");
  const auto& S = need_S(sc, r);
  const auto& a = symbol_ref(sc, r, "symbol", "phase", "a");
  const std::string reference = r.str("reference", "none");
  if (reference != "none" && reference != "identity") r.fail("reference", "must be none or identity");
  const auto widths = r.nums("widths", {4.0, 8.0});
  const auto centers = r.nums("centers", {0.0});
  const double tol = r.positive("tolerance", 1e-6);
  const bool save = r.flag("save", false);
  r.finish();
  const GridDef g = sc.grid;
  const int n = sc.n;
  return [=](const fs::path& dir, std::vector<fs::path>& files, bool& pass) {
    auto F = build(S, a, n, g.points, g.radius, g.x_fraction, g.route);
    json j = {{"route", to_string(F.route)},
              {"row_grid", grid_json(F.row_grid)},
              {"col_grid", grid_json(F.col_grid)},
              {"config_hash", F.config_hash},
              {"frobenius", F.matrix.norm()}};
    if (reference == "identity") {
      if (!(F.row_grid == F.col_grid)) throw std::runtime_error("identity reference needs equal row and column grids");
      json tests = json::array();
      std::vector<std::vector<double>> rows;
      const double h = F.col_grid.spacing();
      for (double w : widths)
        for (double c0 : centers) {
          const double s = w * h;
          auto gfun = [&](std::span<const double> y) {
            double r2 = 0.0;
            for (double v : y) r2 += (v - c0) * (v - c0);
            return cplx(std::exp(-r2 / (2 * s * s)));
          };
          const auto u = sample(F.col_grid, gfun);
          const Eigen::VectorXcd v = fiolab::apply(F, u);
          const double err = grid_l2(F.row_grid, v - u) / grid_l2(F.col_grid, u);
          const bool ok = err < tol;
          pass = pass && ok;
          tests.push_back({{"width_spacings", w}, {"center", c0}, {"relative_error", err}, {"pass", ok}});
          rows.push_back({w, err});
        }
      j["identity"] = {{"tolerance", tol}, {"tests", tests}};
      const auto csv = dir / "identity_errors.csv";
      write_csv(csv, {"width_spacings", "relative_l2_error"}, rows);
      files.push_back(csv);
    }
    if (save) {
      const auto bin = dir / "operator.fiolabop";
      save_operator(F, bin);
      files.push_back(bin);
    }
    return j;
  };
}

OpFn make_spectrum(const Scenario& sc, const Config& c) {
  Reader r(c, "spectrum");
  const auto& S = need_S(sc, r);
  const auto& a = symbol_ref(sc, r, "symbol", "phase", "a");
  const double tol = r.positive("tol", 1e-8);
  const bool doubling = r.flag("doubling", true);
  const double stability = r.positive("stability", 0.01);
  const bool compare_sup = r.flag("compare_sup", false);
  const double sup_tol = r.positive("sup_tolerance", 1e-3);
  const int count = r.integer("singular_values", -1);
  r.finish();
  const GridDef g = sc.grid;
  const int n = sc.n;
  return [=](const fs::path& dir, std::vector<fs::path>& files, bool& pass) {
    auto F = build(S, a, n, g.points, g.radius, g.x_fraction, g.route);
    const auto N1 = operator_norm(F, tol);
    const auto FF = compose(F, adjoint(F));
    const auto N2 = operator_norm(FF, tol);
    const double sq = N1.value * N1.value;
    const double sq_err = std::abs(sq - N2.value) / std::max(N2.value, 1e-300);
    const bool sq_ok = sq_err <= 2 * tol;
    pass = pass && sq_ok;
    json j = {{"norm", {{"value", N1.value}, {"iterations", N1.iterations}, {"residual", N1.residual}}},
              {"norm_ffstar", {{"value", N2.value}, {"iterations", N2.iterations}, {"residual", N2.residual}}},
              {"square_relative_gap", sq_err},
              {"square_check", sq_ok},
              {"tol", tol}};
    if (compare_sup) {
      const double sup = grid_sup(a, F.row_grid, F.col_grid.dual());
      const double gap = std::abs(N1.value - sup);
      const bool ok = gap <= sup_tol;
      pass = pass && ok;
      j["sup_a"] = {{"value", sup}, {"gap", gap}, {"tolerance", sup_tol}, {"pass", ok}};
    }
    if (doubling) {
      // Same spacing, twice the points: the box doubles.
      auto F2 = build(S, a, n, 2 * g.points, 2 * g.radius, g.x_fraction, g.route);
      const double v2 = operator_norm(F2, tol).value;
      const double rel = std::abs(v2 - N1.value) / N1.value;
      const bool ok = rel <= stability;
      pass = pass && ok;
      j["doubling"] = {{"points", 2 * g.points}, {"radius", 2 * g.radius}, {"norm", v2}, {"relative_change", rel},
                       {"tolerance", stability}, {"pass", ok}};
    }
    const auto s = singular_values(F, count);
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < s.size(); ++i) rows.push_back({static_cast<double>(i), s[i]});
    const auto csv = dir / "singular_values.csv";
    write_csv(csv, {"index", "singular_value"}, rows);
    files.push_back(csv);
    j["singular_values"] = s.size();
    return j;
  };
}

OpFn make_check_ffstar(const Scenario& sc, const Config& c) {
  Reader r(c, "check-ffstar");
  const auto& S = need_S(sc, r);
  const auto& a = symbol_ref(sc, r, "symbol", "phase", "a");
  const std::string which_s = r.str("which", "FFSTAR");
  if (which_s != "FFSTAR" && which_s != "FSTARF") r.fail("which", "must be FFSTAR or FSTARF");
  const Composition which = which_s == "FFSTAR" ? Composition::FFStar : Composition::FStarF;
  auto levels = r.nums("points", {static_cast<double>(sc.grid.points), 2.0 * sc.grid.points});
  if (levels.size() != 2) r.fail("points", "needs two resolutions");
  const auto xs = r.nums("x", {-1.0, 0.0, 1.0});
  const auto ts = r.nums("theta", {-6.0, -4.5, -3.0, 3.0, 4.5, 6.0});
  const double lambda_min = r.positive("lambda_min", 3.0);
  const double max_ratio = r.positive("max_ratio", 0.6);
  const double tolerance = r.positive("tolerance", 0.05);
  ExtractionWindow win;
  win.half_width = r.integer("half_width", win.half_width);
  win.taper_fraction = r.positive("taper_fraction", win.taper_fraction);
  r.finish();
  if (sc.n != 1) throw ConfigError("check-ffstar samples a one-dimensional grid of (x, theta)");
  const GridDef g = sc.grid;
  return [=](const fs::path& dir, std::vector<fs::path>& files, bool& pass) {
    std::vector<std::vector<double>> samples;
    for (double x : xs)
      for (double t : ts) samples.push_back({x, t});
    std::vector<PdoSymbolEstimate> est;
    json levels_j = json::array();
    for (double Md : levels) {
      const int M = static_cast<int>(Md);
      const double R = g.radius * M / g.points;  // spacing fixed
      auto F = build(S, a, 1, M, R, g.x_fraction, g.route);
      const auto P = which == Composition::FFStar ? compose(F, adjoint(F)) : compose(adjoint(F), F);
      est.push_back(compare_symbols(S, a, P, samples, which, win));
      std::vector<std::vector<double>> rows;
      for (const auto& s : est.back().samples)
        if (s.relative_error) rows.push_back({s.lambda, *s.relative_error});
      const auto csv = dir / ("symbol_comparison_M" + std::to_string(M) + ".csv");
      write_csv(csv, {"lambda", "relative_error"}, rows);
      files.push_back(csv);
      json e = est.back();
      e["points"] = M;
      e["radius"] = R;
      levels_j.push_back(e);
    }
    const auto rt = residual_ratio_test(est[0], est[1], lambda_min, max_ratio, tolerance);
    pass = pass && rt.pass;
    return json{{"levels", levels_j},
                {"ratio_test",
                 {{"pass", rt.pass},
                  {"max_error_coarse", rt.max_error_coarse},
                  {"max_error_fine", rt.max_error_fine},
                  {"worst_ratio", rt.worst_ratio},
                  {"counted", rt.counted},
                  {"below_noise", rt.below_noise},
                  {"within_tolerance", rt.within_tolerance},
                  {"lambda_min", lambda_min},
                  {"max_ratio", max_ratio},
                  {"tolerance", tolerance}}}};
  };
}

OpFn make_cv_check(const Scenario& sc, const Config& c) {
  Reader r(c, "cv-check");
  const auto& S = need_S(sc, r);
  const auto& a = symbol_ref(sc, r, "symbol", "phase", "a");
  const double gamma = r.positive("gamma", 1.0);
  const int k = r.integer("k", 2 * sc.n + 1);
  const double radius = r.positive("radius", sc.grid.radius);
  const int points = r.integer("points", sc.n == 1 ? 65 : 9);
  const double tol = r.positive("tol", 1e-8);
  r.finish();
  const GridDef g = sc.grid;
  const int n = sc.n;
  return [=](const fs::path&, std::vector<fs::path>&, bool& pass) {
    // sigma = |a|^2 / |det d2S/dx dt| in the (x, theta) parametrization.
    auto sigma = SymbolField::from_function(
        [S, a, n](std::span<const double> p) {
          auto pr = predicted_symbol(S, a, p.first(static_cast<std::size_t>(n)), p.last(static_cast<std::size_t>(n)),
                                     Composition::FFStar);
          return cplx(pr.value);
        },
        2 * n, constant_weight(1.0, 2 * n), 0.0, "|a|^2/|det S_xt|");
    const auto Q = cv_seminorm(sigma, k, SampleGrid{2 * n, radius, points});
    auto F = build(S, a, n, g.points, g.radius, g.x_fraction, g.route);
    const double nrm = operator_norm(F, tol).value;
    const auto b = cv_bound_check(nrm, Q, gamma);
    pass = pass && b.pass;
    return json{{"seminorm", Q}, {"gamma", gamma},       {"norm", b.norm},
                {"bound", b.bound}, {"ratio", b.ratio}, {"pass", b.pass}};
  };
}

OpFn make_compactness(const Scenario& sc, const Config& c) {
  Reader r(c, "compactness");
  const auto& S = need_S(sc, r);
  const auto& a = symbol_ref(sc, r, "symbol", "phase", "a");
  CompactnessCriteria crit;
  crit.tail_index = r.integer("tail_index", crit.tail_index);
  crit.tail_threshold = r.positive("tail_threshold", crit.tail_threshold);
  crit.tail_stability = r.positive("tail_stability", crit.tail_stability);
  crit.plateau_height = r.positive("plateau_height", crit.plateau_height);
  const std::string expect = r.str("expect", "any");
  if (expect != "any" && expect != "COMPACT-CONSISTENT" && expect != "NONCOMPACT-CONSISTENT" &&
      expect != "INCONCLUSIVE")
    r.fail("expect", "must be a verdict or any");
  r.finish();
  const GridDef g = sc.grid;
  const int n = sc.n;
  return [=](const fs::path& dir, std::vector<fs::path>& files, bool& pass) {
    auto F1 = build(S, a, n, g.points, g.radius, g.x_fraction, g.route);
    auto F2 = build(S, a, n, 2 * g.points, 2 * g.radius, g.x_fraction, g.route);
    const auto s1 = singular_values(F1), s2 = singular_values(F2);
    const auto rep = compactness_probe(s1, s2, crit);
    for (const auto& [s, M] : {std::pair{&s1, g.points}, std::pair{&s2, 2 * g.points}}) {
      std::vector<std::vector<double>> rows;
      for (std::size_t i = 0; i < s->size(); ++i) rows.push_back({static_cast<double>(i), (*s)[i]});
      const auto csv = dir / ("singular_values_M" + std::to_string(M) + ".csv");
      write_csv(csv, {"index", "singular_value"}, rows);
      files.push_back(csv);
    }
    const bool ok = expect == "any" || to_string(rep.verdict) == expect;
    pass = pass && ok;
    json j = rep;
    j["expected"] = expect;
    j["as_expected"] = ok;
    return j;
  };
}

OpFn make_oscint(const Scenario& sc, const Config& c) {
  Reader r(c, "oscint");
  const int n = sc.n;
  std::optional<PhaseField> phi;
  if (auto p = r.raw("phi")) {
    phi = parse_in(r, "phi", [&] { return PhaseField(parse_expression(*p, VariableTable::fio_space(n, n)), n, n, *p); });
  } else {
    phi = special_phase(need_S(sc, r));
  }
  const std::string aname = r.str("amplitude", "a");
  auto it = sc.symbols.find(aname);
  if (it == sc.symbols.end()) r.fail("amplitude", "refers to undefined symbol '" + aname + "'");
  if (it->second.space == "y") r.fail("amplitude", "must be over the phase or fio space");
  const SymbolField a = *it->second.field;
  const SymbolField f = symbol_ref(sc, r, "f", "y", "f");
  const auto x = r.nums("x", std::vector<double>(static_cast<std::size_t>(n), 0.0));
  if (static_cast<int>(x.size()) != n) r.fail("x", "needs " + std::to_string(n) + " coordinates");
  const auto schedule = r.nums("schedule", {4, 8, 16, 32, 64});
  for (std::size_t i = 0; i < schedule.size(); ++i)
    if (!(schedule[i] > 0) || (i > 0 && schedule[i] <= schedule[i - 1])) r.fail("schedule", "must increase");
  CutoffSpec cutoff;
  {
    const auto s = r.str("cutoff", "GAUSSIAN");
    if (s != "GAUSSIAN" && s != "SMOOTH_BUMP") r.fail("cutoff", "must be GAUSSIAN or SMOOTH_BUMP");
    cutoff.kind = cutoff_from_string(s);
  }
  const bool compare = r.flag("compare_cutoffs", true);
  const double gap_factor = r.positive("gap_factor", 10.0);
  std::optional<double> eps0;
  if (auto e = r.raw("eps0"); e && *e != "auto") eps0 = r.positive("eps0", 0.1);
  std::vector<int> orders;
  for (double k : r.nums("ibp_orders", {0, 2, 4})) {
    if (k < 0 || k != std::floor(k)) r.fail("ibp_orders", "must be nonnegative integers");
    orders.push_back(static_cast<int>(k));
  }
  const double R = r.positive("radius", 12.0);
  const double agreement = r.positive("agreement", 1e-6);
  std::vector<int> tail_orders;
  for (double k : r.nums("tail_orders", {2, 4})) tail_orders.push_back(static_cast<int>(k));
  const auto tail_radii = r.nums("tail_radii", {12, 24});
  if (tail_radii.size() < 2) r.fail("tail_radii", "needs two radii");
  const double slope_tol = r.positive("slope_tolerance", 0.2);
  const double identity_tol = r.positive("identity_tolerance", 1e-10);
  OscQuadrature q;
  q.y_radius = r.positive("y_radius", q.y_radius);
  r.finish();

  return [=](const fs::path& dir, std::vector<fs::path>& files, bool& pass) {
    json j;
    HypothesisGrid hg;
    hg.points = n == 1 ? 25 : 7;
    const auto choice = eps0 ? Eps0Choice{*eps0, true, {}, {}} : choose_eps0(*phi, hg);
    j["eps0"] = choice;
    const auto L = ibp_operator(*phi, choice.eps0);
    const double lid = L_identity_error(L);
    const bool lid_ok = lid < identity_tol;
    pass = pass && lid_ok && choice.admissible;
    j["L_identity"] = {{"max_relative_error", lid}, {"tolerance", identity_tol}, {"pass", lid_ok}};
    const auto coeff = verify_ibp_coefficients(L, hg);
    pass = pass && coeff.pass;
    j["coefficient_decay"] = coeff;

    // Regularized limit.
    try {
      auto reg = regularized_fio_apply(a, *phi, f, x, schedule, cutoff, q, compare);
      json rj = reg;
      std::vector<std::vector<double>> rows;
      for (const auto& [s, e] : reg.sigma_residuals) rows.push_back({s, e});
      const auto csv = dir / "sigma_residuals.csv";
      write_csv(csv, {"sigma", "residual"}, rows);
      files.push_back(csv);
      // Monotone decrease over the schedule.
      bool mono = true;
      for (std::size_t i = 1; i < reg.sigma_residuals.size(); ++i)
        mono = mono && reg.sigma_residuals[i].second < reg.sigma_residuals[i - 1].second;
      rj["monotone"] = mono;
      if (reg.cutoff_gap) {
        const double final_res = reg.sigma_residuals.back().second;
        const double limit = gap_factor * std::max(final_res, q.residual_floor);
        const bool gap_ok = *reg.cutoff_gap <= limit;
        rj["gap_check"] = {{"gap", *reg.cutoff_gap}, {"limit", limit}, {"pass", gap_ok}};
        pass = pass && gap_ok;
      }
      pass = pass && mono;
      j["regularized"] = rj;
    } catch (const NonConvergence& e) {
      pass = false;
      json res = json::array();
      for (const auto& [s, v] : e.residuals()) res.push_back({{"sigma", s}, {"residual", v}});
      j["regularized"] = {{"error", e.what()}, {"sigma_residuals", res}};
    }

    // Integration by parts at the truncation radius.
    json ibp = json::array();
    std::vector<cplx> vals;
    for (int k : orders) {
      auto v = fio_apply_ibp(a, L, f, x, k, R, q);
      vals.push_back(v.value);
      ibp.push_back(v);
    }
    double spread = 0.0;
    const cplx ref = vals.empty() ? cplx(0.0) : vals.back();
    for (const auto& v : vals) spread = std::max(spread, std::abs(v - ref) / std::max(std::abs(ref), 1e-300));
    const bool agree = spread <= agreement;
    pass = pass && agree;
    j["ibp"] = {{"values", ibp}, {"relative_spread", spread}, {"tolerance", agreement}, {"pass", agree}};

    json tails = json::array();
    for (int k : tail_orders) {
      auto t = ibp_tail(a, L, f, x, k, tail_radii, q);
      const bool ok = std::abs(t.slope - t.predicted) <= slope_tol * std::abs(t.predicted);
      pass = pass && ok;
      json tj = t;
      tj["tolerance"] = slope_tol;
      tj["pass"] = ok;
      tails.push_back(tj);
      std::vector<std::vector<double>> rows;
      for (const auto& [Rr, m] : t.mass) rows.push_back({Rr, m});
      const auto csv = dir / ("tail_k" + std::to_string(k) + ".csv");
      write_csv(csv, {"radius", "tail_l1_mass"}, rows);
      files.push_back(csv);
    }
    j["tails"] = tails;
    j["x"] = x;
    j["phase"] = phi->description();
    return j;
  };
}

Scenario validate(const Config& c) {
  Scenario sc;
  sc.hash = c.hash();
  {
    Reader r(c, "scenario");
    if (!r.present()) throw ConfigError("missing section [scenario]");
    sc.name = r.required("name");
    if (!std::all_of(sc.name.begin(), sc.name.end(), name_char)) r.fail("name", "must be a plain file name");
    sc.description = r.str("description", "");
    sc.n = r.integer("n", 1);
    if (sc.n < 1 || sc.n > 3) r.fail("n", "must be 1, 2 or 3");
    const auto lam = r.str("lambda", "sqrt_sum_squares");
    if (lam == "one_plus_norm") sc.conv = LambdaConvention::OnePlusNorm;
    else if (lam != "sqrt_sum_squares") r.fail("lambda", "must be sqrt_sum_squares or one_plus_norm");
    sc.operations = r.list("operations", {});
    if (sc.operations.empty()) r.fail("operations", "is empty");
    for (const auto& op : sc.operations)
      if (!kOperations.count(op)) r.fail("operations", "names unknown operation '" + op + "'");
    r.finish();
  }
  {
    Reader r(c, "phase");
    if (r.present()) {
      if (auto s = r.raw("S")) {
        sc.S = parse_in(r, "S", [&] {
          return GeneratingFunction(parse_expression(*s, VariableTable::phase_space(sc.n)), sc.n, *s);
        });
      } else {
        QuadraticCoefficients q;
        q.xx = parse_matrix(r, "xx", sc.n);
        q.xt = parse_matrix(r, "xt", sc.n);
        q.tt = parse_matrix(r, "tt", sc.n);
        sc.S = quadratic_generating(q);
      }
      r.finish();
    }
  }
  for (const auto& name : c.section_names()) {
    if (name.rfind("symbol.", 0) != 0) continue;
    Reader r(c, name);
    SymbolDef d;
    d.name = name.substr(7);
    if (d.name.empty()) throw ConfigError("empty symbol name", c.section(name).line, 1);
    d.expr = r.required("expr");
    d.space = r.str("space", "phase");
    if (d.space != "phase" && d.space != "fio" && d.space != "y") r.fail("space", "must be phase, fio or y");
    d.weight = r.str("weight", "const:1");
    d.rho = r.num("rho", 0.0);
    const auto vars = space_vars(d.space, sc.n);
    const auto w = parse_in(r, "weight", [&] { return parse_weight(d.weight, vars); });
    d.field = parse_in(r, "expr", [&] {
      return std::make_shared<SymbolField>(SymbolField::parse(d.expr, vars, w, d.rho));
    });
    r.finish();
    sc.symbols[d.name] = d;
  }
  {
    Reader r(c, "grid");
    sc.grid.points = r.integer("points", sc.grid.points);
    if (sc.grid.points < 4) r.fail("points", "must be at least 4");
    sc.grid.radius = r.positive("radius", sc.grid.radius);
    sc.grid.x_fraction = r.positive("x_fraction", 1.0);
    const auto route = r.str("route", "SPECTRAL");
    if (route == "KERNEL") sc.grid.route = Route::Kernel;
    else if (route != "SPECTRAL") r.fail("route", "must be KERNEL or SPECTRAL");
    r.finish();
  }
  // Sections that are not operations of this scenario are still checked for typos.
  const std::set<std::string> known{"scenario", "phase", "grid"};
  for (const auto& name : c.section_names()) {
    if (known.count(name) || name.rfind("symbol.", 0) == 0) continue;
    if (!kOperations.count(name)) throw ConfigError("unknown section [" + name + "]", c.section(name).line, 1);
    if (std::find(sc.operations.begin(), sc.operations.end(), name) == sc.operations.end())
      throw ConfigError("section [" + name + "] is not in the operation list", c.section(name).line, 1);
  }
  for (const auto& op : sc.operations) {
    if (sc.ops.count(op)) throw ConfigError("operation '" + op + "' listed twice");
    OpFn fn;
    if (op == "verify-phase") fn = make_verify_phase(sc, c);
    else if (op == "verify-symbol") fn = make_verify_symbol(sc, c);
    else if (op == "build-operator") fn = make_build_operator(sc, c);
    else if (op == "spectrum") fn = make_spectrum(sc, c);
    else if (op == "check-ffstar") fn = make_check_ffstar(sc, c);
    else if (op == "cv-check") fn = make_cv_check(sc, c);
    else if (op == "compactness") fn = make_compactness(sc, c);
    else fn = make_oscint(sc, c);
    sc.ops[op] = fn;
  }
  return sc;
}

}  // namespace

// ---------------------------------------------------------------- running

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path, std::ios::binary);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << json(row[i]).dump();
    out << '\n';
  }
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

RunResult run_scenario(const Config& config, const RunOptions& options) {
  const Scenario sc = validate(config);
  set_thread_count(options.threads > 0 ? options.threads
                                       : static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));
  RunResult result;
  result.dir = options.out_dir / sc.name;
  fs::create_directories(result.dir);

  json ops = json::array();
  json timing = json::object();
  bool all = true;
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& op : sc.operations) {
    const auto start = std::chrono::steady_clock::now();
    bool pass = true;
    std::vector<fs::path> files;
    json body;
    try {
      body = sc.ops.at(op)(result.dir, files, pass);
    } catch (const std::exception& e) {
      throw std::runtime_error("scenario '" + sc.name + "', operation " + op + ": " + e.what());
    }
    json doc = {{"scenario", sc.name}, {"scenario_hash", sc.hash}, {"operation", op}, {"pass", pass}};
    doc["result"] = body;
    const auto path = result.dir / (op + ".json");
    write_json(path, doc);
    files.insert(files.begin(), path);
    json names = json::array();
    for (const auto& f : files) names.push_back(f.filename().string());
    ops.push_back({{"operation", op}, {"pass", pass}, {"outputs", names}});
    all = all && pass;
    result.files.insert(result.files.end(), files.begin(), files.end());
    timing[op] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }

  json grids = {{"points", sc.grid.points},
                {"radius", sc.grid.radius},
                {"x_fraction", sc.grid.x_fraction},
                {"route", to_string(sc.grid.route)}};
  json modules = json::object();
  for (const char* m : {"weights", "symbols", "phases", "oscillatory", "operators", "pdo_check", "cli"})
    modules[m] = kVersion;
  result.manifest = {{"scenario", sc.name},
                     {"scenario_hash", sc.hash},
                     {"source", fs::path(config.source()).filename().string()},
                     {"modules", modules},
                     {"lambda_convention", sc.conv == LambdaConvention::OnePlusNorm ? "one_plus_norm"
                                                                                      : "sqrt_sum_squares"},
                     {"n", sc.n},
                     {"grid", grids},
                     {"operations", ops},
                     {"pass", all}};
  const auto manifest = result.dir / "manifest.json";
  write_json(manifest, result.manifest);
  write_json(result.dir / "timing.json",
             {{"scenario_hash", sc.hash},
              {"threads", thread_count()},
              {"seconds", timing},
              {"total_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}});
  result.files.push_back(manifest);
  result.exit_code = all ? 0 : 1;
  return result;
}

ScenarioParts scenario_parts(const Config& config) {
  const Scenario sc = validate(config);
  ScenarioParts p;
  p.name = sc.name;
  p.n = sc.n;
  p.S = sc.S;
  for (const auto& [k, d] : sc.symbols) {
    p.symbols.emplace(k, *d.field);
    p.symbol_space[k] = d.space;
  }
  p.points = sc.grid.points;
  p.radius = sc.grid.radius;
  p.x_fraction = sc.grid.x_fraction;
  p.route = sc.grid.route;
  return p;
}

std::vector<fs::path> list_scenarios(const fs::path& dir) {
  std::vector<fs::path> v;
  if (!fs::is_directory(dir)) return v;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".cfg") v.push_back(e.path());
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace fiolab::cli

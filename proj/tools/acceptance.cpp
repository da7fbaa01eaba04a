// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [--criterion N]... [--scenario-dir DIR] [--out-dir DIR]
//
// Exit status is 0 only when every selected criterion passes.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "fiolab/cli.hpp"
#include "fiolab/operators.hpp"
#include "fiolab/oscillatory.hpp"
#include "fiolab/parallel.hpp"
#include "fiolab/pdo_check.hpp"
#include "fiolab/phases.hpp"
#include "fiolab/symbols.hpp"
#include "fiolab/weights.hpp"

#ifndef FIOLAB_SCENARIO_DIR
#define FIOLAB_SCENARIO_DIR "scenarios"
#endif

using namespace fiolab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "] ";
    }
  }
};

GeneratingFunction gen(const std::string& text, int n = 1) {
  return GeneratingFunction(parse_expression(text, VariableTable::phase_space(n)), n, text);
}

SymbolField sym(const std::string& text, int n = 1, WeightSpec w = constant_weight(1.0, 2)) {
  return SymbolField::parse(text, VariableTable::phase_space(n), std::move(w), 0.0);
}

SymbolField ysym(const std::string& text) {
  return SymbolField::parse(text, VariableTable::y_space(1), constant_weight(1.0, 1), 0.0);
}

std::vector<cli::ScenarioParts> bundled(const fs::path& dir) {
  std::vector<cli::ScenarioParts> v;
  for (const auto& p : cli::list_scenarios(dir)) v.push_back(cli::scenario_parts(cli::Config::load(p)));
  return v;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

Outcome fourier_inversion() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const GridSpec y{1, 8.0, 256, true};
  const auto F = discretize_fio(gen("x*t"), sym("1"), y, y, y.dual(), Route::Spectral);
  const double h = y.spacing();
  double worst = 0.0;
  for (double w : {4.0, 6.0, 8.0, 16.0})
    for (double c : {0.0, 1.5, -2.25}) {
      const double s = w * h;
      const auto g = sample(y, [&](std::span<const double> p) {
        return cplx(std::exp(-(p[0] - c) * (p[0] - c) / (2 * s * s)));
      });
      const Eigen::VectorXcd Fg = fiolab::apply(F, g);
      worst = std::max(worst, grid_l2(y, Fg - g) / grid_l2(y, g));
    }
  const double t = seconds_since(t0);
  o.detail << "max relative L2 error " << worst << " over widths 4..16 spacings, " << t << " s";
  o.require(worst < 1e-6, "error < 1e-6");
  o.require(t < 5.0, "runtime < 5 s");
  return o;
}

const std::vector<double> kSchedule{4, 8, 16, 32, 64};

Outcome regularization() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const auto phi = special_phase(gen("x*t"));
  const auto a = sym("1"), f = ysym("exp(-y^2/2)");
  for (double x : {0.0, 1.0}) {
    const std::vector<double> xs{x};
    const auto r = regularized_fio_apply(a, phi, f, xs, kSchedule, CutoffSpec{CutoffKind::Gaussian});
    std::vector<double> res;
    for (const auto& [s, e] : r.sigma_residuals)
      if (s >= 16) res.push_back(e);
    const bool mono = res.size() == 3 && res[1] < res[0] && res[2] < res[1];
    const double gap = r.cutoff_gap.value_or(INFINITY);
    o.detail << "x=" << x << ": residuals(16,32,64) " << res[0] << " " << res[1] << " " << res[2] << ", gap " << gap
             << "; ";
    o.require(mono, "monotone residuals at x=" + std::to_string(x));
    o.require(gap <= 10 * res.back(), "gap <= 10x final residual at x=" + std::to_string(x));
    o.require(std::abs(r.value - std::exp(-x * x / 2)) < 1e-6, "limit matches exp(-x^2/2)");
  }
  const double t = seconds_since(t0);
  o.detail << t << " s";
  o.require(t < 30.0, "runtime < 30 s");
  return o;
}

Outcome ibp() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const auto phi = special_phase(gen("x*t"));
  const auto a = sym("1"), f = ysym("exp(-y^2/2)");
  HypothesisGrid hg;
  const auto eps0 = choose_eps0(phi, hg);
  const auto L = ibp_operator(phi, eps0.eps0);
  const std::vector<double> x{0.0};
  std::vector<cplx> v;
  for (int k : {0, 2, 4}) v.push_back(fio_apply_ibp(a, L, f, x, k, 12.0).value);
  double spread = 0.0;
  for (const auto& z : v) spread = std::max(spread, std::abs(z - v[2]) / std::abs(v[2]));
  o.detail << "values k=0,2,4 spread " << spread << " (exact error " << std::abs(v[2] - 1.0) << "); slopes";
  o.require(spread <= 1e-6, "k = 0, 2, 4 agree within 1e-6");
  const std::vector<double> radii{12.0, 24.0};
  double base = 0.0;
  for (int k : {0, 2, 4}) {
    const auto tail = ibp_tail(a, L, f, x, k, radii);
    if (k == 0) base = tail.slope;
    o.detail << " k=" << k << ":" << tail.slope << "/" << tail.predicted;
    o.require(std::abs(tail.slope - tail.predicted) <= 0.2 * std::abs(tail.predicted),
              "slope within 20% for k=" + std::to_string(k));
    if (k > 0) o.require(tail.slope - base >= k - 1, "order gain >= k-1 for k=" + std::to_string(k));
  }
  const double t = seconds_since(t0);
  o.detail << ", " << t << " s";
  o.require(t < 60.0, "runtime < 60 s");
  return o;
}

Outcome identity_on_exponential(const fs::path& dir) {
  Outcome o;
  std::set<std::string> seen;
  for (const auto& p : bundled(dir)) {
    if (!p.S || !seen.insert(p.S->description() + "/" + std::to_string(p.n)).second) continue;
    const auto phi = special_phase(*p.S);
    HypothesisGrid hg;
    hg.points = p.n == 1 ? 25 : 7;
    const auto choice = choose_eps0(phi, hg);
    const double eps0 = choice.admissible ? choice.eps0 : kDefaultOmegaEps0;
    const double err = L_identity_error(ibp_operator(phi, eps0));
    o.detail << p.name << " " << err << "; ";
    o.require(err < 1e-10, p.name);
  }
  return o;
}

Outcome ffstar_symbol() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  struct Case {
    std::string name, S, a;
    double x_fraction;
  };
  std::vector<std::vector<double>> samples;
  for (double x : {-1.0, 0.0, 1.0})
    for (double t : {-6.0, -4.5, -3.0, 3.0, 4.5, 6.0}) samples.push_back({x, t});
  for (const auto& c : {Case{"gaussian", "x*t", "exp(-x^2 - t^2)", 1.0}, Case{"dilation", "2*x*t", "1", 0.5}}) {
    const auto S = gen(c.S);
    const auto a = sym(c.a);
    std::vector<PdoSymbolEstimate> est;
    for (int M : {256, 512}) {
      const double R = 8.0 * M / 256;
      const GridSpec y{1, R, M, true};
      const GridSpec xg = c.x_fraction == 1.0 ? y : GridSpec{1, R * c.x_fraction, M, false};
      const auto F = discretize_fio(S, a, xg, y, y.dual(), Route::Spectral);
      est.push_back(compare_symbols(S, a, compose(F, adjoint(F)), samples, Composition::FFStar));
    }
    const auto rt = residual_ratio_test(est[0], est[1], 3.0, 0.6, 0.05);
    o.detail << c.name << ": max rel err " << rt.max_error_coarse << " -> " << rt.max_error_fine << ", worst ratio "
             << rt.worst_ratio << "; ";
    o.require(rt.within_tolerance, c.name + " within 5%");
    o.require(rt.pass, c.name + " ratio test");
  }
  const double t = seconds_since(t0);
  o.detail << t << " s";
  o.require(t < 300.0, "runtime < 5 min");
  return o;
}

bool bounded_weight(const SymbolField& a) {
  const auto& w = a.weight();
  if (w.tag().rfind("const:", 0) == 0) return true;
  return w.lambda_power() && *w.lambda_power() <= 0.0;
}

DiscreteOperator scenario_operator(const cli::ScenarioParts& p, const SymbolField& a, int scale) {
  const int M = p.points * scale;
  const double R = p.radius * scale;
  const GridSpec y{p.n, R, M, true};
  const GridSpec x = p.x_fraction == 1.0 ? y : GridSpec{p.n, R * p.x_fraction, M, false};
  return discretize_fio(*p.S, a, x, y, y.dual(), p.route);
}

Outcome boundedness(const fs::path& dir) {
  Outcome o;
  const double tol = 1e-8;
  {
    const GridSpec y{1, 8.0, 256, true};
    const auto a = sym("(3 + cos(t))/2");
    const auto F = discretize_fio(gen("x*t"), a, y, y, y.dual(), Route::Spectral);
    const auto N1 = operator_norm(F, tol);
    const auto N2 = operator_norm(compose(F, adjoint(F)), tol);
    double sup = 0.0;
    for (std::size_t k = 0; k < y.dual().total(); ++k) {
      const double p[2] = {0.0, y.dual().node(static_cast<int>(k))};
      sup = std::max(sup, std::abs(a(p)));
    }
    const double sq = std::abs(N1.value * N1.value - N2.value) / N2.value;
    o.detail << "multiplier |F| " << N1.value << " vs sup|a| " << sup << ", |F|^2 vs |FF*| rel " << sq << "; doubling";
    o.require(std::abs(N1.value - sup) <= 1e-3, "|F| = sup|a|");
    o.require(sq <= 2 * tol, "|F|^2 = |FF*|");
  }
  for (const auto& p : bundled(dir)) {
    if (!p.S) continue;
    auto it = p.symbols.find("a");
    if (it == p.symbols.end() || p.symbol_space.at("a") != "phase" || !bounded_weight(it->second)) continue;
    const double n1 = operator_norm(scenario_operator(p, it->second, 1), tol).value;
    const double n2 = operator_norm(scenario_operator(p, it->second, 2), tol).value;
    const double rel = std::abs(n2 - n1) / n1;
    o.detail << " " << p.name << ":" << rel;
    o.require(rel <= 0.01, p.name + " stable under doubling");
  }
  return o;
}

Outcome compactness() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  struct Case {
    std::string a, weight;
    CompactnessVerdict expect;
  };
  for (const auto& c : {Case{"jb(x, t)^(-1)", "lambda:p=-1", CompactnessVerdict::CompactConsistent},
                        Case{"1", "const:1", CompactnessVerdict::NoncompactConsistent}}) {
    const auto a = sym(c.a, 1, parse_weight(c.weight, VariableTable::phase_space(1)));
    std::vector<std::vector<double>> s;
    for (int scale : {1, 2}) {
      const GridSpec y{1, 8.0 * scale, 256 * scale, true};
      s.push_back(singular_values(discretize_fio(gen("x*t"), a, y, y, y.dual(), Route::Spectral)));
    }
    const auto rep = compactness_probe(s[0], s[1]);
    o.detail << "a=" << c.a << ": " << to_string(rep.verdict) << " (s_64 " << rep.tail_coarse << " -> "
             << rep.tail_fine << "); ";
    o.require(rep.verdict == c.expect, c.a + " expected " + to_string(c.expect));
  }
  const double t = seconds_since(t0);
  o.detail << t << " s";
  o.require(t < 120.0, "runtime < 2 min");
  return o;
}

// Seminorms of every term with |alpha| <= order on nested grids, and on a
// box of twice the radius: finite, nondecreasing under refinement, and not
// growing with the box (a class violation grows like a power of R).
bool class_check(const SymbolField& a, int order, double R, int pts, std::string& why) {
  const int d = a.dim();
  const auto space = jet_space(d, std::min(order, a.max_order()));
  for (std::size_t i = 0; i < space->size(); ++i) {
    auto e = space->exponent(i);
    MultiIndex alpha(e.begin(), e.end());
    const double c = seminorm_estimate(a, alpha, SampleGrid{d, R, pts});
    const double f = seminorm_estimate(a, alpha, SampleGrid{d, R, 2 * pts - 1});
    const double w = seminorm_estimate(a, alpha, SampleGrid{d, 2 * R, 2 * pts - 1});
    const bool ok = std::isfinite(c) && std::isfinite(f) && std::isfinite(w) && f >= c && w <= 1.5 * f + 1e-12;
    if (!ok) {
      std::ostringstream s;
      s << "alpha " << i << ": " << c << " " << f << " " << w;
      why = s.str();
      return false;
    }
  }
  return true;
}

Outcome symbol_classes(const fs::path& dir) {
  Outcome o;
  int count = 0;
  std::vector<SymbolField> phase_symbols;
  for (const auto& p : bundled(dir))
    for (const auto& [name, a] : p.symbols) {
      const bool small = a.dim() <= 2;
      std::string why;
      const bool ok = class_check(a, small ? 2 : 1, 8.0, small ? 33 : 7, why);
      o.require(ok, p.name + "." + name + " " + why);
      ++count;
      if (p.symbol_space.at(name) == "phase" && small) phase_symbols.push_back(a);
    }
  o.detail << count << " bundled symbols; constructors";
  int built = 0;
  for (std::size_t i = 0; i < phase_symbols.size(); ++i) {
    const auto& a = phase_symbols[i];
    std::string why;
    o.require(class_check(derivative_symbol(a, {1, 0}), 1, 8.0, 33, why), "derivative " + why);
    o.require(class_check(derivative_symbol(a, {0, 1}), 1, 8.0, 33, why), "derivative " + why);
    const auto& b = phase_symbols[(i + 1) % phase_symbols.size()];
    o.require(class_check(product_symbol(a, b), 2, 8.0, 33, why), "product " + why);
    built += 3;
  }
  const auto c = sym("2 + sin(x)*cos(t)");
  std::string why;
  o.require(class_check(reciprocal_symbol(c, 1.0, 0.0, SampleGrid{2, 8.0, 33}), 2, 8.0, 33, why), "reciprocal " + why);
  const auto grows = SymbolField::parse("jb(x, t)", VariableTable::phase_space(1),
                                        lambda_weight(1.0, 2), 1.0);
  o.require(class_check(reciprocal_symbol(grows, 1.0, 1.0, SampleGrid{2, 8.0, 33}), 2, 8.0, 33, why),
            "reciprocal of lambda " + why);
  o.detail << " " << built + 2 << " checked";
  try {
    reciprocal_symbol(sym("cos(x)"), 0.5, 0.0, SampleGrid{2, 8.0, 33});
    o.require(false, "reciprocal of cos(x) accepted");
  } catch (const SymbolError& e) {
    const auto& w = e.witness();
    const bool genuine = w.size() == 2 && std::abs(std::cos(w[0])) < 0.5;
    o.detail << "; violation witness (" << (w.empty() ? NAN : w[0]) << ", " << (w.size() > 1 ? w[1] : NAN) << ")";
    o.require(genuine, "witness violates |cos x| >= 0.5");
  }
  return o;
}

Outcome hypotheses(const fs::path& dir) {
  Outcome o;
  HypothesisGrid g1;
  HypothesisGrid g2;
  g2.points = 9;
  std::optional<GeneratingFunction> quad;
  for (const auto& p : bundled(dir))
    if (p.n == 2 && p.S) quad = p.S;
  if (!quad) {
    o.require(false, "no bundled n=2 quadratic scenario");
    return o;
  }
  for (const auto& [S, g] : {std::pair{gen("x*t"), g1}, std::pair{*quad, g2}}) {
    const auto phi = special_phase(S);
    const std::vector<HypothesisReport> reps{verify_G1(S, g), verify_G2(S, g),       verify_G3(S, g, 3),
                                             verify_H1(phi, g), verify_H2(phi, g, 3), verify_H3(phi, g)};
    o.detail << S.description() << ":";
    for (const auto& r : reps) {
      o.detail << " " << r.name << (r.pass ? "+" : "-");
      o.require(r.pass, S.description() + " " + r.name);
    }
    o.detail << "; ";
  }
  {
    QuadraticCoefficients c;
    c.xx = Eigen::MatrixXd::Ones(1, 1);
    c.xt = Eigen::MatrixXd::Zero(1, 1);
    c.tt = Eigen::MatrixXd::Ones(1, 1);
    const auto S = quadratic_generating(c);
    const auto r = verify_G2(S, g1);
    bool ok = !r.pass && r.witness;
    if (ok) {
      const auto& w = *r.witness;
      ok = std::abs(S.mixed_hessian(std::span(w).first(1), std::span(w).last(1)).determinant()) < g1.floor;
    }
    o.detail << "C11=0: G2 " << (r.pass ? "pass" : "fail") << "; ";
    o.require(ok, "C11=0 quadratic fails G2 with a degenerate witness");
  }
  {
    const auto S = gen("exp(x)*t");
    const auto r = verify_G3(S, g1, 3);
    // The growth comes from x -> +infinity; the witness must sit there.
    const bool ok = !r.pass && r.witness && (*r.witness)[0] >= g1.radii.back() / 2;
    o.detail << "exp(x)*t: G3 " << (r.pass ? "pass" : "fail");
    if (r.witness) o.detail << " at x=" << (*r.witness)[0];
    o.require(ok, "exp(x)*t fails G3 with a large-x witness");
  }
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism(const fs::path& dir, const fs::path& out) {
  Outcome o;
  int files = 0, scenarios = 0;
  for (const auto& path : cli::list_scenarios(dir)) {
    const auto config = cli::Config::load(path);
    // Second run with a different thread count.
    const auto a = cli::run_scenario(config, cli::RunOptions{out / "first", 1});
    const auto b = cli::run_scenario(config, cli::RunOptions{out / "second", 2});
    ++scenarios;
    o.require(a.files.size() == b.files.size(), path.stem().string() + " file list");
    for (std::size_t i = 0; i < std::min(a.files.size(), b.files.size()); ++i) {
      ++files;
      o.require(a.files[i].filename() == b.files[i].filename() && slurp(a.files[i]) == slurp(b.files[i]),
                path.stem().string() + "/" + a.files[i].filename().string());
    }
  }
  o.detail << scenarios << " scenarios, " << files << " files compared (1 vs 2 threads)";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fiolab acceptance suite"};
  std::vector<int> selected;
  fs::path scenario_dir = FIOLAB_SCENARIO_DIR;
  fs::path out_dir = fs::temp_directory_path() / "fiolab_acceptance";
  app.add_option("--criterion", selected, "Run only these criteria (1-10)")->check(CLI::Range(1, 10));
  app.add_option("--scenario-dir", scenario_dir, "Bundled scenarios");
  app.add_option("--out-dir", out_dir, "Scratch directory for the determinism runs");
  CLI11_PARSE(app, argc, argv);
  if (selected.empty())
    for (int i = 1; i <= 10; ++i) selected.push_back(i);
  set_thread_count(1);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"Fourier inversion identity", fourier_inversion},
      {"regularization convergence and cutoff independence", regularization},
      {"integration by parts", ibp},
      {"L e^{i phi} = e^{i phi}", [&] { return identity_on_exponential(scenario_dir); }},
      {"symbol of F F*", ffstar_symbol},
      {"boundedness", [&] { return boundedness(scenario_dir); }},
      {"compactness", compactness},
      {"symbol classes", [&] { return symbol_classes(scenario_dir); }},
      {"phase hypotheses", [&] { return hypotheses(scenario_dir); }},
      {"determinism", [&] { return determinism(scenario_dir, out_dir); }},
  };
  bool all = true;
  for (int i : selected) {
    const auto& [name, run] = criteria[static_cast<std::size_t>(i - 1)];
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [error: " << e.what() << "]";
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << i << " (" << name << "): " << o.detail.str()
              << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}

#include "fiolab/phases.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <sstream>

#include "fiolab/parallel.hpp"
#include "fiolab/weights.hpp"

namespace fiolab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kTile = 256;
constexpr std::size_t kPointBudget = 200000;
constexpr int kMaxOrder = 6;

std::vector<double> concat(std::span<const double> a, std::span<const double> b) {
  std::vector<double> v(a.begin(), a.end());
  v.insert(v.end(), b.begin(), b.end());
  return v;
}

std::vector<int> all_active(int d) {
  std::vector<int> a(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) a[static_cast<std::size_t>(i)] = i;
  return a;
}

std::vector<cplx> full_jet(const Tape& tape, int dims, std::span<const double> p, int order) {
  auto space = jet_space(dims, order);
  Tape::JetWork work;
  auto active = all_active(dims);
  auto j = tape.eval_jet(*space, p, active, work);
  return {j.begin(), j.end()};
}

// Second derivative from Taylor coefficients (order >= 2).
double second(const JetSpace& s, std::span<const cplx> c, int i, int j) {
  std::vector<int> alpha(static_cast<std::size_t>(s.dims()), 0);
  ++alpha[static_cast<std::size_t>(i)];
  ++alpha[static_cast<std::size_t>(j)];
  const auto k = s.index(alpha);
  return c[k].real() * s.factorial(k);
}

int axis_points(int dims, const HypothesisGrid& g) {
  int m = g.points;
  while (m > 3 && std::pow(static_cast<double>(m), dims) > static_cast<double>(kPointBudget)) --m;
  if (m % 2 == 0) --m;
  return std::max(m, 1);
}

struct Extremum {
  double value = -kInf;
  std::vector<double> at;
};

using PointFn = std::function<void(std::span<const double>, std::span<double>, Tape::JetWork&)>;

// Max of each of q quantities over the endpoint-inclusive grid on [-R, R]^dims.
// Ties keep the first point in row-major order; NaN counts as +inf.
std::vector<Extremum> scan_box(int dims, double R, int pts, int q, const PointFn& fn) {
  SampleGrid grid{dims, R, pts};
  const std::size_t total = grid.total();
  const std::size_t tiles = tile_count(total, kTile);
  std::vector<std::vector<Extremum>> partial(tiles, std::vector<Extremum>(static_cast<std::size_t>(q)));
  parallel_tiles(total, kTile, [&](std::size_t lo, std::size_t hi, std::size_t t) {
    Tape::JetWork work;
    std::vector<double> p(static_cast<std::size_t>(dims));
    std::vector<double> out(static_cast<std::size_t>(q));
    auto& best = partial[t];
    for (std::size_t k = lo; k < hi; ++k) {
      grid.coords(k, p.data());
      fn(p, out, work);
      for (int i = 0; i < q; ++i) {
        double v = out[static_cast<std::size_t>(i)];
        if (std::isnan(v)) v = kInf;
        auto& b = best[static_cast<std::size_t>(i)];
        if (v > b.value || b.at.empty()) {
          b.value = v;
          b.at = p;
        }
      }
    }
  });
  std::vector<Extremum> result(static_cast<std::size_t>(q));
  for (const auto& tile : partial)
    for (int i = 0; i < q; ++i) {
      const auto& b = tile[static_cast<std::size_t>(i)];
      auto& r = result[static_cast<std::size_t>(i)];
      if (!b.at.empty() && (b.value > r.value || r.at.empty())) r = b;
    }
  return result;
}

double growth_exponent(double previous, double last, double r_prev, double r_last) {
  if (!std::isfinite(last)) return kInf;
  if (!(previous > 0.0) || !(last > 0.0)) return 0.0;
  return std::log(last / previous) / std::log(r_last / r_prev);
}

std::string index_label(const char* prefix, std::span<const int> alpha) {
  std::ostringstream s;
  s << prefix << "(";
  for (std::size_t i = 0; i < alpha.size(); ++i) s << (i ? "," : "") << alpha[i];
  s << ")";
  return s.str();
}

// Shared driver for (H2)/(G3): sup |d^alpha f| / lambda^{2-|alpha|} for all |alpha| <= max_order.
HypothesisReport derivative_growth(const std::string& name, const Tape& tape, int dims, const HypothesisGrid& grid,
                                   int max_order) {
  if (max_order < 0 || max_order > kMaxOrder) throw std::invalid_argument(name + ": max_order out of range");
  if (grid.radii.empty()) throw std::invalid_argument(name + ": no radii");
  auto space = jet_space(dims, max_order);
  const int q = static_cast<int>(space->size());
  const auto active = all_active(dims);
  const int pts = axis_points(dims, grid);
  PointFn fn = [&](std::span<const double> p, std::span<double> out, Tape::JetWork& work) {
    auto c = tape.eval_jet(*space, p, active, work);
    const double lam = lambda_value(p);
    for (int k = 0; k < q; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      out[ku] = std::abs(c[ku]) * space->factorial(ku) / std::pow(lam, 2 - space->degree(ku));
    }
  };
  std::vector<std::vector<Extremum>> boxes;
  for (double R : grid.radii) boxes.push_back(scan_box(dims, R, pts, q, fn));

  HypothesisReport r;
  r.name = name;
  r.pass = true;
  double worst_excess = -kInf;
  std::ostringstream detail;
  for (int k = 0; k < q; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const std::string label = index_label("C", space->exponent(ku));
    const auto& last = boxes.back()[ku];
    r.constants[label] = last.value;
    double g = 0.0;
    if (boxes.size() >= 2) {
      const auto& prev = boxes[boxes.size() - 2][ku];
      g = growth_exponent(prev.value, last.value, grid.radii[grid.radii.size() - 2], grid.radii.back());
      r.growth[label] = g;
    }
    const bool over_cap = !(last.value <= grid.cap);
    const bool growing = g > grid.growth_tolerance && last.value > 1e-12;
    if (over_cap || growing) {
      r.pass = false;
      const double excess = over_cap ? kInf : g;
      if (excess > worst_excess) {
        worst_excess = excess;
        r.witness = last.at;
        detail.str("");
        detail << label << (over_cap ? " exceeds cap" : " grows with the box") << ": " << last.value
               << " (growth exponent " << g << ")";
      }
    }
  }
  r.detail = r.pass ? "all constants finite and stable across boxes" : detail.str();
  return r;
}

// Shared driver for (H3)/(H3*): ratio lambda(field(p)) / lambda(p).
HypothesisReport lambda_ratio(const std::string& name, const std::string& k1, const std::string& k2,
                              const PhaseField& phi, const HypothesisGrid& grid,
                              const std::function<void(std::span<const double>, const PhaseField::Gradient&,
                                                       std::vector<double>&)>& field) {
  if (grid.radii.empty()) throw std::invalid_argument(name + ": no radii");
  const int dims = phi.dims();
  const int n = phi.n(), N = phi.N();
  auto space = jet_space(dims, 1);
  const auto active = all_active(dims);
  const int pts = axis_points(dims, grid);
  PointFn fn = [&](std::span<const double> p, std::span<double> out, Tape::JetWork& work) {
    auto c = phi.tape().eval_jet(*space, p, active, work);
    PhaseField::Gradient g{Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(N)};
    for (int i = 0; i < n; ++i) {
      g.x[i] = c[space->linear_index(i)].real();
      g.y[i] = c[space->linear_index(n + i)].real();
    }
    for (int i = 0; i < N; ++i) g.theta[i] = c[space->linear_index(2 * n + i)].real();
    std::vector<double> v;
    field(p, g, v);
    const double ratio = lambda_value(v) / lambda_value(p);
    out[0] = -ratio;  // minimum
    out[1] = ratio;
  };
  std::vector<std::vector<Extremum>> boxes;
  for (double R : grid.radii) boxes.push_back(scan_box(dims, R, pts, 2, fn));

  HypothesisReport r;
  r.name = name;
  const auto& last = boxes.back();
  const double K1 = -last[0].value, K2 = last[1].value;
  r.constants[k1] = K1;
  r.constants[k2] = K2;
  double decay = 0.0, growth = 0.0;
  if (boxes.size() >= 2) {
    const auto& prev = boxes[boxes.size() - 2];
    const double ra = grid.radii[grid.radii.size() - 2], rb = grid.radii.back();
    decay = growth_exponent(K1, -prev[0].value, ra, rb);
    growth = growth_exponent(prev[1].value, K2, ra, rb);
    r.growth[k1] = -decay;
    r.growth[k2] = growth;
  }
  std::ostringstream detail;
  if (!(K1 > grid.floor)) {
    detail << k1 << " = " << K1 << " below floor " << grid.floor;
    r.witness = last[0].at;
  } else if (decay > grid.growth_tolerance) {
    detail << k1 << " decays with the box (exponent " << -decay << ")";
    r.witness = last[0].at;
  } else if (!(K2 <= grid.cap) || growth > grid.growth_tolerance) {
    detail << k2 << " = " << K2 << " unbounded (growth exponent " << growth << ")";
    r.witness = last[1].at;
  }
  r.pass = !r.witness.has_value();
  r.detail = r.pass ? "lambda ratio bounded above and below" : detail.str();
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------

GeneratingFunction::GeneratingFunction(Expr S, int n, std::string description)
    : expr_(std::move(S)), n_(n), description_(std::move(description)) {
  if (n < 1) throw std::invalid_argument("GeneratingFunction: n must be positive");
  if (expr_.arity() > 2 * n) throw std::invalid_argument("GeneratingFunction: expression uses unknown variables");
  tape_ = std::make_shared<const Tape>(expr_);
}

double GeneratingFunction::operator()(std::span<const double> x, std::span<const double> theta) const {
  return tape_->eval(concat(x, theta)).real();
}

std::vector<cplx> GeneratingFunction::jet2(std::span<const double> x, std::span<const double> theta) const {
  return full_jet(*tape_, 2 * n_, concat(x, theta), 2);
}

Eigen::VectorXd GeneratingFunction::grad_x(std::span<const double> x, std::span<const double> theta) const {
  auto c = full_jet(*tape_, 2 * n_, concat(x, theta), 1);
  Eigen::VectorXd g(n_);
  for (int i = 0; i < n_; ++i) g[i] = c[1 + static_cast<std::size_t>(i)].real();
  return g;
}

Eigen::VectorXd GeneratingFunction::grad_theta(std::span<const double> x, std::span<const double> theta) const {
  auto c = full_jet(*tape_, 2 * n_, concat(x, theta), 1);
  Eigen::VectorXd g(n_);
  for (int i = 0; i < n_; ++i) g[i] = c[1 + static_cast<std::size_t>(n_ + i)].real();
  return g;
}

Eigen::MatrixXd GeneratingFunction::mixed_hessian(std::span<const double> x, std::span<const double> theta) const {
  if (coeffs_) return coeffs_->xt;
  auto c = jet2(x, theta);
  const auto& s = *jet_space(2 * n_, 2);
  Eigen::MatrixXd H(n_, n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) H(i, j) = second(s, c, i, n_ + j);
  return H;
}

Eigen::MatrixXd GeneratingFunction::hessian(std::span<const double> x, std::span<const double> theta) const {
  auto c = jet2(x, theta);
  const auto& s = *jet_space(2 * n_, 2);
  Eigen::MatrixXd H(2 * n_, 2 * n_);
  for (int i = 0; i < 2 * n_; ++i)
    for (int j = 0; j < 2 * n_; ++j) H(i, j) = second(s, c, i, j);
  return H;
}

PhaseField::PhaseField(Expr phi, int n, int N, std::string description)
    : expr_(std::move(phi)), n_(n), N_(N), description_(std::move(description)) {
  if (n < 1 || N < 1) throw std::invalid_argument("PhaseField: dimensions must be positive");
  if (expr_.arity() > dims()) throw std::invalid_argument("PhaseField: expression uses unknown variables");
  tape_ = std::make_shared<const Tape>(expr_);
}

double PhaseField::operator()(std::span<const double> point) const { return tape_->eval(point).real(); }

std::vector<cplx> PhaseField::jet(std::span<const double> point, int order) const {
  return full_jet(*tape_, dims(), point, order);
}

PhaseField::Gradient PhaseField::gradient(std::span<const double> point) const {
  auto c = jet(point, 1);
  Gradient g{Eigen::VectorXd(n_), Eigen::VectorXd(n_), Eigen::VectorXd(N_)};
  for (int i = 0; i < n_; ++i) {
    g.x[i] = c[1 + static_cast<std::size_t>(i)].real();
    g.y[i] = c[1 + static_cast<std::size_t>(n_ + i)].real();
  }
  for (int i = 0; i < N_; ++i) g.theta[i] = c[1 + static_cast<std::size_t>(2 * n_ + i)].real();
  return g;
}

Eigen::MatrixXd PhaseField::hessian(std::span<const double> point) const {
  auto c = jet(point, 2);
  const auto& s = *jet_space(dims(), 2);
  Eigen::MatrixXd H(dims(), dims());
  for (int i = 0; i < dims(); ++i)
    for (int j = 0; j < dims(); ++j) H(i, j) = second(s, c, i, j);
  return H;
}

PhaseField special_phase(const GeneratingFunction& S) {
  const int n = S.n();
  // (x, theta) of S live at fio indices (0..n-1, 2n..3n-1).
  std::vector<Expr> sub;
  for (int i = 0; i < n; ++i) sub.push_back(Expr::var(i));
  for (int i = 0; i < n; ++i) sub.push_back(Expr::var(2 * n + i));
  Expr phi = S.expr().substitute(sub);
  for (int i = 0; i < n; ++i) phi = phi - Expr::var(n + i) * Expr::var(2 * n + i);
  std::string desc = S.description().empty() ? std::string("S(x,t) - y.t") : S.description() + " - y.t";
  PhaseField f(phi, n, n, desc);
  f.generating_ = std::make_shared<const GeneratingFunction>(S);
  return f;
}

GeneratingFunction quadratic_generating(const QuadraticCoefficients& C) {
  const auto n = C.xt.rows();
  if (n < 1 || C.xt.cols() != n) throw std::invalid_argument("quadratic_generating: XT must be square");
  QuadraticCoefficients c = C;
  if (c.xx.size() == 0) c.xx = Eigen::MatrixXd::Zero(n, n);
  if (c.tt.size() == 0) c.tt = Eigen::MatrixXd::Zero(n, n);
  if (c.xx.rows() != n || c.xx.cols() != n || c.tt.rows() != n || c.tt.cols() != n)
    throw std::invalid_argument("quadratic_generating: coefficient blocks must be n x n");
  const int ni = static_cast<int>(n);
  auto x = [](int i) { return Expr::var(i); };
  auto t = [ni](int i) { return Expr::var(ni + i); };
  Expr S(0.0);
  auto add = [&S](double a, const Expr& u, const Expr& v) {
    if (a != 0.0) S = S + Expr(a) * u * v;
  };
  for (int i = 0; i < ni; ++i)
    for (int j = 0; j < ni; ++j) {
      add(c.xx(i, j), x(i), x(j));
      add(c.xt(i, j), x(i), t(j));
      add(c.tt(i, j), t(i), t(j));
    }
  GeneratingFunction g(S, ni, "quadratic");
  // The mixed Hessian of x^T XT t is XT itself.
  g.coeffs_ = c;
  return g;
}

// ---------------------------------------------------------------------------

void to_json(nlohmann::json& j, const HypothesisReport& r) {
  auto num = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
  };
  nlohmann::json constants = nlohmann::json::object(), growth = nlohmann::json::object();
  for (const auto& [k, v] : r.constants) constants[k] = num(v);
  for (const auto& [k, v] : r.growth) growth[k] = num(v);
  j = nlohmann::json{{"name", r.name}, {"pass", r.pass}, {"constants", constants}, {"growth", growth},
                     {"detail", r.detail}};
  j["witness"] = r.witness ? nlohmann::json(*r.witness) : nlohmann::json(nullptr);
}

namespace {

// Realness and finiteness of a tape with its first and second derivatives.
HypothesisReport realness(const std::string& name, const Tape& tape, int dims, const HypothesisGrid& grid) {
  if (grid.radii.empty()) throw std::invalid_argument(name + ": no radii");
  auto space = jet_space(dims, 2);
  const auto active = all_active(dims);
  PointFn fn = [&](std::span<const double> p, std::span<double> out, Tape::JetWork& work) {
    auto c = tape.eval_jet(*space, p, active, work);
    double worst = 0.0;
    for (const auto& z : c) {
      if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
        worst = kInf;
        break;
      }
      worst = std::max(worst, std::abs(z.imag()) / (1.0 + std::abs(z.real())));
    }
    out[0] = worst;
  };
  const int pts = axis_points(dims, grid);
  Extremum worst;
  for (double R : grid.radii) {
    auto e = scan_box(dims, R, pts, 1, fn)[0];
    if (worst.at.empty() || e.value > worst.value) worst = e;
  }
  HypothesisReport r;
  r.name = name;
  r.constants["max_relative_imaginary"] = worst.value;
  r.pass = worst.value <= 1e-12;
  if (!r.pass) r.witness = worst.at;
  r.detail = r.pass ? "real and finite with derivatives to order 2" : "complex or non-finite value";
  return r;
}

}  // namespace

HypothesisReport verify_H1(const PhaseField& phi, const HypothesisGrid& grid) {
  return realness("H1", phi.tape(), phi.dims(), grid);
}

HypothesisReport verify_G1(const GeneratingFunction& S, const HypothesisGrid& grid) {
  return realness("G1", Tape(S.expr()), 2 * S.n(), grid);
}

HypothesisReport verify_H2(const PhaseField& phi, const HypothesisGrid& grid, int max_order) {
  return derivative_growth("H2", phi.tape(), phi.dims(), grid, max_order);
}

HypothesisReport verify_G3(const GeneratingFunction& S, const HypothesisGrid& grid, int max_order) {
  Tape tape(S.expr());
  return derivative_growth("G3", tape, 2 * S.n(), grid, max_order);
}

HypothesisReport verify_H3(const PhaseField& phi, const HypothesisGrid& grid) {
  const int n = phi.n(), N = phi.N();
  return lambda_ratio("H3", "K1", "K2", phi, grid,
                      [n, N](std::span<const double> p, const PhaseField::Gradient& g, std::vector<double>& v) {
                        for (int i = 0; i < n; ++i) v.push_back(g.y[i]);
                        for (int i = 0; i < N; ++i) v.push_back(g.theta[i]);
                        for (int i = 0; i < n; ++i) v.push_back(p[static_cast<std::size_t>(n + i)]);
                      });
}

HypothesisReport verify_H3star(const PhaseField& phi, const HypothesisGrid& grid) {
  const int n = phi.n(), N = phi.N();
  return lambda_ratio("H3*", "K1*", "K2*", phi, grid,
                      [n, N](std::span<const double> p, const PhaseField::Gradient& g, std::vector<double>& v) {
                        for (int i = 0; i < n; ++i) v.push_back(p[static_cast<std::size_t>(i)]);
                        for (int i = 0; i < N; ++i) v.push_back(g.theta[i]);
                        for (int i = 0; i < n; ++i) v.push_back(g.x[i]);
                      });
}

HypothesisReport verify_G2(const GeneratingFunction& S, const HypothesisGrid& grid) {
  if (grid.radii.empty()) throw std::invalid_argument("G2: no radii");
  const int n = S.n(), dims = 2 * n;
  HypothesisReport r;
  r.name = "G2";
  if (S.coeffs()) {
    // Constant mixed Hessian: one evaluation is exact.
    std::vector<double> origin(static_cast<std::size_t>(dims), 0.0);
    const double d = std::abs(S.coeffs()->xt.determinant());
    r.constants["delta0"] = d;
    r.pass = d >= grid.floor;
    if (!r.pass) r.witness = origin;
  } else {
    Tape tape(S.expr());
    auto space = jet_space(dims, 2);
    const auto active = all_active(dims);
    const int pts = axis_points(dims, grid);
    PointFn fn = [&](std::span<const double> p, std::span<double> out, Tape::JetWork& work) {
      auto c = tape.eval_jet(*space, p, active, work);
      Eigen::MatrixXd H(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) H(i, j) = second(*space, c, i, n + j);
      out[0] = -std::abs(H.determinant());
    };
    Extremum worst;
    for (double R : grid.radii) {
      auto e = scan_box(dims, R, pts, 1, fn)[0];
      if (worst.at.empty() || e.value > worst.value) worst = e;
    }
    const double d = -worst.value;
    r.constants["delta0"] = d;
    r.pass = d >= grid.floor;
    if (!r.pass) r.witness = worst.at;
  }
  std::ostringstream detail;
  detail << "inf |det d2S/dxdt| = " << r.constants["delta0"] << (r.pass ? " >= " : " < ") << grid.floor;
  r.detail = detail.str();
  return r;
}

HypothesisReport verify_separation(const GeneratingFunction& S, std::span<const SeparationSample> pairs, double cap) {
  if (pairs.empty()) throw std::invalid_argument("verify_separation: empty pair set");
  HypothesisReport r;
  r.name = "separation";
  double C = 0.0;
  std::size_t used = 0;
  for (const auto& s : pairs) {
    Eigen::Map<const Eigen::VectorXd> x(s.x.data(), S.n()), xp(s.x_prime.data(), S.n());
    const double dx = (x - xp).norm();
    if (dx == 0.0) continue;
    ++used;
    const double dg = (S.grad_theta(s.x, s.theta) - S.grad_theta(s.x_prime, s.theta)).norm();
    const double ratio = dg > 0.0 ? dx / dg : kInf;
    if (ratio > C || !r.witness) {
      C = ratio;
      r.witness = concat(concat(s.x, s.x_prime), s.theta);
    }
  }
  if (used == 0) throw std::invalid_argument("verify_separation: every pair has x = x'");
  r.constants["C"] = C;
  r.pass = std::isfinite(C) && C <= cap;
  if (r.pass) r.witness.reset();
  std::ostringstream detail;
  detail << "C = " << C << " over " << used << " pairs";
  r.detail = detail.str();
  return r;
}

bool omega_domain_membership(const GeneratingFunction& S, double eps0, std::span<const double> x,
                             std::span<const double> y, std::span<const double> theta) {
  if (!(eps0 > 0)) throw std::invalid_argument("omega_domain_membership: eps0 must be positive");
  Eigen::VectorXd d = S.grad_theta(x, theta);
  double lhs = 0.0, rhs = 0.0;
  for (int i = 0; i < S.n(); ++i) {
    const auto iu = static_cast<std::size_t>(i);
    lhs += (d[i] - y[iu]) * (d[i] - y[iu]);
    rhs += x[iu] * x[iu] + y[iu] * y[iu] + theta[iu] * theta[iu];
  }
  return lhs < eps0 * rhs;
}

HypothesisReport lambda_equivalence(const GeneratingFunction& S, double eps0, const HypothesisGrid& grid,
                                    int samples_per_box) {
  if (!(eps0 > 0)) throw std::invalid_argument("lambda_equivalence: eps0 must be positive");
  const int n = S.n();
  const auto nu = static_cast<std::size_t>(n);
  std::mt19937_64 rng(0x5eed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  HypothesisReport r;
  r.name = "lambda_equivalence";
  std::vector<double> per_box;
  std::vector<double> worst_at;
  double C = 1.0;
  std::size_t members = 0;
  for (double R : grid.radii) {
    double Cbox = 1.0;
    for (int s = 0; s < samples_per_box; ++s) {
      std::vector<double> x(nu), t(nu), y(nu);
      for (auto& v : x) v = R * unit(rng);
      for (auto& v : t) v = R * unit(rng);
      Eigen::VectorXd g = S.grad_theta(x, t);
      double scale = 0.0;
      for (std::size_t i = 0; i < nu; ++i) scale += x[i] * x[i] + t[i] * t[i] + g[static_cast<Eigen::Index>(i)] * g[static_cast<Eigen::Index>(i)];
      // Perturb y = d_theta S within a ball a bit larger than the admissible one; reject non-members.
      const double rad = 2.0 * std::sqrt(eps0 * scale);
      for (std::size_t i = 0; i < nu; ++i) y[i] = g[static_cast<Eigen::Index>(i)] + rad * unit(rng);
      if (!omega_domain_membership(S, eps0, x, y, t)) continue;
      ++members;
      const auto xt = concat(x, t);
      const auto xyt = concat(concat(x, y), t);
      const double lxt = lambda_value(xt), lxyt = lambda_value(xyt);
      double ny = 0.0;
      for (double v : y) ny += v * v;
      const double c = std::max({lxyt / lxt, lxt / lxyt, std::sqrt(ny) / lxt});
      if (c > Cbox) Cbox = c;
      if (c > C) {
        C = c;
        worst_at = xyt;
      }
    }
    per_box.push_back(Cbox);
  }
  r.constants["C"] = C;
  r.constants["members"] = static_cast<double>(members);
  double g = 0.0;
  if (per_box.size() >= 2)
    g = growth_exponent(per_box[per_box.size() - 2], per_box.back(), grid.radii[grid.radii.size() - 2],
                        grid.radii.back());
  r.growth["C"] = g;
  r.pass = members > 0 && std::isfinite(C) && C <= grid.cap && g <= grid.growth_tolerance;
  if (!r.pass) r.witness = worst_at.empty() ? std::vector<double>(3 * nu, 0.0) : worst_at;
  std::ostringstream detail;
  detail << "C = " << C << " on " << members << " sampled members (eps0 = " << eps0 << ")";
  r.detail = detail.str();
  return r;
}

}  // namespace fiolab

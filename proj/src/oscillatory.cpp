#include "fiolab/oscillatory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <tuple>

#include "fiolab/parallel.hpp"
#include "fiolab/weights.hpp"

namespace fiolab {

namespace {

constexpr double kPi = std::numbers::pi;

Jet to_jet(const std::shared_ptr<const JetSpace>& s, std::span<const cplx> c) {
  Jet j(s);
  std::copy(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(s->size()), j.coeffs().begin());
  return j;
}

/// Coefficients of `u` (any order >= s's) in the lower-order space s. The
/// graded ordering makes the lower-order space a prefix.
Jet truncate(const Jet& u, const std::shared_ptr<const JetSpace>& s) {
  Jet j(s);
  std::copy(u.coeffs().begin(), u.coeffs().begin() + static_cast<std::ptrdiff_t>(s->size()), j.coeffs().begin());
  return j;
}

/// Re-express Taylor coefficients over `from` in `to`: variable v of `from`
/// becomes variable map[v] of `to`; variables with map[v] < 0 are held fixed.
Jet remap(std::span<const cplx> c, const JetSpace& from, std::span<const int> map,
          const std::shared_ptr<const JetSpace>& to) {
  using Key = std::tuple<const JetSpace*, const JetSpace*, std::vector<int>>;
  thread_local std::map<Key, std::vector<long>> cache;
  Key key{&from, to.get(), std::vector<int>(map.begin(), map.end())};
  auto it = cache.find(key);
  if (it == cache.end()) {
    std::vector<long> source(to->size(), -1);
    std::vector<int> alpha(static_cast<std::size_t>(from.dims()));
    for (std::size_t k = 0; k < to->size(); ++k) {
      auto e = to->exponent(k);
      std::fill(alpha.begin(), alpha.end(), 0);
      int total = 0, mapped = 0;
      for (int v : e) total += v;
      for (int v = 0; v < from.dims(); ++v) {
        const int t = map[static_cast<std::size_t>(v)];
        if (t >= 0) mapped += alpha[static_cast<std::size_t>(v)] = e[static_cast<std::size_t>(t)];
      }
      if (mapped == total) source[k] = static_cast<long>(from.index(alpha));
    }
    it = cache.emplace(std::move(key), std::move(source)).first;
  }
  Jet j(to);
  for (std::size_t k = 0; k < to->size(); ++k)
    if (it->second[k] >= 0) j.coeffs()[k] = c[static_cast<std::size_t>(it->second[k])];
  return j;
}

double lambda_sq(std::span<const double> p) {
  double s = 1.0;
  for (double v : p) s += v * v;
  return s;
}

// D = |grad_y phi|^2 + |grad_t phi|^2.
double gradient_D(const PhaseField& phi, std::span<const double> point) {
  auto g = phi.gradient(point);
  return g.y.squaredNorm() + g.theta.squaredNorm();
}

std::vector<int> active_map(const PhaseField& phi) {
  const int n = phi.n(), N = phi.N();
  std::vector<int> active(static_cast<std::size_t>(phi.dims()), -1);
  for (int i = 0; i < n; ++i) active[static_cast<std::size_t>(n + i)] = i;
  for (int j = 0; j < N; ++j) active[static_cast<std::size_t>(2 * n + j)] = n + j;
  return active;
}

struct PhaseJets {
  cplx phi;
  std::vector<Jet> grad;  // d phi / d v, v over (y, t)
  std::vector<Jet> c;     // grad / (i D)
  Jet D;
};

PhaseJets make_phase_jets(const PhaseField& phi, std::span<const double> point, int K) {
  const int m = phi.n() + phi.N();
  auto hi = jet_space(m, K + 1);
  auto lo = jet_space(m, K);
  const auto active = active_map(phi);
  Tape::JetWork work;
  Jet full = to_jet(hi, phi.tape().eval_jet(*hi, point, active, work));
  PhaseJets r;
  r.phi = full.value();
  r.D = Jet(lo, 0.0);
  for (int v = 0; v < m; ++v) {
    r.grad.push_back(truncate(derivative(full, v), lo));
    r.D += r.grad.back() * r.grad.back();
  }
  const Jet inv = compose(r.D * cplx(0.0, 1.0), taylor_pow(cplx(0.0, r.D.value().real()), -1.0, K));
  for (int v = 0; v < m; ++v) r.c.push_back(r.grad[static_cast<std::size_t>(v)] * inv);
  return r;
}

// (tL)^k w = (-sum_v d_v (c_v .))^k w; exact at the expansion point when w has order >= k.
Jet transpose_power(const std::vector<Jet>& c, Jet w, int k) {
  const int m = static_cast<int>(c.size());
  for (int s = 0; s < k; ++s) {
    Jet next(w.space_ptr(), 0.0);
    for (int v = 0; v < m; ++v) next -= derivative(c[static_cast<std::size_t>(v)] * w, v);
    w = std::move(next);
  }
  return w;
}

/// Uniform nodes on [-R, R] with step at most h (odd count, endpoints included).
std::vector<double> nodes(double R, double h) {
  if (R <= 0) return {0.0};
  const int half = std::max(1, static_cast<int>(std::ceil(R / h)));
  std::vector<double> v(static_cast<std::size_t>(2 * half + 1));
  for (int j = -half; j <= half; ++j) v[static_cast<std::size_t>(j + half)] = R * j / half;
  return v;
}

double raised_cosine(double u, double fraction) {
  const double a = std::abs(u);
  if (a >= 1.0) return 0.0;
  if (fraction <= 0 || a <= 1.0 - fraction) return 1.0;
  return 0.5 * (1.0 + std::cos(kPi * (a - (1.0 - fraction)) / fraction));
}

// Sampled max |d phi / dy_i| and |d phi / dt_j| over the (y, t) box at fixed x.
std::pair<double, double> phase_bandwidth(const PhaseField& phi, std::span<const double> x, double Ry,
                                          double Rt) {
  const int n = phi.n(), N = phi.N(), m = n + N;
  int per_axis = 33;
  while (per_axis > 3 && std::pow(per_axis, m) > 2e5) per_axis -= 2;
  std::vector<double> point(static_cast<std::size_t>(phi.dims()));
  std::copy(x.begin(), x.end(), point.begin());
  std::size_t total = 1;
  for (int d = 0; d < m; ++d) total *= static_cast<std::size_t>(per_axis);
  double by = 0.0, bt = 0.0;
  for (std::size_t lin = 0; lin < total; ++lin) {
    std::size_t rem = lin;
    for (int d = 0; d < m; ++d) {
      const int j = static_cast<int>(rem % static_cast<std::size_t>(per_axis));
      rem /= static_cast<std::size_t>(per_axis);
      const double R = d < n ? Ry : Rt;
      point[static_cast<std::size_t>(n + d)] = -R + 2.0 * R * j / (per_axis - 1);
    }
    auto g = phi.gradient(point);
    by = std::max(by, g.y.cwiseAbs().maxCoeff());
    bt = std::max(bt, g.theta.cwiseAbs().maxCoeff());
  }
  // The lattice misses interior maxima between nodes; pad slightly.
  return {1.05 * by, 1.05 * bt};
}

struct TensorGrid {
  std::vector<std::vector<double>> axes;   // y axes then t axes
  std::vector<std::vector<double>> weights;
  std::size_t total() const {
    std::size_t t = 1;
    for (const auto& a : axes) t *= a.size();
    return t;
  }
};

// sum over the tensor grid of w * f(point), tiled and pairwise combined.
template <class F>
cplx tensor_sum(const TensorGrid& g, std::span<const double> x, int dims, F&& f) {
  const std::size_t total = g.total();
  const int m = static_cast<int>(g.axes.size());
  const int n = static_cast<int>(x.size());
  constexpr std::size_t kTile = 1024;
  std::vector<cplx> partial(tile_count(total, kTile));
  parallel_tiles(total, kTile, [&](std::size_t lo, std::size_t hi, std::size_t t) {
    std::vector<double> point(static_cast<std::size_t>(dims));
    std::copy(x.begin(), x.end(), point.begin());
    cplx s = 0.0;
    for (std::size_t lin = lo; lin < hi; ++lin) {
      std::size_t rem = lin;
      double w = 1.0;
      for (int d = m - 1; d >= 0; --d) {
        const auto& ax = g.axes[static_cast<std::size_t>(d)];
        const std::size_t j = rem % ax.size();
        rem /= ax.size();
        point[static_cast<std::size_t>(n + d)] = ax[j];
        w *= g.weights[static_cast<std::size_t>(d)][j];
      }
      if (w != 0.0) s += w * f(std::span<const double>(point));
    }
    partial[t] = s;
  });
  return pairwise_sum(partial);
}

std::vector<double> uniform_weights(const std::vector<double>& ax) {
  const double h = ax.size() > 1 ? ax[1] - ax[0] : 1.0;
  return std::vector<double>(ax.size(), h);
}

cplx amplitude(const SymbolField& a, const PhaseField& phi, std::span<const double> point) {
  if (a.dim() == phi.dims()) return a(point);
  const int n = phi.n(), N = phi.N();
  std::vector<double> p(static_cast<std::size_t>(n + N));
  for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = point[static_cast<std::size_t>(i)];
  for (int j = 0; j < N; ++j) p[static_cast<std::size_t>(n + j)] = point[static_cast<std::size_t>(2 * n + j)];
  return a(p);
}

void check_inputs(const SymbolField& a, const PhaseField& phi, const SymbolField& f, std::span<const double> x) {
  const int n = phi.n(), N = phi.N();
  if (a.dim() != 2 * n + N && a.dim() != n + N)
    throw OscError("amplitude must be a field over (x, y, t) or (x, t)");
  if (f.dim() != n) throw OscError("test function must be a field over y");
  if (static_cast<int>(x.size()) != n) throw OscError("x has the wrong dimension");
}

}  // namespace

// ---------------------------------------------------------------- chi

double chi(double t) {
  const double a = std::abs(t);
  if (a <= 1.0) return 1.0;
  if (a >= 2.0) return 0.0;
  const double s = 2.0 - a;  // in (0, 1)
  const double r = 1.0 / s - 1.0 / (1.0 - s);
  if (r > 700) return 0.0;
  if (r < -700) return 1.0;
  return 1.0 / (1.0 + std::exp(r));
}

std::vector<cplx> taylor_chi(double t0, int order) {
  std::vector<cplx> c(static_cast<std::size_t>(order + 1), 0.0);
  const double a = std::abs(t0);
  if (a <= 1.0 || a >= 2.0) {
    c[0] = a <= 1.0 ? 1.0 : 0.0;
    return c;
  }
  const double s0 = 2.0 - a;
  const double r0 = 1.0 / s0 - 1.0 / (1.0 - s0);
  if (r0 > 700 || r0 < -700) {
    c[0] = chi(t0);
    return c;
  }
  auto space = jet_space(1, order);
  Jet t = Jet::variable(space, 0, a);
  Jet s = Jet(space, 2.0) - t;
  Jet one(space, 1.0);
  Jet r = one / s - one / (one - s);
  // 1 / (1 + e^r), written so that no intermediate jet overflows.
  Jet v;
  if (r0 > 0) {
    Jet E = exp(-r);
    v = E / (one + E);
  } else {
    v = one / (one + exp(r));
  }
  for (int j = 0; j <= order; ++j) {
    const cplx cj = v.coeffs()[static_cast<std::size_t>(j)];
    c[static_cast<std::size_t>(j)] = (t0 < 0 && j % 2 == 1) ? -cj : cj;
  }
  return c;
}

std::string to_string(CutoffKind k) { return k == CutoffKind::Gaussian ? "GAUSSIAN" : "SMOOTH_BUMP"; }

CutoffKind cutoff_from_string(const std::string& s) {
  if (s == "GAUSSIAN") return CutoffKind::Gaussian;
  if (s == "SMOOTH_BUMP") return CutoffKind::SmoothBump;
  throw OscError("unknown cutoff kind '" + s + "'");
}

double CutoffSpec::operator()(std::span<const double> v) const {
  double r2 = 0.0;
  for (double t : v) r2 += t * t;
  return kind == CutoffKind::Gaussian ? std::exp(-r2) : chi(std::sqrt(r2));
}

double CutoffSpec::support(double level) const {
  return kind == CutoffKind::Gaussian ? std::sqrt(-std::log(level)) : 2.0;
}

double omega_partition(const PhaseField& phi, double eps, std::span<const double> point) {
  if (!(eps > 0)) throw OscError("omega_partition: eps must be positive");
  return chi(gradient_D(phi, point) / (eps * lambda_sq(point)));
}

// ---------------------------------------------------------------- IBP operator

IBPOperator::IBPOperator(PhaseField phi, double eps0) : phi_(std::move(phi)), eps0_(eps0) {
  if (!(eps0 > 0)) throw OscError("eps0 must be positive");
}

IBPOperator ibp_operator(const PhaseField& phi, double eps0) { return IBPOperator(phi, eps0); }

bool IBPOperator::in_omega0(std::span<const double> point) const {
  return gradient_D(phi_, point) >= eps0_ * lambda_sq(point);
}

IBPCoefficients IBPOperator::coefficients(std::span<const double> point) const {
  if (!in_omega0(point)) throw OscError("point outside Omega_0");
  const int n = phi_.n(), N = phi_.N();
  auto pj = make_phase_jets(phi_, point, 1);
  IBPCoefficients r;
  r.D = pj.D.value().real();
  r.lambda = std::sqrt(lambda_sq(point));
  for (int v = 0; v < n + N; ++v) {
    const cplx F = -pj.c[static_cast<std::size_t>(v)].value();
    (v < n ? r.F : r.G).push_back(F);
  }
  // H = -sum_v d_v c_v; the Laplacian part keeps only d_v grad_v / (i D).
  cplx H = 0.0, lap = 0.0;
  for (int v = 0; v < n + N; ++v) {
    const auto lin = pj.c[0].space().linear_index(v);
    H -= pj.c[static_cast<std::size_t>(v)].coeffs()[lin];
    lap += pj.grad[static_cast<std::size_t>(v)].coeffs()[lin];
  }
  r.H = H;
  r.H_laplacian = -lap / cplx(0.0, r.D);
  return r;
}

cplx IBPOperator::L_on_exponential(std::span<const double> point) const {
  const int m = phi_.n() + phi_.N();
  auto pj = make_phase_jets(phi_, point, 1);
  // E = e^{i phi} as a first-order jet; L E = (i D)^{-1} sum grad_v d_v E.
  Jet iphi(pj.grad[0].space_ptr(), cplx(0.0, 1.0) * pj.phi);
  for (int v = 0; v < m; ++v)
    iphi.coeffs()[iphi.space().linear_index(v)] = cplx(0.0, 1.0) * pj.grad[static_cast<std::size_t>(v)].value();
  const Jet E = exp(iphi);
  cplx LE = 0.0;
  for (int v = 0; v < m; ++v)
    LE += pj.grad[static_cast<std::size_t>(v)].value() * E.coeffs()[E.space().linear_index(v)];
  LE /= cplx(0.0, pj.D.value().real());
  return LE / E.value();
}

cplx IBPOperator::apply_transpose(std::span<const double> point, std::span<const cplx> b, int k) const {
  if (k < 0) throw OscError("negative integration-by-parts order");
  if (!in_omega0(point)) throw OscError("point outside Omega_0");
  const int m = phi_.n() + phi_.N();
  auto space = jet_space(m, k);
  if (b.size() < space->size()) throw OscError("jet of b has too low an order");
  auto pj = make_phase_jets(phi_, point, k);
  return transpose_power(pj.c, to_jet(space, b), k).value();
}

std::map<MultiIndex, cplx> IBPOperator::iterated_coefficients(std::span<const double> point, int k) const {
  if (!in_omega0(point)) throw OscError("point outside Omega_0");
  const int m = phi_.n() + phi_.N();
  auto space = jet_space(m, k);
  auto pj = make_phase_jets(phi_, point, k);
  std::map<MultiIndex, cplx> out;
  for (std::size_t g = 0; g < space->size(); ++g) {
    Jet b(space, 0.0);
    b.coeffs()[g] = 1.0;  // b = (v - p)^gamma, d^gamma b(p) = gamma!
    auto e = space->exponent(g);
    out[MultiIndex(e.begin(), e.end())] = transpose_power(pj.c, b, k).value() / space->factorial(g);
  }
  return out;
}

cplx IBPOperator::integrand(const SymbolField& a, const SymbolField& f, std::span<const double> point,
                            int k) const {
  const int n = phi_.n(), N = phi_.N(), m = n + N;
  const std::span<const double> y = point.subspan(static_cast<std::size_t>(n), static_cast<std::size_t>(n));
  const double l2 = lambda_sq(point);
  const double q0 = gradient_D(phi_, point) / (eps0_ * l2);
  const cplx e = std::exp(cplx(0.0, phi_(point)));
  if (k == 0 || q0 <= 1.0) return e * amplitude(a, phi_, point) * f(y);

  auto space = jet_space(m, k);
  auto pj = make_phase_jets(phi_, point, k);

  // a over (x, y, t) or (x, t), restricted to the active (y, t) variables.
  Jet aj;
  {
    std::vector<double> pa;
    std::vector<int> map;
    if (a.dim() == phi_.dims()) {
      pa.assign(point.begin(), point.end());
      map = active_map(phi_);
    } else {
      for (int i = 0; i < n; ++i) pa.push_back(point[static_cast<std::size_t>(i)]);
      for (int j = 0; j < N; ++j) pa.push_back(point[static_cast<std::size_t>(2 * n + j)]);
      map.assign(static_cast<std::size_t>(n), -1);
      for (int j = 0; j < N; ++j) map.push_back(n + j);
    }
    auto as = jet_space(a.dim(), k);
    aj = remap(taylor_coefficients(a, pa, *as), *as, map, space);
  }
  Jet fj;
  {
    auto fs = jet_space(n, k);
    std::vector<int> map(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) map[static_cast<std::size_t>(i)] = i;
    fj = remap(taylor_coefficients(f, y, *fs), *fs, map, space);
  }
  // omega = chi(D / (eps0 lambda^2)).
  Jet lam(space, 1.0);
  for (int i = 0; i < phi_.dims(); ++i) {
    const double v = point[static_cast<std::size_t>(i)];
    if (i < n) {
      lam += Jet(space, v * v);
    } else {
      Jet var = Jet::variable(space, i - n, v);
      lam += var * var;
    }
  }
  const Jet q = pj.D / (lam * cplx(eps0_));
  const Jet omega = compose(q, taylor_chi(q0, k));
  const Jet u = aj * fj;
  const Jet rest = transpose_power(pj.c, (Jet(space, 1.0) - omega) * u, k);
  return e * (omega.value() * u.value() + rest.value());
}

// ---------------------------------------------------------------- quadrature

std::pair<cplx, std::optional<double>> extrapolate_limit(std::span<const double> sigma, std::span<const cplx> values,
                                                         double floor) {
  const std::size_t s = values.size();
  if (s == 0) throw OscError("empty schedule");
  if (s < 3) return {values.back(), std::nullopt};
  const cplx d1 = values[s - 2] - values[s - 3], d2 = values[s - 1] - values[s - 2];
  const double scale = std::max(1.0, std::abs(values.back()));
  if (std::abs(d2) <= floor * scale) return {values.back(), std::nullopt};
  const double ratio = sigma[s - 1] / sigma[s - 2];
  double p = std::log(std::abs(d1) / std::abs(d2)) / std::log(ratio);
  if (!(p > 0)) return {values.back(), p};
  // Smooth cutoffs give expansions in integer powers of 1/sigma; the sampled
  // rate carries the next term, so snap it when it is close.
  if (std::abs(p - std::round(p)) < 0.15) p = std::round(p);
  // Romberg table in powers sigma^{-p}, sigma^{-2p}, sigma^{-3p}.
  std::vector<cplx> T(values.begin(), values.end());
  const std::size_t levels = std::min<std::size_t>(3, s - 1);
  for (std::size_t l = 1; l <= levels; ++l) {
    const double fac = std::pow(ratio, p * static_cast<double>(l)) - 1.0;
    for (std::size_t i = s - 1; i >= l; --i) T[i] = T[i] + (T[i] - T[i - 1]) / fac;
  }
  return {T[s - 1], p};
}

cplx regularized_value(const SymbolField& a, const PhaseField& phi, const SymbolField& f, std::span<const double> x,
                       double sigma, const CutoffSpec& cutoff, const OscQuadrature& q, std::size_t* points) {
  check_inputs(a, phi, f, x);
  if (!(sigma > 0)) throw OscError("sigma must be positive");
  const int n = phi.n(), N = phi.N();
  const double Rt = sigma * cutoff.support(q.cutoff_level);
  const double Ry = std::min(q.y_radius, Rt);
  const auto [by, bt] = phase_bandwidth(phi, x, Ry, Rt);
  const double hy = 2 * kPi / (by + q.margin), ht = 2 * kPi / (bt + q.margin);
  TensorGrid g;
  for (int i = 0; i < n; ++i) g.axes.push_back(nodes(Ry, hy));
  for (int j = 0; j < N; ++j) g.axes.push_back(nodes(Rt, ht));
  for (const auto& ax : g.axes) g.weights.push_back(uniform_weights(ax));
  if (g.total() > q.max_points) throw OscError("quadrature grid exceeds the point budget");
  if (points) *points = g.total();
  std::vector<double> v(static_cast<std::size_t>(phi.dims()));
  const double norm = std::pow(2 * kPi, -N);
  cplx s = tensor_sum(g, x, phi.dims(), [&](std::span<const double> p) {
    std::vector<double> scaled(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) scaled[i] = p[i] / sigma;
    const double gv = cutoff(scaled);
    if (gv == 0.0) return cplx(0.0);
    return std::exp(cplx(0.0, phi(p))) * gv * amplitude(a, phi, p) *
           f(p.subspan(static_cast<std::size_t>(n), static_cast<std::size_t>(n)));
  });
  return s * norm;
}

namespace {

struct ScheduleRun {
  std::vector<cplx> values;
  cplx limit;
  std::optional<double> rate;
  std::vector<double> residuals;
  std::size_t points = 0;
};

ScheduleRun run_schedule(const SymbolField& a, const PhaseField& phi, const SymbolField& f, std::span<const double> x,
                         std::span<const double> schedule, const CutoffSpec& cutoff, const OscQuadrature& q) {
  ScheduleRun r;
  for (double s : schedule) {
    std::size_t pts = 0;
    r.values.push_back(regularized_value(a, phi, f, x, s, cutoff, q, &pts));
    r.points = std::max(r.points, pts);
  }
  auto [lim, rate] = extrapolate_limit(schedule, r.values, q.residual_floor);
  r.limit = lim;
  r.rate = rate;
  for (const cplx& v : r.values) r.residuals.push_back(std::abs(v - lim));
  return r;
}

// Residual pairs compare as decreasing once both sit below the floor.
bool decreasing(double prev, double next, double floor) { return next < prev || (next <= floor && prev <= floor); }

}  // namespace

OscIntegralResult regularized_fio_apply(const SymbolField& a, const PhaseField& phi, const SymbolField& f,
                                        std::span<const double> x, std::span<const double> schedule,
                                        const CutoffSpec& cutoff, const OscQuadrature& q, bool compare_cutoffs) {
  if (schedule.empty()) throw OscError("empty sigma schedule");
  for (std::size_t i = 1; i < schedule.size(); ++i)
    if (!(schedule[i] > schedule[i - 1])) throw OscError("sigma schedule must be increasing");
  ScheduleRun run = run_schedule(a, phi, f, x, schedule, cutoff, q);
  OscIntegralResult r;
  r.value = run.limit;
  r.rate = run.rate;
  r.cutoff = cutoff.kind;
  r.points = run.points;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    r.values.emplace_back(schedule[i], run.values[i]);
    r.sigma_residuals.emplace_back(schedule[i], run.residuals[i]);
  }
  const double floor = q.residual_floor * std::max(1.0, std::abs(run.limit));
  const std::size_t s = schedule.size();
  std::size_t onset = s - 1;
  while (onset > 0 && decreasing(run.residuals[onset - 1], run.residuals[onset], floor)) --onset;
  r.convergence_onset = schedule[onset];

  bool ok = true;
  if (s >= 3) {
    const double d1 = std::abs(run.values[s - 2] - run.values[s - 3]);
    const double d2 = std::abs(run.values[s - 1] - run.values[s - 2]);
    ok = onset + 3 <= s && decreasing(d1, d2, floor);
  }
  if (!ok) {
    std::ostringstream msg;
    msg << "sigma residuals do not decrease over the last three values of the schedule";
    throw NonConvergence(msg.str(), r.sigma_residuals);
  }
  if (compare_cutoffs) {
    CutoffSpec other{cutoff.kind == CutoffKind::Gaussian ? CutoffKind::SmoothBump : CutoffKind::Gaussian};
    ScheduleRun o = run_schedule(a, phi, f, x, schedule, other, q);
    r.cutoff_gap = std::abs(o.values.back() - run.values.back());
    r.other_value_residual = o.residuals.back();
  }
  return r;
}

namespace {

/// Gauss-Legendre nodes and weights on [-1, 1].
std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int p) {
  std::vector<double> x(static_cast<std::size_t>(p)), w(static_cast<std::size_t>(p));
  for (int i = 0; i < p; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (p + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int j = 2; j <= p; ++j) {
        const double p2 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = p * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[static_cast<std::size_t>(i)] = z;
    w[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return {x, w};
}

/// Breakpoints on [lo, hi] with panels of width at most w, always including `extra` points inside.
std::vector<double> breakpoints(double lo, double hi, double w, std::vector<double> extra = {}) {
  std::vector<double> cuts{lo};
  extra.push_back(hi);
  std::sort(extra.begin(), extra.end());
  for (double e : extra) {
    if (e <= cuts.back() || e > hi) continue;
    const double a = cuts.back();
    const int pieces = std::max(1, static_cast<int>(std::ceil((e - a) / w - 1e-12)));
    for (int i = 1; i <= pieces; ++i) cuts.push_back(i == pieces ? e : a + (e - a) * i / pieces);
  }
  return cuts;
}

// Tensor Gauss-Legendre cubature of the integration-by-parts integrand, with
// recursive bisection of cells that meet the partition's transition zone
// 1 < D / (eps0 lambda^2) < 2 until successive refinements agree.
class IbpCubature {
 public:
  IbpCubature(const SymbolField& a, const IBPOperator& L, const SymbolField& f, std::span<const double> x, int k,
              double R, const OscQuadrature& q)
      : a_(a), L_(L), f_(f), x_(x.begin(), x.end()), k_(k), R_(R), q_(q) {
    const int m = L.phase().n() + L.phase().N();
    order_ = m <= 2 ? 16 : 8;
    max_depth_ = m <= 2 ? 12 : 4;
    rules_[0] = gauss_legendre(order_);
    rules_[1] = gauss_legendre(std::max(4, order_ / 2));
  }

  struct CellValue {
    cplx value;
    bool transition = false;
  };

  // Rule 0 on top-level cells, rule 1 (half the order) on refined ones.
  CellValue rule(std::span<const double> lo, std::span<const double> hi, int which = 0) const {
    const PhaseField& phi = L_.phase();
    const int n = phi.n(), m = n + phi.N();
    const auto& [gx, gw] = rules_[which];
    const auto p = gx.size();
    std::size_t total = 1;
    for (int d = 0; d < m; ++d) total *= p;
    std::vector<double> point(static_cast<std::size_t>(phi.dims()));
    std::copy(x_.begin(), x_.end(), point.begin());
    CellValue out;
    bool below = false, above = false;
    cplx s = 0.0;
    for (std::size_t lin = 0; lin < total; ++lin) {
      std::size_t rem = lin;
      double w = 1.0;
      for (int d = m - 1; d >= 0; --d) {
        const std::size_t j = rem % p;
        rem /= p;
        const auto du = static_cast<std::size_t>(d);
        const double half = 0.5 * (hi[du] - lo[du]);
        const double c = lo[du] + half * (1.0 + gx[j]);
        point[static_cast<std::size_t>(n + d)] = c;
        w *= half * gw[j];
        if (d >= n) w *= raised_cosine(c / R_, q_.taper_fraction);
      }
      const double qv = gradient_D(phi, point) / (L_.eps0() * lambda_sq(point));
      if (qv < 2.0) below = true;
      if (qv > 1.0) above = true;
      if (w != 0.0) s += w * L_.integrand(a_, f_, point, k_);
    }
    out.value = s;
    out.transition = k_ > 0 && below && above;
    return out;
  }

  cplx refine(std::vector<double> lo, std::vector<double> hi, cplx base, int depth) const {
    const int m = static_cast<int>(lo.size());
    const std::size_t children = std::size_t{1} << m;
    std::vector<std::vector<double>> clo(children), chi_(children);
    std::vector<CellValue> vals(children);
    cplx sum = 0.0;
    for (std::size_t c = 0; c < children; ++c) {
      clo[c] = lo;
      chi_[c] = hi;
      for (int d = 0; d < m; ++d) {
        const auto du = static_cast<std::size_t>(d);
        const double mid = 0.5 * (lo[du] + hi[du]);
        if ((c >> d) & 1U) {
          clo[c][du] = mid;
        } else {
          chi_[c][du] = mid;
        }
      }
      vals[c] = rule(clo[c], chi_[c], 1);
      sum += vals[c].value;
    }
    if (depth >= max_depth_ || std::abs(sum - base) <= q_.ibp_tolerance) return sum;
    cplx total = 0.0;
    for (std::size_t c = 0; c < children; ++c)
      total += vals[c].transition ? refine(clo[c], chi_[c], vals[c].value, depth + 1) : vals[c].value;
    return total;
  }

  cplx cell(std::span<const double> lo, std::span<const double> hi) const {
    CellValue v = rule(lo, hi);
    if (!v.transition) return v.value;
    return refine(std::vector<double>(lo.begin(), lo.end()), std::vector<double>(hi.begin(), hi.end()), v.value, 0);
  }

  int order() const { return order_; }

 private:
  const SymbolField& a_;
  const IBPOperator& L_;
  const SymbolField& f_;
  std::vector<double> x_;
  int k_;
  double R_;
  const OscQuadrature& q_;
  int order_ = 16, max_depth_ = 12;
  std::pair<std::vector<double>, std::vector<double>> rules_[2];
};

}  // namespace

OscIntegralResult fio_apply_ibp(const SymbolField& a, const IBPOperator& L, const SymbolField& f,
                                std::span<const double> x, int k, double R, const OscQuadrature& q) {
  const PhaseField& phi = L.phase();
  check_inputs(a, phi, f, x);
  if (k < 0) throw OscError("negative integration-by-parts order");
  if (k > std::min(a.max_order(), f.max_order()))
    throw OscError("integration-by-parts order exceeds the available derivative depth");
  if (!(R > 0)) throw OscError("truncation radius must be positive");
  const int n = phi.n(), N = phi.N(), m = n + N;
  const double Ry = std::min(q.y_radius, R);
  const auto [by, bt] = phase_bandwidth(phi, x, Ry, R);
  // Panels carry at most q.panel_phase radians of phase.
  const double wy = std::min(q.panel_width, q.panel_phase / std::max(by, 1.0));
  const double wt = std::min(q.panel_width, q.panel_phase / std::max(bt, 1.0));
  const double inner = (1.0 - q.taper_fraction) * R;
  std::vector<std::vector<double>> cuts;
  for (int i = 0; i < n; ++i) cuts.push_back(breakpoints(-Ry, Ry, wy));
  for (int j = 0; j < N; ++j) cuts.push_back(breakpoints(-R, R, wt, {-inner, inner}));
  std::size_t cells = 1;
  for (const auto& c : cuts) cells *= c.size() - 1;

  IbpCubature cub(a, L, f, x, k, R, q);
  std::size_t per_cell = 1;
  for (int d = 0; d < m; ++d) per_cell *= static_cast<std::size_t>(cub.order());
  if (cells * per_cell > q.max_points) throw OscError("quadrature grid exceeds the point budget");
  std::vector<cplx> partial(cells);
  parallel_tiles(cells, 1, [&](std::size_t lo_i, std::size_t, std::size_t t) {
    std::vector<double> lo(static_cast<std::size_t>(m)), hi(static_cast<std::size_t>(m));
    std::size_t rem = lo_i;
    for (int d = m - 1; d >= 0; --d) {
      const auto& c = cuts[static_cast<std::size_t>(d)];
      const std::size_t j = rem % (c.size() - 1);
      rem /= c.size() - 1;
      lo[static_cast<std::size_t>(d)] = c[j];
      hi[static_cast<std::size_t>(d)] = c[j + 1];
    }
    partial[t] = cub.cell(lo, hi);
  });
  OscIntegralResult r;
  r.value = pairwise_sum(partial) * std::pow(2 * kPi, -N);
  r.ibp_order = k;
  r.truncation_radius = R;
  r.eps0 = L.eps0();
  r.points = cells * per_cell;
  return r;
}

TailEstimate ibp_tail(const SymbolField& a, const IBPOperator& L, const SymbolField& f, std::span<const double> x,
                      int k, std::span<const double> radii, const OscQuadrature& q) {
  const PhaseField& phi = L.phase();
  check_inputs(a, phi, f, x);
  if (radii.size() < 2) throw OscError("tail estimate needs at least two radii");
  const int n = phi.n(), N = phi.N();
  TailEstimate t;
  t.k = k;
  t.predicted = k - N;
  for (double R : radii) {
    const double outer = q.tail_factor * R;
    // Per axis: panels [-outer, -R], [-R, R], [R, outer] with trapezoid weights,
    // summing every block except the central one. y stays within y_radius.
    auto panel = [](double lo, double hi, int intervals) {
      std::pair<std::vector<double>, std::vector<double>> p;
      const double h = (hi - lo) / intervals;
      for (int i = 0; i <= intervals; ++i) {
        p.first.push_back(lo + h * i);
        p.second.push_back((i == 0 || i == intervals) ? h / 2 : h);
      }
      return p;
    };
    std::vector<std::vector<std::pair<std::vector<double>, std::vector<double>>>> axes;
    for (int i = 0; i < n; ++i) {
      const double Ry = std::min(q.y_radius, outer);
      std::vector<std::pair<std::vector<double>, std::vector<double>>> ps;
      const int per_unit = 8;
      if (Ry <= R) {
        ps.push_back(panel(-Ry, Ry, static_cast<int>(std::ceil(2 * Ry * per_unit))));
      } else {
        ps.push_back(panel(-R, R, static_cast<int>(std::ceil(2 * R * per_unit))));
        ps.push_back(panel(-Ry, -R, static_cast<int>(std::ceil((Ry - R) * per_unit))));
        ps.push_back(panel(R, Ry, static_cast<int>(std::ceil((Ry - R) * per_unit))));
      }
      axes.push_back(std::move(ps));
    }
    for (int j = 0; j < N; ++j) {
      std::vector<std::pair<std::vector<double>, std::vector<double>>> ps;
      ps.push_back(panel(-R, R, 128));
      ps.push_back(panel(-outer, -R, 192));
      ps.push_back(panel(R, outer, 192));
      axes.push_back(std::move(ps));
    }
    const int m = n + N;
    std::size_t blocks = 1;
    for (const auto& ax : axes) blocks *= ax.size();
    double mass = 0.0;
    for (std::size_t b = 1; b < blocks; ++b) {  // block 0 is the central box
      TensorGrid g;
      std::size_t rem = b;
      for (int d = 0; d < m; ++d) {
        const auto& ax = axes[static_cast<std::size_t>(d)];
        const auto& p = ax[rem % ax.size()];
        rem /= ax.size();
        g.axes.push_back(p.first);
        g.weights.push_back(p.second);
      }
      if (g.total() > q.max_points) throw OscError("quadrature grid exceeds the point budget");
      mass += tensor_sum(g, x, phi.dims(), [&](std::span<const double> p) {
                return cplx(std::abs(L.integrand(a, f, p, k)));
              }).real();
    }
    t.mass.emplace_back(R, mass * std::pow(2 * kPi, -N));
  }
  const auto& [R1, m1] = t.mass[t.mass.size() - 2];
  const auto& [R2, m2] = t.mass.back();
  t.slope = std::log(m1 / m2) / std::log(R2 / R1);
  return t;
}

// ---------------------------------------------------------------- eps0 and checks

namespace {

int lattice_points(int requested, int dims, double budget = 2e5) {
  int p = requested;
  while (p > 3 && std::pow(p, dims) > budget) p -= 2;
  return p;
}

template <class F>
void scan_lattice(int dims, double R, int per_axis, F&& f) {
  std::size_t total = 1;
  for (int d = 0; d < dims; ++d) total *= static_cast<std::size_t>(per_axis);
  std::vector<double> p(static_cast<std::size_t>(dims));
  for (std::size_t lin = 0; lin < total; ++lin) {
    std::size_t rem = lin;
    for (int d = 0; d < dims; ++d) {
      const int j = static_cast<int>(rem % static_cast<std::size_t>(per_axis));
      rem /= static_cast<std::size_t>(per_axis);
      p[static_cast<std::size_t>(d)] = -R + 2.0 * R * j / (per_axis - 1);
    }
    f(std::span<const double>(p));
  }
}

}  // namespace

double majoration_constant(const PhaseField& phi, double eps, const HypothesisGrid& grid, double y_min,
                           std::vector<double>* witness) {
  if (!(eps > 0)) throw OscError("eps must be positive");
  const int n = phi.n();
  const double R = grid.radii.empty() ? 16.0 : grid.radii.back();
  double C = 0.0;
  scan_lattice(phi.dims(), R, lattice_points(grid.points, phi.dims()), [&](std::span<const double> p) {
    double y2 = 0.0;
    for (int i = 0; i < n; ++i) y2 += p[static_cast<std::size_t>(n + i)] * p[static_cast<std::size_t>(n + i)];
    if (y2 < y_min * y_min) return;
    const double l2 = lambda_sq(p);
    if (gradient_D(phi, p) >= 2.0 * eps * l2) return;  // outside supp omega_eps
    const double c = l2 / y2;
    if (c > C) {
      C = c;
      if (witness) witness->assign(p.begin(), p.end());
    }
  });
  return C;
}

Eps0Choice choose_eps0(const PhaseField& phi, const HypothesisGrid& grid, double cap, std::vector<double> candidates) {
  if (candidates.empty()) throw OscError("no eps0 candidates");
  std::sort(candidates.begin(), candidates.end(), std::greater<>());
  Eps0Choice c;
  for (double e : candidates) {
    std::vector<double> w;
    const double C = majoration_constant(phi, e, grid, 0.5, &w);
    c.constants[e] = C;
    if (C < cap) {
      c.eps0 = e;
      c.admissible = true;
      return c;
    }
    c.witness = w;
  }
  c.eps0 = candidates.back();
  return c;
}

void to_json(nlohmann::json& j, const Eps0Choice& c) {
  j = {{"eps0", c.eps0}, {"admissible", c.admissible}};
  auto t = nlohmann::json::array();
  for (const auto& [e, C] : c.constants) t.push_back({{"eps", e}, {"C", C}});
  j["constants"] = t;
  if (c.witness) j["witness"] = *c.witness;
}

HypothesisReport verify_ibp_coefficients(const IBPOperator& L, const HypothesisGrid& grid) {
  const PhaseField& phi = L.phase();
  const int n = phi.n(), N = phi.N();
  HypothesisReport r;
  r.name = "IBP coefficient decay";
  std::vector<std::string> labels;
  for (int i = 0; i < n; ++i) labels.push_back("F" + std::to_string(i + 1) + "*lambda");
  for (int j = 0; j < N; ++j) labels.push_back("G" + std::to_string(j + 1) + "*lambda");
  labels.push_back("H*lambda^2");
  std::vector<std::vector<double>> per_box;
  std::vector<double> worst_at;
  double worst = 0.0;
  const int pts = lattice_points(grid.points, phi.dims());
  for (double R : grid.radii) {
    std::vector<double> C(labels.size(), 0.0);
    scan_lattice(phi.dims(), R, pts, [&](std::span<const double> p) {
      if (!L.in_omega0(p)) return;
      auto c = L.coefficients(p);
      std::vector<double> v;
      for (const auto& F : c.F) v.push_back(std::abs(F) * c.lambda);
      for (const auto& G : c.G) v.push_back(std::abs(G) * c.lambda);
      v.push_back(std::abs(c.H) * c.lambda * c.lambda);
      for (std::size_t i = 0; i < v.size(); ++i) {
        const double val = std::isfinite(v[i]) ? v[i] : std::numeric_limits<double>::infinity();
        if (val > C[i]) C[i] = val;
        if (val > worst) {
          worst = val;
          worst_at.assign(p.begin(), p.end());
        }
      }
    });
    per_box.push_back(C);
  }
  r.pass = true;
  std::ostringstream d;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double last = per_box.back()[i];
    r.constants[labels[i]] = last;
    double growth = 0.0;
    if (per_box.size() >= 2) {
      const double prev = per_box[per_box.size() - 2][i];
      const double R1 = grid.radii[grid.radii.size() - 2], R2 = grid.radii.back();
      if (prev > grid.floor && last > grid.floor) growth = std::log(last / prev) / std::log(R2 / R1);
    }
    r.growth[labels[i]] = growth;
    if (!(last <= grid.cap) || growth > grid.growth_tolerance) {
      r.pass = false;
      d << labels[i] << " = " << last << " (growth " << growth << "); ";
    }
  }
  if (!r.pass) r.witness = worst_at;
  d << "eps0 = " << L.eps0();
  r.detail = d.str();
  return r;
}

double L_identity_error(const IBPOperator& L, int count, double radius, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-radius, radius);
  std::vector<double> p(static_cast<std::size_t>(L.phase().dims()));
  double worst = 0.0;
  int found = 0;
  for (int tries = 0; found < count; ++tries) {
    if (tries > 1000 * count) throw OscError("too few Omega_0 points found");
    for (auto& v : p) v = u(rng);
    if (!L.in_omega0(p)) continue;
    ++found;
    worst = std::max(worst, std::abs(L.L_on_exponential(p) - 1.0));
  }
  return worst;
}

// ---------------------------------------------------------------- JSON

void to_json(nlohmann::json& j, const OscIntegralResult& r) {
  j = nlohmann::json::object();
  j["value"] = {{"re", r.value.real()}, {"im", r.value.imag()}};
  auto vals = nlohmann::json::array();
  for (const auto& [s, v] : r.values) vals.push_back({{"sigma", s}, {"re", v.real()}, {"im", v.imag()}});
  j["values"] = vals;
  auto res = nlohmann::json::array();
  for (const auto& [s, e] : r.sigma_residuals) res.push_back({{"sigma", s}, {"residual", e}});
  j["sigma_residuals"] = res;
  j["convergence_onset"] = r.convergence_onset ? nlohmann::json(*r.convergence_onset) : nlohmann::json();
  j["rate"] = r.rate ? nlohmann::json(*r.rate) : nlohmann::json();
  j["cutoff"] = to_string(r.cutoff);
  j["cutoff_gap"] = r.cutoff_gap ? nlohmann::json(*r.cutoff_gap) : nlohmann::json();
  j["other_cutoff_residual"] = r.other_value_residual ? nlohmann::json(*r.other_value_residual) : nlohmann::json();
  j["ibp_order"] = r.ibp_order;
  j["truncation_radius"] = r.truncation_radius ? nlohmann::json(*r.truncation_radius) : nlohmann::json();
  j["eps0"] = r.eps0;
  j["points"] = r.points;
}

void to_json(nlohmann::json& j, const TailEstimate& t) {
  j = {{"k", t.k}, {"slope", t.slope}, {"predicted", t.predicted}};
  auto m = nlohmann::json::array();
  for (const auto& [R, v] : t.mass) m.push_back({{"R", R}, {"mass", v}});
  j["mass"] = m;
}

}  // namespace fiolab

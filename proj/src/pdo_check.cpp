#include "fiolab/pdo_check.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "fiolab/parallel.hpp"
#include "fiolab/weights.hpp"

namespace fiolab {

namespace {

double abs_det(const Eigen::MatrixXd& m) { return std::abs(m.determinant()); }

std::size_t node_index(const GridSpec& g, std::span<const double> p) {
  if (static_cast<int>(p.size()) != g.dim) throw PdoError("extract_symbol: point dimension mismatch");
  const double h = g.spacing();
  std::size_t k = 0;
  for (int d = 0; d < g.dim; ++d) {
    const double j = (p[static_cast<std::size_t>(d)] + g.radius) / h;
    const double r = std::round(j);
    if (std::abs(j - r) > 1e-6 || r < 0 || r >= g.points)
      throw PdoError("extract_symbol: x is not a node of the row grid");
    k = k * static_cast<std::size_t>(g.points) + static_cast<std::size_t>(r);
  }
  return k;
}

}  // namespace

PredictedSymbol predicted_symbol(const GeneratingFunction& S, const SymbolField& a, std::span<const double> x,
                                 std::span<const double> theta, Composition which, double det_floor) {
  const double det = abs_det(S.mixed_hessian(x, theta));
  if (!(det >= det_floor)) {
    std::ostringstream s;
    s << "predicted_symbol: |det d2S/dxdt| = " << det << " below floor " << det_floor;
    throw PdoError(s.str());
  }
  std::vector<double> xt(x.begin(), x.end());
  xt.insert(xt.end(), theta.begin(), theta.end());
  const double amp = std::abs(a(xt));
  PredictedSymbol p;
  p.value = amp * amp / det;
  if (which == Composition::FFStar) {
    p.x.assign(x.begin(), x.end());
    auto g = S.grad_x(x, theta);
    p.xi.assign(g.data(), g.data() + g.size());
  } else {
    auto g = S.grad_theta(x, theta);
    p.x.assign(g.data(), g.data() + g.size());
    p.xi.assign(theta.begin(), theta.end());
  }
  return p;
}

std::vector<double> theta_inverse(const GeneratingFunction& S, std::span<const double> x, std::span<const double> xi,
                                  std::span<const double> guess, double det_floor, int* iterations) {
  const int n = S.n();
  Eigen::Map<const Eigen::VectorXd> target(xi.data(), n);
  std::vector<double> t(guess.begin(), guess.end());
  const double scale = std::max(1.0, target.norm());
  for (int it = 0; it <= 50; ++it) {
    const Eigen::VectorXd r = S.grad_x(x, t) - target;
    if (r.norm() < 1e-12 * scale) {
      if (iterations) *iterations = it;
      return t;
    }
    if (it == 50) break;
    const Eigen::MatrixXd J = S.mixed_hessian(x, t);
    if (abs_det(J) < det_floor / 2) throw PdoError("theta_inverse: degenerate Jacobian");
    const Eigen::VectorXd step = J.partialPivLu().solve(r);
    for (int d = 0; d < n; ++d) t[static_cast<std::size_t>(d)] -= step[d];
  }
  throw PdoError("theta_inverse: no convergence in 50 iterations");
}

double ExtractionWindow::weight(double d, double spacing) const {
  const double H = half_width * spacing;
  const double a = std::abs(d);
  if (a >= H) return 0.0;
  const double flat = (1.0 - taper_fraction) * H;
  if (a <= flat) return 1.0;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * (a - flat) / (H - flat)));
}

nlohmann::json ExtractionWindow::to_json() const {
  return {{"kind", "cosine_taper"}, {"half_width_spacings", half_width}, {"taper_fraction", taper_fraction}};
}

cplx extract_symbol(const DiscreteOperator& B, std::span<const double> x, std::span<const double> xi,
                    const ExtractionWindow& window) {
  const GridSpec& rg = B.row_grid;
  const GridSpec& cg = B.col_grid;
  if (window.half_width < 8) throw PdoError("extract_symbol: window narrower than 8 spacings");
  if (static_cast<int>(xi.size()) != cg.dim) throw PdoError("extract_symbol: frequency dimension mismatch");
  const double nyquist = std::numbers::pi / cg.spacing();
  for (double f : xi)
    if (std::abs(f) > nyquist) throw PdoError("extract_symbol: frequency outside the Nyquist band");
  const auto i = static_cast<Eigen::Index>(node_index(rg, x));
  std::vector<double> y(static_cast<std::size_t>(cg.dim));
  std::vector<cplx> terms(cg.total());
  for (std::size_t j = 0; j < cg.total(); ++j) {
    cg.coords(j, y.data());
    double w = 1.0, phase = 0.0;
    for (int d = 0; d < cg.dim && w != 0.0; ++d) {
      const double diff = x[static_cast<std::size_t>(d)] - y[static_cast<std::size_t>(d)];
      w *= window.weight(diff, cg.spacing());
      phase += diff * xi[static_cast<std::size_t>(d)];
    }
    if (w == 0.0) continue;
    const auto jj = static_cast<Eigen::Index>(j);
    terms[j] = w * B.col_weights[jj] * B.kernel(i, jj) * std::polar(1.0, -phase);
  }
  return pairwise_sum(terms);
}

DiscreteOperator fourier_conjugate(const DiscreteOperator& B) {
  const GridSpec& g = B.row_grid;
  if (!(g == B.col_grid) || !g.dft_aligned) throw PdoError("fourier_conjugate: needs a square operator on an aligned grid");
  const int n = g.dim;
  const GridSpec t = g.dual();
  const auto N = static_cast<Eigen::Index>(g.total());
  Eigen::MatrixXcd U(N, N);
  const double norm = std::pow(static_cast<double>(g.points), -0.5 * n);
  std::vector<double> y(static_cast<std::size_t>(n)), th(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < N; ++k) {
    t.coords(static_cast<std::size_t>(k), th.data());
    for (Eigen::Index j = 0; j < N; ++j) {
      g.coords(static_cast<std::size_t>(j), y.data());
      double s = 0.0;
      for (int d = 0; d < n; ++d) s += th[static_cast<std::size_t>(d)] * y[static_cast<std::size_t>(d)];
      U(k, j) = norm * std::polar(1.0, -s);
    }
  }
  DiscreteOperator G;
  G.matrix = U * B.matrix * U.adjoint();
  G.row_grid = t;
  G.col_grid = t;
  G.row_weights = Eigen::VectorXd::Constant(N, t.cell_volume());
  G.col_weights = G.row_weights;
  G.route = Route::Derived;
  G.provenance = {{"fourier_conjugate_of", B.provenance}};
  G.config_hash = fnv1a_hex(G.provenance.dump());
  return G;
}

void to_json(nlohmann::json& j, const PdoSymbolEstimate& e) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : e.samples) {
    nlohmann::json o = {{"x", s.x},           {"theta", s.theta},
                        {"xi", s.xi},         {"lambda", s.lambda},
                        {"in_band", s.in_band}, {"extracted", {s.extracted.real(), s.extracted.imag()}},
                        {"predicted", s.predicted}};
    o["relative_error"] = s.relative_error ? nlohmann::json(*s.relative_error) : nlohmann::json(nullptr);
    samples.push_back(o);
  }
  j = {{"which", e.which == Composition::FFStar ? "FFSTAR" : "FSTARF"},
       {"window", e.window.to_json()},
       {"floor", e.floor},
       {"samples", samples}};
}

PdoSymbolEstimate compare_symbols(const GeneratingFunction& S, const SymbolField& a, const DiscreteOperator& product,
                                  std::span<const std::vector<double>> x_theta_samples, Composition which,
                                  const ExtractionWindow& window, double floor) {
  const int n = S.n();
  const DiscreteOperator* B = &product;
  DiscreteOperator conjugated;
  if (which == Composition::FStarF) {
    conjugated = fourier_conjugate(product);
    B = &conjugated;
  }
  PdoSymbolEstimate est;
  est.which = which;
  est.window = window;
  est.floor = floor;
  est.samples.resize(x_theta_samples.size());
  const double nyquist = std::numbers::pi / B->col_grid.spacing();
  parallel_tiles(x_theta_samples.size(), 4, [&](std::size_t lo, std::size_t hi, std::size_t) {
    for (std::size_t k = lo; k < hi; ++k) {
      const auto& xt = x_theta_samples[k];
      if (static_cast<int>(xt.size()) != 2 * n) throw PdoError("compare_symbols: samples must be (x, theta)");
      std::span<const double> x(xt.data(), static_cast<std::size_t>(n)), t(xt.data() + n, static_cast<std::size_t>(n));
      SymbolSample s;
      s.x.assign(x.begin(), x.end());
      s.theta.assign(t.begin(), t.end());
      s.lambda = lambda_value(xt);
      const auto p = predicted_symbol(S, a, x, t, which);
      s.predicted = p.value;
      // Extraction point: (x, xi) for FF*; (theta, -x') on the conjugated F*F.
      std::vector<double> row = p.x, freq = p.xi;
      if (which == Composition::FStarF) {
        row = p.xi;
        freq = p.x;
        for (auto& f : freq) f = -f;
      }
      s.xi = freq;
      for (double f : freq)
        if (std::abs(f) > nyquist) s.in_band = false;
      if (s.in_band) {
        s.extracted = extract_symbol(*B, row, freq, window);
        if (s.predicted >= floor) s.relative_error = std::abs(s.extracted - s.predicted) / s.predicted;
      }
      est.samples[k] = std::move(s);
    }
  });
  return est;
}

RatioTest residual_ratio_test(const PdoSymbolEstimate& coarse, const PdoSymbolEstimate& fine, double lambda_min,
                              double max_ratio, double tolerance, double noise_floor) {
  if (coarse.samples.size() != fine.samples.size()) throw PdoError("residual_ratio_test: sample sets differ");
  RatioTest r;
  r.pass = true;
  r.within_tolerance = true;
  for (std::size_t k = 0; k < coarse.samples.size(); ++k) {
    const auto& c = coarse.samples[k];
    const auto& f = fine.samples[k];
    if (c.lambda < lambda_min || !c.relative_error || !f.relative_error) continue;
    ++r.counted;
    const double ec = *c.relative_error, ef = *f.relative_error;
    r.max_error_coarse = std::max(r.max_error_coarse, ec);
    r.max_error_fine = std::max(r.max_error_fine, ef);
    if (ec > tolerance || ef > tolerance) r.within_tolerance = false;
    if (ec <= noise_floor && ef <= noise_floor) {
      ++r.below_noise;
      continue;
    }
    const double ratio = ec > 0.0 ? ef / ec : std::numeric_limits<double>::infinity();
    r.worst_ratio = std::max(r.worst_ratio, ratio);
    if (!(ratio <= max_ratio)) r.pass = false;
  }
  if (r.counted == 0) r.pass = false;
  return r;
}

void to_json(nlohmann::json& j, const SeminormReport& r) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& [alpha, v] : r.terms) terms.push_back({{"alpha", alpha}, {"sup", v}});
  j = {{"k", r.k}, {"Q", r.Q}, {"terms", terms}};
}

SeminormReport cv_seminorm(const SymbolField& sigma, int k, const SampleGrid& grid) {
  if (k < 0 || k > sigma.max_order()) throw PdoError("cv_seminorm: order exceeds the available derivative depth");
  SymbolField plain(sigma.oracle(), constant_weight(1.0, sigma.dim()), 0.0, sigma.domain(), sigma.description());
  auto space = jet_space(sigma.dim(), k);
  SeminormReport r;
  r.k = k;
  std::vector<double> sups(space->size());
  for (std::size_t idx = 0; idx < space->size(); ++idx) {
    auto e = space->exponent(idx);
    MultiIndex alpha(e.begin(), e.end());
    const double s = seminorm_estimate(plain, alpha, grid);
    r.terms[alpha] = s;
    sups[idx] = s;
  }
  r.Q = pairwise_sum(sups);
  return r;
}

CvBound cv_bound_check(double operator_norm, const SeminormReport& Q, double gamma, double tol) {
  CvBound b;
  b.norm = operator_norm;
  b.bound = std::sqrt(gamma * Q.Q);
  b.ratio = b.bound > 0.0 ? b.norm / b.bound : (b.norm == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
  b.pass = b.norm <= b.bound * (1.0 + tol);
  return b;
}

std::string to_string(CompactnessVerdict v) {
  switch (v) {
    case CompactnessVerdict::CompactConsistent: return "COMPACT-CONSISTENT";
    case CompactnessVerdict::NoncompactConsistent: return "NONCOMPACT-CONSISTENT";
    case CompactnessVerdict::Inconclusive: return "INCONCLUSIVE";
  }
  return "?";
}

void to_json(nlohmann::json& j, const CompactnessReport& r) {
  j = {{"verdict", to_string(r.verdict)},  {"tail_index", r.tail_index},         {"tail_coarse", r.tail_coarse},
       {"tail_fine", r.tail_fine},         {"plateau_coarse", r.plateau_coarse}, {"plateau_fine", r.plateau_fine},
       {"detail", r.detail}};
}

CompactnessReport compactness_probe(const std::vector<double>& s_coarse, const std::vector<double>& s_fine,
                                    const CompactnessCriteria& c) {
  CompactnessReport r;
  r.tail_index = c.tail_index;
  auto plateau = [&](const std::vector<double>& s) {
    int count = 0;
    for (double v : s)
      if (v >= c.plateau_height) ++count;
    return count;
  };
  r.plateau_coarse = plateau(s_coarse);
  r.plateau_fine = plateau(s_fine);
  const auto J = static_cast<std::size_t>(c.tail_index);
  const bool have_tail = s_coarse.size() > J && s_fine.size() > J;
  if (have_tail) {
    r.tail_coarse = s_coarse[J];
    r.tail_fine = s_fine[J];
  }
  std::ostringstream d;
  if (r.plateau_coarse > 0 && r.plateau_fine > r.plateau_coarse) {
    r.verdict = CompactnessVerdict::NoncompactConsistent;
    d << "plateau >= " << c.plateau_height << " grows from " << r.plateau_coarse << " to " << r.plateau_fine;
  } else if (have_tail) {
    const double big = std::max(r.tail_coarse, r.tail_fine);
    const bool small = big < c.tail_threshold;
    const bool stable = big <= 1e-300 || std::abs(r.tail_fine - r.tail_coarse) <= c.tail_stability * big;
    if (small && stable) {
      r.verdict = CompactnessVerdict::CompactConsistent;
      d << "s_" << J << " = " << r.tail_coarse << " -> " << r.tail_fine << " below " << c.tail_threshold;
    } else {
      d << "s_" << J << " = " << r.tail_coarse << " -> " << r.tail_fine << (small ? "" : " not below threshold")
        << (stable ? "" : ", not stable under refinement") << "; plateau " << r.plateau_coarse << " -> "
        << r.plateau_fine;
    }
  } else {
    d << "fewer than " << J + 1 << " singular values";
  }
  r.detail = d.str();
  return r;
}

}  // namespace fiolab

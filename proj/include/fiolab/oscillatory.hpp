#pragma once

// Oscillatory integrals I(a, phi) f (x) = iint e^{i phi(x,y,t)} a(x,y,t) f(y) dy dt / (2 pi)^N.
//
// Two evaluation routes:
//  * cutoff regularization, a_sigma = g(v / sigma) a, over a schedule of
//    sigma with extrapolation of the limit;
//  * the partition omega_eps0 + (1 - omega_eps0) with k-fold integration by
//    parts on the non-stationary part through the transpose of
//      L = (i D)^{-1} sum_j d_j phi d_j,   D = |grad_y phi|^2 + |grad_t phi|^2.
// Derivatives of the integration-by-parts integrand are propagated exactly
// with jets in the (y, t) variables.

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fiolab/phases.hpp"
#include "fiolab/symbols.hpp"

#include "json.hpp"

namespace fiolab {

class OscError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when the sigma residuals do not decrease; carries the table.
class NonConvergence : public OscError {
 public:
  NonConvergence(const std::string& what, std::vector<std::pair<double, double>> residuals)
      : OscError(what), residuals_(std::move(residuals)) {}
  const std::vector<std::pair<double, double>>& residuals() const noexcept { return residuals_; }

 private:
  std::vector<std::pair<double, double>> residuals_;
};

/// The fixed bump: 1 on [-1, 1], 0 outside [-2, 2], smooth and monotone on [1, 2].
double chi(double t);
/// Taylor coefficients chi^(j)(t0) / j!, j = 0..order.
std::vector<cplx> taylor_chi(double t0, int order);

enum class CutoffKind { Gaussian, SmoothBump };
std::string to_string(CutoffKind k);
CutoffKind cutoff_from_string(const std::string& s);

struct CutoffSpec {
  CutoffKind kind = CutoffKind::Gaussian;
  /// g(v): exp(-|v|^2) or chi(|v|); g(0) = 1.
  double operator()(std::span<const double> v) const;
  /// g(v) is below `level` for |v| >= support(level).
  double support(double level = 1e-18) const;
};

/// omega_eps(point) = chi(D / (eps lambda^2)), point = (x, y, t).
double omega_partition(const PhaseField& phi, double eps, std::span<const double> point);

/// Coefficients of tL = sum_j F_j d/dy_j + sum_j G_j d/dt_j + H at one point.
struct IBPCoefficients {
  std::vector<cplx> F, G;
  cplx H;
  /// -(i D)^{-1} (sum d2phi/dy_j^2 + sum d2phi/dt_j^2): H without the derivative of 1/D.
  cplx H_laplacian;
  double D = 0.0, lambda = 0.0;
};

class IBPOperator {
 public:
  IBPOperator(PhaseField phi, double eps0);

  const PhaseField& phase() const noexcept { return phi_; }
  double eps0() const noexcept { return eps0_; }
  /// D >= eps0 lambda^2 at point.
  bool in_omega0(std::span<const double> point) const;

  /// Throws OscError outside Omega_0.
  IBPCoefficients coefficients(std::span<const double> point) const;
  /// (L e^{i phi}) / e^{i phi} at point; 1 up to rounding on Omega_0.
  cplx L_on_exponential(std::span<const double> point) const;

  /// (tL)^k b at point, b given by its Taylor coefficients of order >= k in
  /// the (y, t) variables (jet_space(n + N, k)). Throws outside Omega_0.
  cplx apply_transpose(std::span<const double> point, std::span<const cplx> b, int k) const;
  /// g^(k)_gamma(point) for |gamma| <= k, keyed by (alpha, beta) concatenated:
  /// (tL)^k b = sum_gamma g_gamma d^gamma b.
  std::map<MultiIndex, cplx> iterated_coefficients(std::span<const double> point, int k) const;

  /// The full integration-by-parts integrand at point:
  ///   e^{i phi} [ omega a f + (tL)^k ((1 - omega) a f) ].
  /// `a` over (x, y, t) or (x, t); `f` over y.
  cplx integrand(const SymbolField& a, const SymbolField& f, std::span<const double> point, int k) const;

 private:
  PhaseField phi_;
  double eps0_;
};

IBPOperator ibp_operator(const PhaseField& phi, double eps0);

struct OscQuadrature {
  double y_radius = 10.0;    // f is negligible for |y| beyond this
  double margin = 40.0;      // spectral margin added to the sampled phase bandwidth
  double cutoff_level = 1e-18;
  double taper_fraction = 0.1;  // theta-box roll-off for the truncated route
  double panel_width = 2.0;     // Gauss-Legendre cells of the truncated route
  double panel_phase = 16.0;    // max phase change across one cell, radians
  double ibp_tolerance = 1e-10;  // refinement stop in the partition's transition zone
  double tail_factor = 4.0;     // outer radius of the tail shell, in units of R
  double residual_floor = 1e-12;
  std::size_t max_points = 200'000'000;
};

struct OscIntegralResult {
  cplx value;
  std::vector<std::pair<double, cplx>> values;            // (sigma, value_sigma)
  std::vector<std::pair<double, double>> sigma_residuals;  // (sigma, |value_sigma - value|)
  std::optional<double> convergence_onset;                 // first sigma of the decreasing run
  std::optional<double> rate;                              // fitted power of sigma^{-1}
  CutoffKind cutoff = CutoffKind::Gaussian;
  std::optional<double> cutoff_gap;  // |value_sigma(other kind) - value_sigma| at the final sigma
  std::optional<double> other_value_residual;  // final residual of the other kind
  int ibp_order = 0;
  std::optional<double> truncation_radius;
  double eps0 = 0.0;
  std::size_t points = 0;  // quadrature nodes per evaluation (largest)
};

void to_json(nlohmann::json& j, const OscIntegralResult& r);

/// Extrapolated lim_{sigma -> inf} of a sequence on a geometric schedule.
/// Returns the limit and the fitted rate (empty when the differences are at
/// the noise floor and the last value is returned).
std::pair<cplx, std::optional<double>> extrapolate_limit(std::span<const double> sigma, std::span<const cplx> values,
                                                         double floor);

/// One value I(a_sigma, phi) f (x) by tensor trapezoid quadrature.
cplx regularized_value(const SymbolField& a, const PhaseField& phi, const SymbolField& f, std::span<const double> x,
                       double sigma, const CutoffSpec& cutoff, const OscQuadrature& q = {},
                       std::size_t* points = nullptr);

/// Values over the schedule, extrapolated limit, residuals and the gap to
/// the other cutoff kind (`compare_cutoffs`). Throws NonConvergence.
OscIntegralResult regularized_fio_apply(const SymbolField& a, const PhaseField& phi, const SymbolField& f,
                                        std::span<const double> x, std::span<const double> schedule,
                                        const CutoffSpec& cutoff, const OscQuadrature& q = {},
                                        bool compare_cutoffs = true);

/// Truncated quadrature over |y_i|, |t_i| <= R (y also limited by q.y_radius)
/// of the integration-by-parts integrand, with a cosine roll-off on the
/// outer part of the t-box. Composite Gauss-Legendre cells; cells meeting
/// the transition zone of omega_eps0 are bisected adaptively.
OscIntegralResult fio_apply_ibp(const SymbolField& a, const IBPOperator& L, const SymbolField& f,
                                std::span<const double> x, int k, double R, const OscQuadrature& q = {});

struct TailEstimate {
  int k = 0;
  std::vector<std::pair<double, double>> mass;  // (R, L1 mass of the integrand on [-cR, cR] minus [-R, R])
  double slope = 0.0;                           // -d log(mass) / d log R between the last two radii
  double predicted = 0.0;                       // k - N for a bounded amplitude
};

void to_json(nlohmann::json& j, const TailEstimate& t);

TailEstimate ibp_tail(const SymbolField& a, const IBPOperator& L, const SymbolField& f, std::span<const double> x,
                      int k, std::span<const double> radii, const OscQuadrature& q = {});

struct Eps0Choice {
  double eps0 = 0.0;
  bool admissible = false;
  std::map<double, double> constants;  // eps -> sampled C(eps)
  std::optional<std::vector<double>> witness;
};

void to_json(nlohmann::json& j, const Eps0Choice& c);

/// Sampled C(eps) = max lambda^2 / |y|^2 over supp omega_eps with |y| >= y_min.
double majoration_constant(const PhaseField& phi, double eps, const HypothesisGrid& grid, double y_min = 0.5,
                           std::vector<double>* witness = nullptr);

/// Largest candidate eps with C(eps) below `cap`.
Eps0Choice choose_eps0(const PhaseField& phi, const HypothesisGrid& grid, double cap = 1e4,
                       std::vector<double> candidates = {0.4, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001});

/// Sampled sup over Omega_0 of |F_j| lambda, |G_j| lambda, |H| lambda^2 on
/// nested boxes, with the same growth test as the hypothesis verifiers.
HypothesisReport verify_ibp_coefficients(const IBPOperator& L, const HypothesisGrid& grid);

/// max relative |L e^{i phi} - e^{i phi}| over `count` random Omega_0 points
/// in [-radius, radius]^dims (fixed seed).
double L_identity_error(const IBPOperator& L, int count = 100, double radius = 8.0, std::uint64_t seed = 0x1b9);

}  // namespace fiolab

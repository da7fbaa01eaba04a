#pragma once

// Pseudodifferential checks on discrete operators: Kohn-Nirenberg symbol
// extraction from FF* (and F*F through Fourier conjugation), comparison with
// |a|^2 |det d2S/dxdt|^{-1}, Calderon-Vaillancourt seminorms and bounds, and
// a singular-value compactness probe.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fiolab/operators.hpp"
#include "fiolab/phases.hpp"
#include "fiolab/symbols.hpp"

#include "json.hpp"

namespace fiolab {

enum class Composition { FFStar, FStarF };

class PdoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PredictedSymbol {
  std::vector<double> x, xi;  // base point
  double value = 0.0;
};

/// FFStar: base (x, grad_x S(x,t)); FStarF: base (grad_t S(x,t), t); value |a|^2 / |det d2S/dxdt|.
PredictedSymbol predicted_symbol(const GeneratingFunction& S, const SymbolField& a, std::span<const double> x,
                                 std::span<const double> theta, Composition which, double det_floor = 1e-8);

/// Solves grad_x S(x, t) = xi for t by Newton's method.
std::vector<double> theta_inverse(const GeneratingFunction& S, std::span<const double> x, std::span<const double> xi,
                                  std::span<const double> guess, double det_floor = 1e-8, int* iterations = nullptr);

/// Cosine-tapered window in the difference variable x - y.
struct ExtractionWindow {
  int half_width = 32;         // in grid spacings
  double taper_fraction = 0.25;  // outer part of the half-width that rolls off
  double weight(double d, double spacing) const;
  nlohmann::json to_json() const;
};

/// sigma(x, xi) = sum_j w_j K(x, y_j) e^{-i (x - y_j).xi} W(x - y_j); x must be a row-grid node.
cplx extract_symbol(const DiscreteOperator& B, std::span<const double> x, std::span<const double> xi,
                    const ExtractionWindow& window = {});

/// U B U^H with U the unitary DFT of the (aligned) grid, as an operator on the dual grid.
DiscreteOperator fourier_conjugate(const DiscreteOperator& B);

struct SymbolSample {
  std::vector<double> x, theta, xi;  // xi: extraction frequency at the base point
  double lambda = 0.0;               // lambda(x, theta)
  bool in_band = true;
  cplx extracted;
  double predicted = 0.0;
  std::optional<double> relative_error;  // set when predicted >= floor
};

struct PdoSymbolEstimate {
  Composition which = Composition::FFStar;
  std::vector<SymbolSample> samples;
  ExtractionWindow window;
  double floor = 1e-12;
};

void to_json(nlohmann::json& j, const PdoSymbolEstimate& e);

/// Compares the extracted symbol of `product` (FF*, or F*F which is
/// conjugated internally) with the prediction at the (x, theta) samples.
PdoSymbolEstimate compare_symbols(const GeneratingFunction& S, const SymbolField& a, const DiscreteOperator& product,
                                  std::span<const std::vector<double>> x_theta_samples, Composition which,
                                  const ExtractionWindow& window = {}, double floor = 1e-12);

struct RatioTest {
  bool pass = false;
  double max_error_coarse = 0.0, max_error_fine = 0.0;
  double worst_ratio = 0.0;  // max error(fine)/error(coarse) over counted samples
  int counted = 0;           // samples with lambda >= lambda_min and a recorded error at both resolutions
  int below_noise = 0;       // counted samples where both errors are below the noise floor
  bool within_tolerance = false;  // every counted error <= tolerance
};

/// Pairs samples by position; ratio test at samples with lambda >= lambda_min.
RatioTest residual_ratio_test(const PdoSymbolEstimate& coarse, const PdoSymbolEstimate& fine, double lambda_min = 3.0,
                              double max_ratio = 0.6, double tolerance = 0.05, double noise_floor = 1e-8);

struct SeminormReport {
  int k = 0;
  double Q = 0.0;
  std::map<MultiIndex, double> terms;
};

void to_json(nlohmann::json& j, const SeminormReport& r);

/// Q_k = sum over |alpha| <= k of the grid sup of |d^alpha sigma|.
SeminormReport cv_seminorm(const SymbolField& sigma, int k, const SampleGrid& grid);

struct CvBound {
  double norm = 0.0, bound = 0.0, ratio = 0.0;
  bool pass = false;
};

/// ||F|| <= (gamma Q_k)^{1/2}, with relative slack `tol`.
CvBound cv_bound_check(double operator_norm, const SeminormReport& Q, double gamma = 1.0, double tol = 1e-6);

enum class CompactnessVerdict { CompactConsistent, NoncompactConsistent, Inconclusive };
std::string to_string(CompactnessVerdict v);

struct CompactnessReport {
  CompactnessVerdict verdict = CompactnessVerdict::Inconclusive;
  int tail_index = 0;
  double tail_coarse = 0.0, tail_fine = 0.0;
  int plateau_coarse = 0, plateau_fine = 0;
  std::string detail;
};

void to_json(nlohmann::json& j, const CompactnessReport& r);

struct CompactnessCriteria {
  int tail_index = 64;
  double tail_threshold = 0.01;
  double tail_stability = 0.1;
  double plateau_height = 0.5;
};

/// Verdict from the singular values of the same operator at two resolutions.
CompactnessReport compactness_probe(const std::vector<double>& s_coarse, const std::vector<double>& s_fine,
                                    const CompactnessCriteria& c = {});

}  // namespace fiolab

#pragma once

// Tempered weights m : R^d -> [0, inf) and their bookkeeping.
//
// m is tempered when m(v) <= C0 m(w) (1 + |w - v|)^l for all v, w. Weights
// here are closed-form; temperedness is certified only on finite pair sets.

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fiolab/expr.hpp"

namespace fiolab {

/// Which Japanese bracket: (1 + |v|^2)^{1/2} (smooth) or 1 + |v|.
enum class LambdaConvention { SqrtSumSquares, OnePlusNorm };

class WeightError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

double lambda_value(std::span<const double> v, LambdaConvention conv = LambdaConvention::SqrtSumSquares);

class WeightSpec {
 public:
  using Field = std::function<double(std::span<const double>)>;

  WeightSpec(int dim, Field eval, std::string tag, std::optional<double> C0 = {},
             std::optional<double> l = {});

  int dim() const noexcept { return dim_; }
  double operator()(std::span<const double> v) const { return eval_(v); }
  const std::optional<double>& C0() const noexcept { return C0_; }
  const std::optional<double>& l() const noexcept { return l_; }
  const std::string& tag() const noexcept { return tag_; }

  /// The weight lambda^p, if this weight is one (used for class arithmetic).
  std::optional<double> lambda_power() const noexcept { return lambda_power_; }
  LambdaConvention lambda_convention() const noexcept { return conv_; }

 private:
  friend WeightSpec lambda_weight(double, int, LambdaConvention);
  friend WeightSpec weight_product(const WeightSpec&, const WeightSpec&);
  int dim_;
  Field eval_;
  std::string tag_;
  std::optional<double> C0_, l_;
  std::optional<double> lambda_power_;
  LambdaConvention conv_ = LambdaConvention::SqrtSumSquares;
};

/// lambda^p with C0 = 1, l = |p|.
WeightSpec lambda_weight(double p, int dim, LambdaConvention conv = LambdaConvention::SqrtSumSquares);
WeightSpec constant_weight(double c, int dim);
/// Pointwise product; (C0, l) multiply/add when both are known.
WeightSpec weight_product(const WeightSpec& w1, const WeightSpec& w2);

/// Parse a weight tag: `lambda:p=2[,conv=one_plus_norm]`, `const:1`,
/// `expr:<formula>` (variables from `vars`, plus norm(...), exp, powers).
WeightSpec parse_weight(const std::string& tag, const VariableTable& vars);

struct PointPair {
  std::vector<double> v;
  std::vector<double> w;
};

struct TemperedReport {
  double C0_estimate = 0.0;
  bool pass = false;
  PointPair worst;
};

/// C0_estimate = max m(v) / (m(w) (1 + |w - v|)^l) over pairs; pass iff it
/// is finite and below `cap`. Throws WeightError when m(w) == 0.
TemperedReport verify_tempered(const WeightSpec& w, std::span<const PointPair> pairs,
                               double l_candidate, double cap = 1e6);

}  // namespace fiolab

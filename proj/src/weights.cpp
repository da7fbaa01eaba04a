#include "fiolab/weights.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

namespace fiolab {

double lambda_value(std::span<const double> v, LambdaConvention conv) {
  double s = 0.0;
  for (double c : v) s += c * c;
  return conv == LambdaConvention::SqrtSumSquares ? std::sqrt(1.0 + s) : 1.0 + std::sqrt(s);
}

WeightSpec::WeightSpec(int dim, Field eval, std::string tag, std::optional<double> C0,
                       std::optional<double> l)
    : dim_(dim), eval_(std::move(eval)), tag_(std::move(tag)), C0_(C0), l_(l) {
  if (dim < 1) throw WeightError("weight dimension must be positive");
}

WeightSpec lambda_weight(double p, int dim, LambdaConvention conv) {
  std::ostringstream tag;
  tag << "lambda:p=" << p;
  if (conv == LambdaConvention::OnePlusNorm) tag << ",conv=one_plus_norm";
  WeightSpec w(
      dim, [p, conv](std::span<const double> v) { return std::pow(lambda_value(v, conv), p); },
      tag.str(), 1.0, std::abs(p));
  w.lambda_power_ = p;
  w.conv_ = conv;
  return w;
}

WeightSpec constant_weight(double c, int dim) {
  std::ostringstream tag;
  tag << "const:" << c;
  return WeightSpec(dim, [c](std::span<const double>) { return c; }, tag.str(), 1.0, 0.0);
}

WeightSpec weight_product(const WeightSpec& w1, const WeightSpec& w2) {
  if (w1.dim() != w2.dim()) throw WeightError("weight_product: dimension mismatch");
  std::optional<double> C0, l;
  if (w1.C0() && w2.C0()) C0 = *w1.C0() * *w2.C0();
  if (w1.l() && w2.l()) l = *w1.l() + *w2.l();
  auto f1 = w1.eval_, f2 = w2.eval_;
  WeightSpec w(w1.dim(), [f1, f2](std::span<const double> v) { return f1(v) * f2(v); },
               "(" + w1.tag() + ")*(" + w2.tag() + ")", C0, l);
  if (w1.lambda_power_ && w2.lambda_power_ && w1.conv_ == w2.conv_) {
    w.lambda_power_ = *w1.lambda_power_ + *w2.lambda_power_;
    w.conv_ = w1.conv_;
  }
  return w;
}

namespace {
std::string trim(std::string s) {
  auto b = s.find_first_not_of(" \t");
  auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}
}  // namespace

WeightSpec parse_weight(const std::string& tag, const VariableTable& vars) {
  const auto colon = tag.find(':');
  if (colon == std::string::npos) throw WeightError("weight tag without kind: '" + tag + "'");
  const std::string kind = trim(tag.substr(0, colon));
  const std::string body = trim(tag.substr(colon + 1));
  const int dim = vars.size();
  if (kind == "lambda") {
    double p = 0.0;
    bool have_p = false;
    LambdaConvention conv = LambdaConvention::SqrtSumSquares;
    std::istringstream in(body);
    std::string item;
    while (std::getline(in, item, ',')) {
      auto eq = item.find('=');
      if (eq == std::string::npos) throw WeightError("bad lambda weight entry '" + item + "'");
      auto key = trim(item.substr(0, eq)), val = trim(item.substr(eq + 1));
      if (key == "p") {
        try {
          p = std::stod(val);
        } catch (const std::exception&) {
          throw WeightError("bad exponent in weight tag '" + tag + "'");
        }
        have_p = true;
      } else if (key == "conv") {
        if (val == "one_plus_norm") conv = LambdaConvention::OnePlusNorm;
        else if (val == "sqrt_sum_squares") conv = LambdaConvention::SqrtSumSquares;
        else throw WeightError("unknown lambda convention '" + val + "'");
      } else {
        throw WeightError("unknown lambda weight key '" + key + "'");
      }
    }
    if (!have_p) throw WeightError("lambda weight needs p=");
    return lambda_weight(p, dim, conv);
  }
  if (kind == "const") {
    double c;
    try {
      c = std::stod(body);
    } catch (const std::exception&) {
      throw WeightError("bad constant weight '" + tag + "'");
    }
    if (c < 0) throw WeightError("constant weight must be nonnegative");
    return constant_weight(c, dim);
  }
  if (kind == "expr") {
    Expr e;
    try {
      e = parse_expression(body, vars);
    } catch (const ParseError& err) {
      throw WeightError(std::string("weight ") + err.what());
    }
    auto tape = std::make_shared<const Tape>(e);
    return WeightSpec(
        dim, [tape](std::span<const double> v) { return tape->eval(v).real(); }, tag);
  }
  throw WeightError("unknown weight kind '" + kind + "'");
}

TemperedReport verify_tempered(const WeightSpec& w, std::span<const PointPair> pairs,
                               double l_candidate, double cap) {
  if (pairs.empty()) throw WeightError("verify_tempered: empty pair set");
  TemperedReport r;
  r.C0_estimate = 0.0;
  for (const auto& p : pairs) {
    const double mw = w(p.w);
    if (mw == 0.0) throw WeightError("verify_tempered: weight vanishes at a sampled point");
    double d2 = 0.0;
    for (std::size_t k = 0; k < p.v.size(); ++k) d2 += (p.w[k] - p.v[k]) * (p.w[k] - p.v[k]);
    const double ratio = w(p.v) / (mw * std::pow(1.0 + std::sqrt(d2), l_candidate));
    if (!(ratio <= r.C0_estimate)) {
      r.C0_estimate = std::isnan(ratio) ? std::numeric_limits<double>::infinity() : ratio;
      r.worst = p;
    }
  }
  r.pass = std::isfinite(r.C0_estimate) && r.C0_estimate <= cap;
  return r;
}

}  // namespace fiolab

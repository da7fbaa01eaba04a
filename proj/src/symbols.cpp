#include "fiolab/symbols.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "fiolab/parallel.hpp"

namespace fiolab {

void FieldOracle::taylor(std::span<const double>, const JetSpace&, std::span<cplx>) const {
  throw SymbolError("field has no exact derivatives");
}

namespace {

std::vector<int> identity_activation(int dim) {
  std::vector<int> a(static_cast<std::size_t>(dim));
  for (int k = 0; k < dim; ++k) a[static_cast<std::size_t>(k)] = k;
  return a;
}

class ExprOracle final : public FieldOracle {
 public:
  ExprOracle(const Expr& e, int dim) : tape_(e), dim_(dim) {
    if (tape_.arity() > dim) throw SymbolError("expression uses more variables than the field has");
  }
  int dim() const override { return dim_; }
  bool exact() const override { return true; }
  cplx value(std::span<const double> p) const override { return tape_.eval(p); }
  void taylor(std::span<const double> p, const JetSpace& space, std::span<cplx> out) const override {
    Tape::JetWork work;
    auto active = identity_activation(dim_);
    auto c = tape_.eval_jet(space, p, active, work);
    std::copy(c.begin(), c.end(), out.begin());
  }

 private:
  Tape tape_;
  int dim_;
};

class FunctionOracle final : public FieldOracle {
 public:
  FunctionOracle(std::function<cplx(std::span<const double>)> f, int dim) : f_(std::move(f)), dim_(dim) {}
  int dim() const override { return dim_; }
  bool exact() const override { return false; }
  cplx value(std::span<const double> p) const override { return f_(p); }

 private:
  std::function<cplx(std::span<const double>)> f_;
  int dim_;
};

class ShiftOracle final : public FieldOracle {
 public:
  ShiftOracle(std::shared_ptr<const FieldOracle> base, MultiIndex alpha)
      : base_(std::move(base)), alpha_(std::move(alpha)) {}
  int dim() const override { return base_->dim(); }
  bool exact() const override { return base_->exact(); }
  cplx value(std::span<const double> p) const override {
    if (!exact()) {
      SymbolField tmp(base_, constant_weight(1.0, dim()), 0.0);
      return eval_derivative(tmp, p, alpha_).value;
    }
    auto sp = jet_space(dim(), order_of(alpha_));
    std::vector<cplx> c(sp->size());
    base_->taylor(p, *sp, c);
    auto k = sp->index(alpha_);
    return c[k] * sp->factorial(k);
  }
  void taylor(std::span<const double> p, const JetSpace& space, std::span<cplx> out) const override {
    const int shift = order_of(alpha_);
    auto big = jet_space(dim(), space.order() + shift);
    std::vector<cplx> c(big->size());
    base_->taylor(p, *big, c);
    std::vector<int> e(static_cast<std::size_t>(dim()));
    for (std::size_t k = 0; k < space.size(); ++k) {
      auto beta = space.exponent(k);
      double ratio = 1.0;  // (alpha+beta)! / beta!
      for (int v = 0; v < dim(); ++v) {
        const auto i = static_cast<std::size_t>(v);
        e[i] = beta[i] + alpha_[i];
        for (int j = beta[i] + 1; j <= e[i]; ++j) ratio *= j;
      }
      out[k] = c[big->index(e)] * ratio;
    }
  }

 private:
  std::shared_ptr<const FieldOracle> base_;
  MultiIndex alpha_;
};

class ProductOracle final : public FieldOracle {
 public:
  ProductOracle(std::shared_ptr<const FieldOracle> a, std::shared_ptr<const FieldOracle> b)
      : a_(std::move(a)), b_(std::move(b)) {}
  int dim() const override { return a_->dim(); }
  bool exact() const override { return a_->exact() && b_->exact(); }
  cplx value(std::span<const double> p) const override { return a_->value(p) * b_->value(p); }
  void taylor(std::span<const double> p, const JetSpace& space, std::span<cplx> out) const override {
    std::vector<cplx> ca(space.size()), cb(space.size());
    a_->taylor(p, space, ca);
    b_->taylor(p, space, cb);
    space.mul(out.data(), ca.data(), cb.data());
  }

 private:
  std::shared_ptr<const FieldOracle> a_, b_;
};

class ReciprocalOracle final : public FieldOracle {
 public:
  explicit ReciprocalOracle(std::shared_ptr<const FieldOracle> a) : a_(std::move(a)) {}
  int dim() const override { return a_->dim(); }
  bool exact() const override { return a_->exact(); }
  cplx value(std::span<const double> p) const override { return 1.0 / a_->value(p); }
  void taylor(std::span<const double> p, const JetSpace& space, std::span<cplx> out) const override {
    std::vector<cplx> c(space.size()), scratch(2 * space.size());
    a_->taylor(p, space, c);
    space.compose(out.data(), c.data(), taylor_pow(c[0], -1.0, space.order()), scratch.data());
  }

 private:
  std::shared_ptr<const FieldOracle> a_;
};

WeightSpec lambda_factor(const WeightSpec& m, double power) {
  return lambda_weight(power, m.dim(), m.lambda_convention());
}

}  // namespace

SymbolField::SymbolField(std::shared_ptr<const FieldOracle> oracle, WeightSpec weight, double rho,
                         Domain domain, std::string description)
    : oracle_(std::move(oracle)),
      weight_(std::move(weight)),
      rho_(rho),
      domain_(std::move(domain)),
      description_(std::move(description)) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw SymbolError("rho must lie in [0, 1]");
  if (weight_.dim() != oracle_->dim()) throw SymbolError("weight and symbol dimensions differ");
}

SymbolField SymbolField::from_expr(const Expr& e, int dim, WeightSpec weight, double rho,
                                   std::string description) {
  return SymbolField(std::make_shared<ExprOracle>(e, dim), std::move(weight), rho, {},
                     std::move(description));
}

SymbolField SymbolField::parse(const std::string& text, const VariableTable& vars, WeightSpec weight,
                               double rho) {
  return from_expr(parse_expression(text, vars), vars.size(), std::move(weight), rho, text);
}

SymbolField SymbolField::from_function(std::function<cplx(std::span<const double>)> f, int dim,
                                       WeightSpec weight, double rho, std::string description) {
  return SymbolField(std::make_shared<FunctionOracle>(std::move(f), dim), std::move(weight), rho, {},
                     std::move(description));
}

SymbolField SymbolField::with_rho(double rho) const {
  if (rho > rho_) throw SymbolError("with_rho can only weaken the class");
  return SymbolField(oracle_, weight_, rho, domain_, description_);
}

double finite_difference_step(int order, double x) {
  const double eps = std::numeric_limits<double>::epsilon();
  return std::pow(eps, 1.0 / (order + 2)) * std::max(1.0, std::abs(x));
}

namespace {

// Tensor central difference for d^alpha with per-axis steps h.
cplx central_difference(const FieldOracle& f, std::span<const double> p, const MultiIndex& alpha,
                        const std::vector<double>& h) {
  const int dim = f.dim();
  std::vector<std::vector<std::pair<double, double>>> axis(static_cast<std::size_t>(dim));
  for (int v = 0; v < dim; ++v) {
    const int k = alpha[static_cast<std::size_t>(v)];
    auto& st = axis[static_cast<std::size_t>(v)];
    double binom = 1.0;
    for (int j = 0; j <= k; ++j) {
      if (j > 0) binom = binom * (k - j + 1) / j;
      const double w = ((j % 2) ? -1.0 : 1.0) * binom / std::pow(h[static_cast<std::size_t>(v)], k);
      st.emplace_back((0.5 * k - j) * h[static_cast<std::size_t>(v)], w);
    }
  }
  std::vector<double> q(p.begin(), p.end());
  cplx sum = 0.0;
  std::vector<std::size_t> idx(static_cast<std::size_t>(dim), 0);
  for (;;) {
    double w = 1.0;
    for (int v = 0; v < dim; ++v) {
      const auto i = static_cast<std::size_t>(v);
      const auto& s = axis[i][idx[i]];
      q[i] = p[i] + s.first;
      w *= s.second;
    }
    sum += w * f.value(q);
    int v = dim - 1;
    for (; v >= 0; --v) {
      const auto i = static_cast<std::size_t>(v);
      if (++idx[i] < axis[i].size()) break;
      idx[i] = 0;
    }
    if (v < 0) break;
  }
  return sum;
}

}  // namespace

DerivativeValue eval_derivative(const SymbolField& a, std::span<const double> p,
                                const MultiIndex& alpha) {
  if (static_cast<int>(alpha.size()) != a.dim()) throw SymbolError("multi-index arity mismatch");
  if (static_cast<int>(p.size()) != a.dim()) throw SymbolError("point arity mismatch");
  if (!a.domain()(p)) throw SymbolError("point outside the symbol domain", {p.begin(), p.end()});
  const int order = order_of(alpha);
  if (order > a.max_order())
    throw SymbolError("derivative order " + std::to_string(order) + " exceeds available order " +
                      std::to_string(a.max_order()));
  if (a.exact()) {
    auto sp = jet_space(a.dim(), order);
    std::vector<cplx> c(sp->size());
    a.oracle()->taylor(p, *sp, c);
    auto k = sp->index(alpha);
    return {c[k] * sp->factorial(k), 0.0};
  }
  if (order == 0) return {a(p), 0.0};
  std::vector<double> h(p.size());
  for (std::size_t v = 0; v < p.size(); ++v) h[v] = finite_difference_step(order, p[v]);
  const cplx coarse = central_difference(*a.oracle(), p, alpha, h);
  for (double& s : h) s *= 0.5;
  const cplx fine = central_difference(*a.oracle(), p, alpha, h);
  return {(4.0 * fine - coarse) / 3.0, std::abs(fine - coarse) / 3.0};
}

std::vector<cplx> taylor_coefficients(const SymbolField& a, std::span<const double> p,
                                      const JetSpace& space) {
  std::vector<cplx> c(space.size());
  if (a.exact()) {
    a.oracle()->taylor(p, space, c);
    return c;
  }
  for (std::size_t k = 0; k < space.size(); ++k) {
    auto e = space.exponent(k);
    c[k] = eval_derivative(a, p, MultiIndex(e.begin(), e.end())).value / space.factorial(k);
  }
  return c;
}

void to_json(nlohmann::json& j, const SeminormTable& t) {
  j = nlohmann::json::object();
  j["grid"] = {{"dim", t.grid.dim}, {"radius", t.grid.radius}, {"points", t.grid.points}};
  auto entries = nlohmann::json::array();
  for (const auto& [alpha, C] : t.entries) {
    nlohmann::json e = {{"alpha", alpha}, {"C", C}};
    if (auto it = t.witnesses.find(alpha); it != t.witnesses.end()) e["witness"] = it->second;
    entries.push_back(e);
  }
  j["entries"] = entries;
}

double seminorm_estimate(const SymbolField& a, const MultiIndex& alpha, const SampleGrid& grid,
                         SeminormTable* table) {
  if (grid.dim != a.dim()) throw SymbolError("grid and symbol dimensions differ");
  const int order = order_of(alpha);
  if (order > a.max_order()) throw SymbolError("derivative order exceeds available order");
  const double decay = -a.rho() * order;
  const std::size_t n = grid.total();
  const std::size_t tile = 256;
  std::vector<double> best(tile_count(n, tile), 0.0);
  std::vector<std::size_t> where(best.size(), 0);
  std::vector<int> zero_weight(best.size(), 0);
  parallel_tiles(n, tile, [&](std::size_t lo, std::size_t hi, std::size_t t) {
    std::vector<double> p(static_cast<std::size_t>(grid.dim));
    for (std::size_t k = lo; k < hi; ++k) {
      grid.coords(k, p.data());
      if (!a.domain()(p)) continue;
      const double m = a.weight()(p);
      if (m == 0.0) {
        zero_weight[t] = 1;
        continue;
      }
      const double bound = m * std::pow(lambda_value(p, a.weight().lambda_convention()), decay);
      const double r = std::abs(eval_derivative(a, p, alpha).value) / bound;
      if (!(r <= best[t])) {
        best[t] = std::isnan(r) ? std::numeric_limits<double>::infinity() : r;
        where[t] = k;
      }
    }
  });
  for (int z : zero_weight)
    if (z) throw SymbolError("weight vanishes at a grid point");
  double C = 0.0;
  std::size_t arg = 0;
  for (std::size_t t = 0; t < best.size(); ++t)
    if (best[t] > C) {
      C = best[t];
      arg = where[t];
    }
  if (table) {
    table->grid = grid;
    table->entries[alpha] = C;
    table->witnesses[alpha] = grid.coords(arg);
  }
  return C;
}

SymbolField derivative_symbol(const SymbolField& a, const MultiIndex& alpha) {
  if (static_cast<int>(alpha.size()) != a.dim()) throw SymbolError("multi-index arity mismatch");
  const int order = order_of(alpha);
  if (order > a.max_order()) throw SymbolError("derivative order exceeds available order");
  std::ostringstream desc;
  desc << "d^(";
  for (std::size_t k = 0; k < alpha.size(); ++k) desc << (k ? "," : "") << alpha[k];
  desc << ")[" << a.description() << "]";
  WeightSpec m = a.rho() * order == 0.0 ? a.weight()
                            : weight_product(a.weight(), lambda_factor(a.weight(), -a.rho() * order));
  return SymbolField(std::make_shared<ShiftOracle>(a.oracle(), alpha), std::move(m), a.rho(),
                     a.domain(), desc.str());
}

SymbolField product_symbol(const SymbolField& a, const SymbolField& b) {
  if (a.dim() != b.dim()) throw SymbolError("product_symbol: dimension mismatch");
  Domain d;
  if (a.domain().contains || b.domain().contains) {
    auto da = a.domain(), db = b.domain();
    d.contains = [da, db](std::span<const double> p) { return da(p) && db(p); };
    d.description = da.description + " and " + db.description;
  }
  return SymbolField(std::make_shared<ProductOracle>(a.oracle(), b.oracle()),
                     weight_product(a.weight(), b.weight()), std::min(a.rho(), b.rho()), d,
                     "(" + a.description() + ")*(" + b.description() + ")");
}

SymbolField reciprocal_symbol(const SymbolField& a, double C0, double mu, const SampleGrid& grid) {
  if (grid.dim != a.dim()) throw SymbolError("grid and symbol dimensions differ");
  std::vector<double> p(static_cast<std::size_t>(grid.dim));
  for (std::size_t k = 0; k < grid.total(); ++k) {
    grid.coords(k, p.data());
    if (!a.domain()(p)) continue;
    const double floor = C0 * std::pow(lambda_value(p, a.weight().lambda_convention()), mu);
    if (!(std::abs(a(p)) >= floor * (1.0 - 1e-12))) {
      std::ostringstream msg;
      msg << "reciprocal_symbol: |a| = " << std::abs(a(p)) << " < " << floor << " at (";
      for (std::size_t v = 0; v < p.size(); ++v) msg << (v ? ", " : "") << p[v];
      msg << ")";
      throw SymbolError(msg.str(), p);
    }
  }
  return SymbolField(std::make_shared<ReciprocalOracle>(a.oracle()),
                     weight_product(a.weight(), lambda_factor(a.weight(), -2.0 * mu)), a.rho(),
                     a.domain(), "1/(" + a.description() + ")");
}

}  // namespace fiolab

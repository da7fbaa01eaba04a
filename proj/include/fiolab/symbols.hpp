#pragma once

// Symbol classes S^m_rho: smooth complex fields a with
//   |d^alpha a(v)| <= C_alpha m(v) lambda(v)^{-rho |alpha|}.
// Class metadata (m, rho) is declared at construction and verified on grids.

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fiolab/expr.hpp"
#include "fiolab/grid.hpp"
#include "fiolab/jet.hpp"
#include "fiolab/weights.hpp"

#include "json.hpp"

namespace fiolab {

using MultiIndex = std::vector<int>;

inline int order_of(const MultiIndex& a) {
  int s = 0;
  for (int k : a) s += k;
  return s;
}

class SymbolError : public std::runtime_error {
 public:
  explicit SymbolError(const std::string& what, std::vector<double> witness = {})
      : std::runtime_error(what), witness_(std::move(witness)) {}
  const std::vector<double>& witness() const noexcept { return witness_; }

 private:
  std::vector<double> witness_;
};

/// Source of values and derivatives for a SymbolField.
class FieldOracle {
 public:
  virtual ~FieldOracle() = default;
  virtual int dim() const = 0;
  /// True when taylor() is available (exact derivatives).
  virtual bool exact() const = 0;
  virtual cplx value(std::span<const double> p) const = 0;
  /// Taylor coefficients at p in all dim() variables, to space.order().
  virtual void taylor(std::span<const double> p, const JetSpace& space, std::span<cplx> out) const;
};

struct Domain {
  std::function<bool(std::span<const double>)> contains;  // empty: whole space
  std::string description = "whole space";
  bool operator()(std::span<const double> p) const { return !contains || contains(p); }
};

struct DerivativeValue {
  cplx value;
  double error = 0.0;  // Richardson estimate; 0 for exact derivatives
};

class SymbolField {
 public:
  /// Highest derivative order available from exact (jet) evaluation.
  static constexpr int kExactOrder = 8;
  /// Highest derivative order in finite-difference mode.
  static constexpr int kFiniteDifferenceOrder = 4;

  SymbolField(std::shared_ptr<const FieldOracle> oracle, WeightSpec weight, double rho,
              Domain domain = {}, std::string description = {});

  /// Built from the expression grammar (exact derivatives).
  static SymbolField from_expr(const Expr& e, int dim, WeightSpec weight, double rho,
                               std::string description = {});
  static SymbolField parse(const std::string& text, const VariableTable& vars, WeightSpec weight,
                           double rho);
  /// Black-box field; derivatives by finite differences.
  static SymbolField from_function(std::function<cplx(std::span<const double>)> f, int dim,
                                   WeightSpec weight, double rho, std::string description = {});

  int dim() const { return oracle_->dim(); }
  bool exact() const { return oracle_->exact(); }
  int max_order() const { return exact() ? kExactOrder : kFiniteDifferenceOrder; }
  const WeightSpec& weight() const { return weight_; }
  double rho() const { return rho_; }
  const Domain& domain() const { return domain_; }
  const std::string& description() const { return description_; }
  const std::shared_ptr<const FieldOracle>& oracle() const { return oracle_; }

  cplx operator()(std::span<const double> p) const { return oracle_->value(p); }
  /// Weaken the class to rho' <= rho (S^m_rho is contained in S^m_rho').
  SymbolField with_rho(double rho) const;

 private:
  std::shared_ptr<const FieldOracle> oracle_;
  WeightSpec weight_;
  double rho_;
  Domain domain_;
  std::string description_;
};

/// d^alpha a at p: exact when available, otherwise central differences with
/// one Richardson level.
DerivativeValue eval_derivative(const SymbolField& a, std::span<const double> p,
                                const MultiIndex& alpha);

/// All derivatives up to `order` at p, as Taylor coefficients.
std::vector<cplx> taylor_coefficients(const SymbolField& a, std::span<const double> p,
                                      const JetSpace& space);

struct SeminormTable {
  std::map<MultiIndex, double> entries;
  SampleGrid grid;
  std::map<MultiIndex, std::vector<double>> witnesses;
};

void to_json(nlohmann::json& j, const SeminormTable& t);

/// max over the grid of |d^alpha a| / (m lambda^{-rho |alpha|}).
double seminorm_estimate(const SymbolField& a, const MultiIndex& alpha, const SampleGrid& grid,
                         SeminormTable* table = nullptr);

/// d^alpha a, declared in S^{m lambda^{-rho|alpha|}}_rho.
SymbolField derivative_symbol(const SymbolField& a, const MultiIndex& alpha);
/// a b, declared in S^{m l}_{min(rho_a, rho_b)}.
SymbolField product_symbol(const SymbolField& a, const SymbolField& b);
/// 1/a, declared in S^{m lambda^{-2 mu}}_rho after checking |a| >= C0 lambda^mu
/// on the grid. Throws SymbolError with the witness point on violation.
SymbolField reciprocal_symbol(const SymbolField& a, double C0, double mu, const SampleGrid& grid);

/// Step used by the finite-difference mode for derivative order k at coordinate x.
double finite_difference_step(int order, double x);

}  // namespace fiolab

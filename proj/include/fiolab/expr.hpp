#pragma once

// Small expression language for symbols, weights, phases and test functions.
//
// Expressions are immutable DAGs over indexed real variables with complex
// values. They are compiled to a Tape that evaluates either plain complex
// values or jets (exact partial derivatives of any order).
//
// Grammar (precedence low to high):
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?           exponent must be a constant
//   primary := number | 'i' | 'pi' | name | name '(' args ')' | '(' expr ')'
// Functions: exp log sqrt sin cos conj re im abs2 pow(u,p)
//            jb(u,...) = (1+u^2+...)^(1/2), norm(u,...) = (u^2+...)^(1/2),
//            lambda = jb over every variable of the table.

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fiolab/jet.hpp"

namespace fiolab {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : std::runtime_error(what), position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

/// Named variables of an expression domain, in index order.
class VariableTable {
 public:
  VariableTable() = default;
  explicit VariableTable(std::vector<std::string> names) : names_(std::move(names)) {}

  /// (x, t) for n = 1, (x1, x2, t1, t2) for n = 2.
  static VariableTable phase_space(int n);
  /// (x, y, t) for n = 1, (x1, x2, y1, y2, t1, t2) for n = 2.
  static VariableTable fio_space(int n, int N);
  /// y for n = 1, y1..yn otherwise.
  static VariableTable y_space(int n);
  /// v1..vd.
  static VariableTable generic(int d);

  int size() const noexcept { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  /// Index of `name`; accepts "theta"/"xi" for t and v1..vd positional names. -1 if unknown.
  int find(std::string_view name) const;

 private:
  std::vector<std::string> names_;
};

enum class Op {
  Const, Var, Add, Sub, Mul, Div, Neg, PowInt, PowReal,
  Exp, Log, Sqrt, Sin, Cos, Conj, Re, Im
};

class Expr {
 public:
  struct Node {
    Op op;
    cplx value{};      // Const
    int var = -1;      // Var
    int ipow = 0;      // PowInt
    double rpow = 0;   // PowReal
    std::vector<std::shared_ptr<const Node>> args;
  };

  Expr() : Expr(0.0) {}
  Expr(double v);  // NOLINT(google-explicit-constructor)
  Expr(cplx v);    // NOLINT(google-explicit-constructor)
  static Expr var(int index);

  const Node& node() const { return *node_; }
  const std::shared_ptr<const Node>& handle() const { return node_; }
  bool is_const() const { return node_->op == Op::Const; }
  /// Replace variable i by `replacement[i]`.
  Expr substitute(std::span<const Expr> replacement) const;
  /// Highest variable index referenced plus one.
  int arity() const;
  std::string to_string(const VariableTable& vars) const;

  friend Expr operator+(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a, const Expr& b);
  friend Expr operator*(const Expr& a, const Expr& b);
  friend Expr operator/(const Expr& a, const Expr& b);
  Expr operator-() const;

  friend Expr pow(const Expr& a, double p);
  friend Expr exp(const Expr& a);
  friend Expr log(const Expr& a);
  friend Expr sqrt(const Expr& a);
  friend Expr sin(const Expr& a);
  friend Expr cos(const Expr& a);
  friend Expr conj(const Expr& a);
  friend Expr re(const Expr& a);
  friend Expr im(const Expr& a);

 private:
  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  static Expr make(Op op, std::vector<Expr> args);
  std::shared_ptr<const Node> node_;
};

/// (1 + sum args^2)^(1/2)
Expr japanese_bracket(std::span<const Expr> args);

Expr parse_expression(std::string_view text, const VariableTable& vars);

/// Linearized expression ready for repeated evaluation.
class Tape {
 public:
  explicit Tape(const Expr& e);

  int arity() const noexcept { return arity_; }
  std::size_t slots() const noexcept { return code_.size(); }

  cplx eval(std::span<const double> point) const;
  /// Allocation-free variant; `work` must hold slots() entries.
  cplx eval(std::span<const double> point, std::span<cplx> work) const;

  /// Workspace for jet evaluation, reusable across calls for one space.
  struct JetWork {
    const JetSpace* space = nullptr;
    std::vector<cplx> slots;
    std::vector<cplx> scratch;
    std::vector<cplx> taylor;
  };
  /// Evaluate as a jet. Variable i is seeded with value point[i] and, if
  /// active[i] >= 0, unit first-order coefficient in jet variable active[i].
  /// Returns a view into `work` valid until the next call.
  std::span<const cplx> eval_jet(const JetSpace& space, std::span<const double> point,
                                 std::span<const int> active, JetWork& work) const;

 private:
  struct Instr {
    Op op;
    int a = -1, b = -1;
    cplx value{};
    int var = -1;
    int ipow = 0;
    double rpow = 0;
  };
  std::vector<Instr> code_;
  int arity_ = 0;
};

}  // namespace fiolab

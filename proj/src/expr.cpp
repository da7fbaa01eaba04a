#include "fiolab/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>
#include <unordered_map>

namespace fiolab {

// ---------------------------------------------------------------- variables

VariableTable VariableTable::phase_space(int n) {
  if (n == 1) return VariableTable({"x", "t"});
  std::vector<std::string> v;
  for (int i = 1; i <= n; ++i) v.push_back("x" + std::to_string(i));
  for (int i = 1; i <= n; ++i) v.push_back("t" + std::to_string(i));
  return VariableTable(std::move(v));
}

VariableTable VariableTable::fio_space(int n, int N) {
  if (n == 1 && N == 1) return VariableTable({"x", "y", "t"});
  std::vector<std::string> v;
  for (int i = 1; i <= n; ++i) v.push_back("x" + std::to_string(i));
  for (int i = 1; i <= n; ++i) v.push_back("y" + std::to_string(i));
  for (int i = 1; i <= N; ++i) v.push_back("t" + std::to_string(i));
  return VariableTable(std::move(v));
}

VariableTable VariableTable::y_space(int n) {
  if (n == 1) return VariableTable({"y"});
  std::vector<std::string> v;
  for (int i = 1; i <= n; ++i) v.push_back("y" + std::to_string(i));
  return VariableTable(std::move(v));
}

VariableTable VariableTable::generic(int d) {
  std::vector<std::string> v;
  for (int i = 1; i <= d; ++i) v.push_back("v" + std::to_string(i));
  return VariableTable(std::move(v));
}

int VariableTable::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return static_cast<int>(i);
  auto alias = [&](std::string_view from, std::string_view to) -> int {
    if (name.substr(0, from.size()) != from) return -1;
    std::string target(to);
    target += name.substr(from.size());
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == target) return static_cast<int>(i);
    return -1;
  };
  if (int k = alias("theta", "t"); k >= 0) return k;
  if (int k = alias("xi", "t"); k >= 0) return k;
  if (name.size() > 1 && name[0] == 'v' &&
      std::all_of(name.begin() + 1, name.end(), [](char c) { return std::isdigit(c); })) {
    int k = std::stoi(std::string(name.substr(1))) - 1;
    if (k >= 0 && k < size()) return k;
  }
  return -1;
}

// ---------------------------------------------------------------- expr

Expr::Expr(double v) : Expr(cplx(v, 0.0)) {}

Expr::Expr(cplx v) {
  auto n = std::make_shared<Node>();
  n->op = Op::Const;
  n->value = v;
  node_ = std::move(n);
}

Expr Expr::var(int index) {
  auto n = std::make_shared<Node>();
  n->op = Op::Var;
  n->var = index;
  return Expr(std::shared_ptr<const Node>(std::move(n)));
}

Expr Expr::make(Op op, std::vector<Expr> args) {
  auto n = std::make_shared<Node>();
  n->op = op;
  for (auto& a : args) n->args.push_back(a.node_);
  return Expr(std::shared_ptr<const Node>(std::move(n)));
}

namespace {
bool is_value(const Expr& e, double v) { return e.is_const() && e.node().value == cplx(v, 0.0); }
}  // namespace

// Constant folding keeps derived expressions (e.g. special phases) small.
Expr operator+(const Expr& a, const Expr& b) {
  if (a.is_const() && b.is_const()) return Expr(a.node().value + b.node().value);
  if (is_value(a, 0)) return b;
  if (is_value(b, 0)) return a;
  return Expr::make(Op::Add, {a, b});
}
Expr operator-(const Expr& a, const Expr& b) {
  if (a.is_const() && b.is_const()) return Expr(a.node().value - b.node().value);
  if (is_value(b, 0)) return a;
  if (is_value(a, 0)) return -b;
  return Expr::make(Op::Sub, {a, b});
}
Expr operator*(const Expr& a, const Expr& b) {
  if (a.is_const() && b.is_const()) return Expr(a.node().value * b.node().value);
  if (is_value(a, 0) || is_value(b, 0)) return Expr(0.0);
  if (is_value(a, 1)) return b;
  if (is_value(b, 1)) return a;
  return Expr::make(Op::Mul, {a, b});
}
Expr operator/(const Expr& a, const Expr& b) {
  if (a.is_const() && b.is_const()) return Expr(a.node().value / b.node().value);
  if (is_value(b, 1)) return a;
  return Expr::make(Op::Div, {a, b});
}
Expr Expr::operator-() const {
  if (is_const()) return Expr(-node_->value);
  return make(Op::Neg, {*this});
}

Expr pow(const Expr& a, double p) {
  if (a.is_const()) return Expr(std::pow(a.node().value, p));
  if (p == 1.0) return a;
  if (p == 0.0) return Expr(1.0);
  auto n = std::make_shared<Expr::Node>();
  n->args.push_back(a.node_);
  if (p == std::floor(p) && std::abs(p) <= 64) {
    n->op = Op::PowInt;
    n->ipow = static_cast<int>(p);
  } else {
    n->op = Op::PowReal;
    n->rpow = p;
  }
  return Expr(std::shared_ptr<const Expr::Node>(std::move(n)));
}

#define FIOLAB_UNARY(fn, OP, fold)                  \
  Expr fn(const Expr& a) {                          \
    if (a.is_const()) return Expr(fold(a.node().value)); \
    return Expr::make(Op::OP, {a});                 \
  }
FIOLAB_UNARY(exp, Exp, std::exp)
FIOLAB_UNARY(log, Log, std::log)
FIOLAB_UNARY(sqrt, Sqrt, std::sqrt)
FIOLAB_UNARY(sin, Sin, std::sin)
FIOLAB_UNARY(cos, Cos, std::cos)
FIOLAB_UNARY(conj, Conj, std::conj)
namespace {
cplx real_part(cplx z) { return z.real(); }
cplx imag_part(cplx z) { return z.imag(); }
}  // namespace
FIOLAB_UNARY(re, Re, real_part)
FIOLAB_UNARY(im, Im, imag_part)
#undef FIOLAB_UNARY

Expr japanese_bracket(std::span<const Expr> args) {
  Expr s(1.0);
  for (const auto& a : args) s = s + a * a;
  return sqrt(s);
}

Expr Expr::substitute(std::span<const Expr> replacement) const {
  std::unordered_map<const Node*, Expr> memo;
  auto rec = [&](auto&& self, const std::shared_ptr<const Node>& n) -> Expr {
    if (auto it = memo.find(n.get()); it != memo.end()) return it->second;
    Expr out;
    switch (n->op) {
      case Op::Const: out = Expr(n->value); break;
      case Op::Var:
        if (n->var < 0 || static_cast<std::size_t>(n->var) >= replacement.size())
          throw std::out_of_range("Expr::substitute: variable without replacement");
        out = replacement[static_cast<std::size_t>(n->var)];
        break;
      default: {
        std::vector<Expr> a;
        for (const auto& c : n->args) a.push_back(self(self, c));
        switch (n->op) {
          case Op::Add: out = a[0] + a[1]; break;
          case Op::Sub: out = a[0] - a[1]; break;
          case Op::Mul: out = a[0] * a[1]; break;
          case Op::Div: out = a[0] / a[1]; break;
          case Op::Neg: out = -a[0]; break;
          case Op::PowInt: out = pow(a[0], n->ipow); break;
          case Op::PowReal: out = pow(a[0], n->rpow); break;
          case Op::Exp: out = exp(a[0]); break;
          case Op::Log: out = log(a[0]); break;
          case Op::Sqrt: out = sqrt(a[0]); break;
          case Op::Sin: out = sin(a[0]); break;
          case Op::Cos: out = cos(a[0]); break;
          case Op::Conj: out = conj(a[0]); break;
          case Op::Re: out = re(a[0]); break;
          case Op::Im: out = im(a[0]); break;
          default: break;
        }
      }
    }
    memo.emplace(n.get(), out);
    return out;
  };
  return rec(rec, node_);
}

int Expr::arity() const {
  int top = 0;
  std::vector<const Node*> stack{node_.get()};
  while (!stack.empty()) {
    const Node* n = stack.back();
    stack.pop_back();
    if (n->op == Op::Var) top = std::max(top, n->var + 1);
    for (const auto& c : n->args) stack.push_back(c.get());
  }
  return top;
}

std::string Expr::to_string(const VariableTable& vars) const {
  auto rec = [&](auto&& self, const Node& n) -> std::string {
    auto arg = [&](std::size_t k) { return self(self, *n.args[k]); };
    std::ostringstream os;
    os.precision(17);
    switch (n.op) {
      case Op::Const:
        if (n.value.imag() == 0.0) os << n.value.real();
        else os << "(" << n.value.real() << "+" << n.value.imag() << "*i)";
        break;
      case Op::Var:
        os << (n.var < vars.size() ? vars.names()[static_cast<std::size_t>(n.var)]
                                   : "v" + std::to_string(n.var + 1));
        break;
      case Op::Add: os << "(" << arg(0) << "+" << arg(1) << ")"; break;
      case Op::Sub: os << "(" << arg(0) << "-" << arg(1) << ")"; break;
      case Op::Mul: os << "(" << arg(0) << "*" << arg(1) << ")"; break;
      case Op::Div: os << "(" << arg(0) << "/" << arg(1) << ")"; break;
      case Op::Neg: os << "(-" << arg(0) << ")"; break;
      case Op::PowInt: os << "(" << arg(0) << ")^(" << n.ipow << ")"; break;
      case Op::PowReal: os << "(" << arg(0) << ")^(" << n.rpow << ")"; break;
      case Op::Exp: os << "exp(" << arg(0) << ")"; break;
      case Op::Log: os << "log(" << arg(0) << ")"; break;
      case Op::Sqrt: os << "sqrt(" << arg(0) << ")"; break;
      case Op::Sin: os << "sin(" << arg(0) << ")"; break;
      case Op::Cos: os << "cos(" << arg(0) << ")"; break;
      case Op::Conj: os << "conj(" << arg(0) << ")"; break;
      case Op::Re: os << "re(" << arg(0) << ")"; break;
      case Op::Im: os << "im(" << arg(0) << ")"; break;
    }
    return os.str();
  };
  return rec(rec, *node_);
}

// ---------------------------------------------------------------- parser

namespace {

class Parser {
 public:
  Parser(std::string_view text, const VariableTable& vars) : s_(text), vars_(vars) {}

  Expr parse() {
    Expr e = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError("expression: " + msg + " at offset " + std::to_string(pos_), pos_);
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  Expr expr() {
    Expr e = term();
    for (;;) {
      if (accept('+')) e = e + term();
      else if (accept('-')) e = e - term();
      else return e;
    }
  }
  Expr term() {
    Expr e = unary();
    for (;;) {
      if (accept('*')) e = e * unary();
      else if (accept('/')) e = e / unary();
      else return e;
    }
  }
  Expr unary() {
    if (accept('-')) return -unary();
    if (accept('+')) return unary();
    return power();
  }
  Expr power() {
    Expr base = primary();
    if (accept('^')) {
      std::size_t at = pos_;
      Expr ex = unary();
      if (!ex.is_const() || ex.node().value.imag() != 0.0) {
        pos_ = at;
        fail("exponent must be a real constant");
      }
      return pow(base, ex.node().value.real());
    }
    return base;
  }
  std::vector<Expr> args() {
    std::vector<Expr> a;
    expect('(');
    if (accept(')')) return a;
    a.push_back(expr());
    while (accept(',')) a.push_back(expr());
    expect(')');
    return a;
  }
  Expr primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of expression");
    char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = expr();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      char* end = nullptr;
      std::string tmp(s_.substr(pos_, 64));
      double v = std::strtod(tmp.c_str(), &end);
      if (end == tmp.c_str()) fail("bad number");
      pos_ += static_cast<std::size_t>(end - tmp.c_str());
      return Expr(v);
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < s_.size() &&
             (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
        ++pos_;
      std::string name(s_.substr(start, pos_ - start));
      skip();
      bool call = pos_ < s_.size() && s_[pos_] == '(';
      if (!call) {
        if (name == "i") return Expr(cplx(0.0, 1.0));
        if (name == "pi") return Expr(std::numbers::pi);
        if (name == "lambda") return all_bracket();
        int k = vars_.find(name);
        if (k < 0) {
          pos_ = start;
          fail("unknown variable '" + name + "'");
        }
        return Expr::var(k);
      }
      std::size_t at = start;
      auto a = args();
      auto unary_fn = [&](auto fn) {
        if (a.size() != 1) {
          pos_ = at;
          fail(name + " takes one argument");
        }
        return fn(a[0]);
      };
      if (name == "exp") return unary_fn([](const Expr& u) { return exp(u); });
      if (name == "log") return unary_fn([](const Expr& u) { return log(u); });
      if (name == "sqrt") return unary_fn([](const Expr& u) { return sqrt(u); });
      if (name == "sin") return unary_fn([](const Expr& u) { return sin(u); });
      if (name == "cos") return unary_fn([](const Expr& u) { return cos(u); });
      if (name == "conj") return unary_fn([](const Expr& u) { return conj(u); });
      if (name == "re") return unary_fn([](const Expr& u) { return re(u); });
      if (name == "im") return unary_fn([](const Expr& u) { return im(u); });
      if (name == "abs2") return unary_fn([](const Expr& u) { return u * conj(u); });
      if (name == "jb") return japanese_bracket(a);
      if (name == "lambda" && a.empty()) return all_bracket();
      if (name == "norm") {
        Expr s(0.0);
        for (const auto& u : a) s = s + u * u;
        return sqrt(s);
      }
      if (name == "pow") {
        if (a.size() != 2 || !a[1].is_const()) {
          pos_ = at;
          fail("pow(u, p) needs a constant exponent");
        }
        return fiolab::pow(a[0], a[1].node().value.real());
      }
      pos_ = at;
      fail("unknown function '" + name + "'");
    }
    fail(std::string("unexpected '") + c + "'");
  }
  Expr all_bracket() {
    std::vector<Expr> v;
    for (int k = 0; k < vars_.size(); ++k) v.push_back(Expr::var(k));
    return japanese_bracket(v);
  }

  std::string_view s_;
  const VariableTable& vars_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse_expression(std::string_view text, const VariableTable& vars) {
  return Parser(text, vars).parse();
}

// ---------------------------------------------------------------- tape

Tape::Tape(const Expr& e) {
  std::unordered_map<const Expr::Node*, int> slot;
  auto rec = [&](auto&& self, const Expr::Node& n) -> int {
    if (auto it = slot.find(&n); it != slot.end()) return it->second;
    Instr ins;
    ins.op = n.op;
    if (!n.args.empty()) ins.a = self(self, *n.args[0]);
    if (n.args.size() > 1) ins.b = self(self, *n.args[1]);
    ins.value = n.value;
    ins.var = n.var;
    ins.ipow = n.ipow;
    ins.rpow = n.rpow;
    if (n.op == Op::Var) arity_ = std::max(arity_, n.var + 1);
    code_.push_back(ins);
    int id = static_cast<int>(code_.size()) - 1;
    slot.emplace(&n, id);
    return id;
  };
  rec(rec, e.node());
}

cplx Tape::eval(std::span<const double> point) const {
  std::vector<cplx> work(code_.size());
  return eval(point, work);
}

cplx Tape::eval(std::span<const double> point, std::span<cplx> w) const {
  for (std::size_t k = 0; k < code_.size(); ++k) {
    const Instr& I = code_[k];
    cplx a = I.a >= 0 ? w[static_cast<std::size_t>(I.a)] : cplx{};
    cplx b = I.b >= 0 ? w[static_cast<std::size_t>(I.b)] : cplx{};
    cplx r;
    switch (I.op) {
      case Op::Const: r = I.value; break;
      case Op::Var: r = point[static_cast<std::size_t>(I.var)]; break;
      case Op::Add: r = a + b; break;
      case Op::Sub: r = a - b; break;
      case Op::Mul: r = a * b; break;
      case Op::Div: r = a / b; break;
      case Op::Neg: r = -a; break;
      case Op::PowInt: {
        int p = I.ipow;
        cplx base = p < 0 ? 1.0 / a : a;
        r = 1.0;
        for (int j = 0; j < std::abs(p); ++j) r *= base;
        break;
      }
      case Op::PowReal:
        r = a.imag() == 0.0 && a.real() >= 0.0 ? cplx(std::pow(a.real(), I.rpow)) : std::pow(a, I.rpow);
        break;
      case Op::Exp: r = a.imag() == 0.0 ? cplx(std::exp(a.real())) : std::exp(a); break;
      case Op::Log: r = std::log(a); break;
      case Op::Sqrt: r = a.imag() == 0.0 && a.real() >= 0.0 ? cplx(std::sqrt(a.real())) : std::sqrt(a); break;
      case Op::Sin: r = std::sin(a); break;
      case Op::Cos: r = std::cos(a); break;
      case Op::Conj: r = std::conj(a); break;
      case Op::Re: r = a.real(); break;
      case Op::Im: r = a.imag(); break;
    }
    w[k] = r;
  }
  return w[code_.size() - 1];
}

std::span<const cplx> Tape::eval_jet(const JetSpace& space, std::span<const double> point,
                                     std::span<const int> active, JetWork& work) const {
  const std::size_t n = space.size();
  if (work.space != &space || work.slots.size() != n * code_.size()) {
    work.space = &space;
    work.slots.assign(n * code_.size(), cplx{});
    work.scratch.assign(3 * n, cplx{});
  }
  const int K = space.order();
  for (std::size_t k = 0; k < code_.size(); ++k) {
    const Instr& I = code_[k];
    cplx* out = work.slots.data() + k * n;
    const cplx* a = I.a >= 0 ? work.slots.data() + static_cast<std::size_t>(I.a) * n : nullptr;
    const cplx* b = I.b >= 0 ? work.slots.data() + static_cast<std::size_t>(I.b) * n : nullptr;
    auto compose_with = [&](std::vector<cplx> t) {
      space.compose(out, a, t, work.scratch.data());
    };
    switch (I.op) {
      case Op::Const:
        std::fill(out, out + n, cplx{});
        out[0] = I.value;
        break;
      case Op::Var: {
        std::fill(out, out + n, cplx{});
        const auto v = static_cast<std::size_t>(I.var);
        out[0] = point[v];
        if (v < active.size() && active[v] >= 0 && K >= 1) out[space.linear_index(active[v])] = 1.0;
        break;
      }
      case Op::Add: for (std::size_t j = 0; j < n; ++j) out[j] = a[j] + b[j]; break;
      case Op::Sub: for (std::size_t j = 0; j < n; ++j) out[j] = a[j] - b[j]; break;
      case Op::Mul: space.mul(out, a, b); break;
      case Op::Div: {
        cplx* recip = work.scratch.data() + 2 * n;
        // compose() uses scratch[0, 2n), so the reciprocal lives in [2n, 3n)
        space.compose(recip, b, taylor_pow(b[0], -1.0, K), work.scratch.data());
        space.mul(out, a, recip);
        break;
      }
      case Op::Neg: for (std::size_t j = 0; j < n; ++j) out[j] = -a[j]; break;
      case Op::PowInt: {
        int p = I.ipow;
        if (p < 0) {
          compose_with(taylor_pow(a[0], static_cast<double>(p), K));
          break;
        }
        cplx* acc = work.scratch.data();
        cplx* tmp = work.scratch.data() + n;
        std::fill(acc, acc + n, cplx{});
        acc[0] = 1.0;
        for (int j = 0; j < p; ++j) {
          space.mul(tmp, acc, a);
          std::copy(tmp, tmp + n, acc);
        }
        std::copy(acc, acc + n, out);
        break;
      }
      case Op::PowReal: compose_with(taylor_pow(a[0], I.rpow, K)); break;
      case Op::Exp: compose_with(taylor_exp(a[0], K)); break;
      case Op::Log: compose_with(taylor_log(a[0], K)); break;
      case Op::Sqrt: compose_with(taylor_pow(a[0], 0.5, K)); break;
      case Op::Sin: compose_with(taylor_sin(a[0], K)); break;
      case Op::Cos: compose_with(taylor_cos(a[0], K)); break;
      case Op::Conj: for (std::size_t j = 0; j < n; ++j) out[j] = std::conj(a[j]); break;
      case Op::Re: for (std::size_t j = 0; j < n; ++j) out[j] = a[j].real(); break;
      case Op::Im: for (std::size_t j = 0; j < n; ++j) out[j] = a[j].imag(); break;
    }
  }
  return {work.slots.data() + (code_.size() - 1) * n, n};
}

}  // namespace fiolab

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "fiolab/expr.hpp"

using namespace fiolab;

TEST_CASE("parser handles precedence, functions and constants") {
  auto vars = VariableTable::phase_space(1);
  double p[] = {2.0, 3.0};
  CHECK(Tape(parse_expression("1 + 2*x^2 - t/3", vars)).eval(p).real() == doctest::Approx(8.0));
  CHECK(Tape(parse_expression("-x^2", vars)).eval(p).real() == doctest::Approx(-4.0));
  CHECK(Tape(parse_expression("2^-1", vars)).eval(p).real() == doctest::Approx(0.5));
  CHECK(Tape(parse_expression("exp(-x*theta)", vars)).eval(p).real() == doctest::Approx(std::exp(-6.0)));
  CHECK(Tape(parse_expression("lambda", vars)).eval(p).real() == doctest::Approx(std::sqrt(14.0)));
  CHECK(Tape(parse_expression("jb(x)^2", vars)).eval(p).real() == doctest::Approx(5.0));
  CHECK(Tape(parse_expression("norm(v1, v2)", vars)).eval(p).real() == doctest::Approx(std::sqrt(13.0)));
  auto z = Tape(parse_expression("exp(i*pi)", vars)).eval(p);
  CHECK(z.real() == doctest::Approx(-1.0));
  CHECK(std::abs(z.imag()) < 1e-15);
  CHECK(Tape(parse_expression("abs2(1 + i*x)", vars)).eval(p).real() == doctest::Approx(5.0));
}

TEST_CASE("parse errors carry positions") {
  auto vars = VariableTable::phase_space(1);
  CHECK_THROWS_AS(parse_expression("x + q", vars), ParseError);
  try {
    parse_expression("x + q", vars);
  } catch (const ParseError& e) {
    CHECK(e.position() == 4);
  }
  CHECK_THROWS_AS(parse_expression("x^t", vars), ParseError);
  CHECK_THROWS_AS(parse_expression("foo(x)", vars), ParseError);
  CHECK_THROWS_AS(parse_expression("(x", vars), ParseError);
}

TEST_CASE("jet evaluation of a tape gives exact derivatives") {
  auto vars = VariableTable::phase_space(1);
  Tape tape(parse_expression("exp(-x^2) * jb(t)^(-1)", vars));
  auto sp = jet_space(2, 3);
  Tape::JetWork work;
  double p[] = {1.0, 2.0};
  int active[] = {0, 1};
  auto c = tape.eval_jet(*sp, p, active, work);
  int dx[] = {1, 0};
  // d/dx = -2x e^{-x^2} / sqrt(1+t^2)
  CHECK(std::abs(c[sp->index(dx)] - (-2.0 * std::exp(-1.0) / std::sqrt(5.0))) < 1e-14);
  CHECK(std::abs(c[0] - tape.eval(p)) < 1e-15);
}

TEST_CASE("substitution composes expressions") {
  auto vars = VariableTable::phase_space(1);
  Expr s = parse_expression("x*t + t^2/2", vars);
  // embed S(x, t) into (x, y, t) and subtract y t
  Expr x = Expr::var(0), y = Expr::var(1), t = Expr::var(2);
  Expr repl[] = {x, t};
  Expr phi = s.substitute(repl) - y * t;
  double p[] = {1.0, 0.5, 2.0};
  CHECK(Tape(phi).eval(p).real() == doctest::Approx(2.0 + 2.0 - 1.0));
  CHECK(phi.arity() == 3);
}

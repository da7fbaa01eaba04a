#include <cmath>
#include <random>

#include "doctest.h"
#include "fiolab/jet.hpp"

using namespace fiolab;

TEST_CASE("jet space enumerates graded multi-indices") {
  auto sp = jet_space(2, 3);
  CHECK(sp->size() == 10);
  CHECK(sp->degree(0) == 0);
  CHECK(sp->degree(9) == 3);
  int a[] = {1, 2};
  auto k = sp->index(a);
  CHECK(sp->exponent(k)[0] == 1);
  CHECK(sp->exponent(k)[1] == 2);
  CHECK(sp->factorial(k) == 2.0);
  int too_high[] = {2, 2};
  CHECK_THROWS_AS(sp->index(too_high), std::out_of_range);
}

TEST_CASE("lower-order spaces are prefixes of higher-order ones") {
  for (int d = 1; d <= 4; ++d) {
    auto lo = jet_space(d, 3), hi = jet_space(d, 5);
    for (std::size_t k = 0; k < lo->size(); ++k) {
      auto a = lo->exponent(k), b = hi->exponent(k);
      CHECK(std::equal(a.begin(), a.end(), b.begin()));
    }
  }
}

TEST_CASE("jet products and compositions match analytic derivatives") {
  auto sp = jet_space(2, 4);
  const double x0 = 0.3, y0 = -0.7;
  Jet x = Jet::variable(sp, 0, x0), y = Jet::variable(sp, 1, y0);
  Jet f = exp(x * y) * sin(x);
  // d/dx: y e^{xy} sin x + e^{xy} cos x
  int dx[] = {1, 0};
  double ref = std::exp(x0 * y0) * (y0 * std::sin(x0) + std::cos(x0));
  CHECK(std::abs(f.partial(dx) - ref) < 1e-14);
  // d^2/dxdy of e^{xy} = e^{xy}(1 + xy)
  Jet g = exp(x * y);
  int dxy[] = {1, 1};
  CHECK(std::abs(g.partial(dxy) - std::exp(x0 * y0) * (1 + x0 * y0)) < 1e-14);
  // d^4/dy^4 of e^{xy} = x^4 e^{xy}
  int dy4[] = {0, 4};
  CHECK(std::abs(g.partial(dy4) - std::pow(x0, 4) * std::exp(x0 * y0)) < 1e-14);
}

TEST_CASE("jet division, pow and log are mutually consistent") {
  auto sp = jet_space(3, 3);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.2, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    Jet a = Jet::variable(sp, 0, u(rng)) + Jet::variable(sp, 1, u(rng)) * Jet::variable(sp, 2, u(rng));
    Jet one = a / a;
    CHECK(std::abs(one.value() - 1.0) < 1e-14);
    for (std::size_t k = 1; k < sp->size(); ++k) CHECK(std::abs(one.coeffs()[k]) < 1e-12);
    Jet p = pow(a, 2.5);
    Jet q = exp(2.5 * log(a));
    for (std::size_t k = 0; k < sp->size(); ++k)
      CHECK(std::abs(p.coeffs()[k] - q.coeffs()[k]) < 1e-11 * (1 + std::abs(p.coeffs()[k])));
    Jet s = sin(a) * sin(a) + cos(a) * cos(a);
    CHECK(std::abs(s.value() - 1.0) < 1e-14);
    for (std::size_t k = 1; k < sp->size(); ++k) CHECK(std::abs(s.coeffs()[k]) < 1e-12);
  }
}

TEST_CASE("jet derivative lowers the order by one") {
  auto sp = jet_space(1, 5);
  Jet x = Jet::variable(sp, 0, 0.5);
  Jet f = pow(x, 5.0);
  Jet df = derivative(f, 0);
  int d3[] = {3};
  // d^3/dx^3 (5 x^4) = 120 x
  CHECK(std::abs(df.partial(d3) - 60.0) < 1e-12);
}

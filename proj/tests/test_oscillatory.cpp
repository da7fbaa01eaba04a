#include <cmath>
#include <numbers>

#include "doctest.h"
#include "fiolab/oscillatory.hpp"

using namespace fiolab;

namespace {

PhaseField phase(const std::string& text) {
  return PhaseField(parse_expression(text, VariableTable::fio_space(1, 1)), 1, 1, text);
}

SymbolField amp(const std::string& text) {
  return SymbolField::parse(text, VariableTable::fio_space(1, 1), constant_weight(1.0, 3), 0.0);
}

SymbolField fy(const std::string& text) {
  return SymbolField::parse(text, VariableTable::y_space(1), constant_weight(1.0, 1), 0.0);
}

std::vector<double> pt(double x, double y, double t) { return {x, y, t}; }

// c_v = d_v phi / (i D), D = |grad_(y,t) phi|^2, from the closed-form gradient of
// phi = (x - y) t + t^3 / 6.
cplx c_oracle(int v, double x, double y, double t) {
  const double gy = -t, gt = x - y + t * t / 2;
  const double D = gy * gy + gt * gt;
  return (v == 0 ? gy : gt) / cplx(0.0, D);
}

}  // namespace

TEST_CASE("bump chi") {
  CHECK(chi(0.0) == 1.0);
  CHECK(chi(1.0) == 1.0);
  CHECK(chi(-0.7) == 1.0);
  CHECK(chi(2.0) == 0.0);
  CHECK(chi(-3.5) == 0.0);
  CHECK(chi(1.5) == doctest::Approx(0.5));
  double prev = 1.0;
  for (int i = 1; i < 100; ++i) {
    const double v = chi(1.0 + i / 100.0);
    CHECK(v <= prev);
    CHECK(v > 0.0);
    if (i >= 10 && i <= 90) CHECK(v < prev);
    prev = v;
  }
  CHECK(chi(1.3) == chi(-1.3));

  // Taylor coefficients against central differences.
  for (double t0 : {1.2, 1.5, 1.83}) {
    auto c = taylor_chi(t0, 3);
    const double h = 1e-4;
    CHECK(c[0].real() == chi(t0));
    CHECK(c[1].real() == doctest::Approx((chi(t0 + h) - chi(t0 - h)) / (2 * h)).epsilon(1e-6));
    CHECK(2 * c[2].real() ==
          doctest::Approx((chi(t0 + h) - 2 * chi(t0) + chi(t0 - h)) / (h * h)).epsilon(1e-4));
  }
  auto flat = taylor_chi(0.5, 4);
  CHECK(flat[0] == cplx(1.0));
  for (int j = 1; j <= 4; ++j) CHECK(flat[static_cast<std::size_t>(j)] == cplx(0.0));
}

TEST_CASE("cutoff kinds") {
  CutoffSpec g{CutoffKind::Gaussian}, b{CutoffKind::SmoothBump};
  std::vector<double> zero{0.0, 0.0}, far{3.0, 0.0};
  CHECK(g(zero) == 1.0);
  CHECK(b(zero) == 1.0);
  CHECK(b(far) == 0.0);
  CHECK(g(far) == doctest::Approx(std::exp(-9.0)));
  CHECK(b.support() == 2.0);
  CHECK(std::exp(-g.support(1e-18) * g.support(1e-18)) == doctest::Approx(1e-18));
  CHECK(cutoff_from_string("SMOOTH_BUMP") == CutoffKind::SmoothBump);
  CHECK(to_string(CutoffKind::Gaussian) == "GAUSSIAN");
  CHECK_THROWS_AS(cutoff_from_string("box"), OscError);
}

TEST_CASE("partition omega") {
  auto phi = phase("(x-y)*t");
  CHECK(omega_partition(phi, 0.01, pt(1, 1, 0)) == 1.0);
  CHECK(omega_partition(phi, 0.01, pt(0, 0, 5)) == 0.0);
  // D / lambda^2 = 1.5 eps exactly: (x, y, t) = (0, 0, t) gives t^2 / (1 + t^2).
  const double eps = 0.2, t = std::sqrt(1.5 * eps / (1 - 1.5 * eps));
  const double w = omega_partition(phi, eps, pt(0, 0, t));
  CHECK(w > 0.0);
  CHECK(w < 1.0);
  CHECK(w == doctest::Approx(0.5));
  CHECK_THROWS_AS(omega_partition(phi, 0.0, pt(0, 0, 1)), OscError);
}

TEST_CASE("transpose coefficients") {
  auto L = ibp_operator(phase("(x-y)*t"), 0.4);
  auto c = L.coefficients(pt(0, 1, 1));
  CHECK(c.D == 2.0);
  CHECK(std::abs(c.F[0] - 1.0 / cplx(0.0, 2.0)) < 1e-15);
  CHECK(std::abs(c.G[0] - (-(-1.0) / cplx(0.0, 2.0))) < 1e-15);
  CHECK(c.H_laplacian == cplx(0.0));
  // The derivative of 1/D survives for a bilinear phase: H = 4 t (x - y) / (i D^2).
  CHECK(std::abs(c.H - cplx(0.0, 1.0)) < 1e-15);
  auto c2 = L.coefficients(pt(0.5, -1.0, 2.0));
  CHECK(std::abs(c2.H - 4 * 2.0 * 1.5 / cplx(0.0, 6.25 * 6.25)) < 1e-15);
  CHECK(c2.H_laplacian == cplx(0.0));
  CHECK_THROWS_AS(L.coefficients(pt(1, 1, 0)), OscError);
}

TEST_CASE("transpose against a finite-difference oracle") {
  auto L = ibp_operator(phase("(x-y)*t + t^3/6"), 0.05);
  const double x = 0.3, y = -0.9, t = 1.1, h = 1e-5;
  auto pa = pt(x, y, t);
  REQUIRE(L.in_omega0(pa));

  // H = -sum_v d_v c_v.
  const cplx dcy = (c_oracle(0, x, y + h, t) - c_oracle(0, x, y - h, t)) / (2 * h);
  const cplx dct = (c_oracle(1, x, y, t + h) - c_oracle(1, x, y, t - h)) / (2 * h);
  auto co = L.coefficients(pa);
  CHECK(std::abs(co.H - (-(dcy + dct))) < 1e-8);
  CHECK(std::abs(co.F[0] + c_oracle(0, x, y, t)) < 1e-14);
  CHECK(std::abs(co.G[0] + c_oracle(1, x, y, t)) < 1e-14);

  // tL w = -sum_v d_v (c_v w) for w = exp(-y^2) cos(t) given as a jet.
  auto w = [](double yy, double tt) { return std::exp(-yy * yy) * std::cos(tt); };
  const double wy = -2 * y * w(y, t), wt = -std::exp(-y * y) * std::sin(t);
  std::vector<cplx> b{w(y, t), wy, wt};  // order-1 jet in (y, t)
  const cplx fd = -((c_oracle(0, x, y + h, t) * w(y + h, t) - c_oracle(0, x, y - h, t) * w(y - h, t)) / (2 * h) +
                    (c_oracle(1, x, y, t + h) * w(y, t + h) - c_oracle(1, x, y, t - h) * w(y, t - h)) / (2 * h));
  CHECK(std::abs(L.apply_transpose(pa, b, 1) - fd) < 1e-8);

  // (tL)^2 b = sum_gamma g_gamma d^gamma b.
  auto space = jet_space(2, 2);
  std::vector<cplx> b2(space->size());
  for (std::size_t i = 0; i < b2.size(); ++i) b2[i] = cplx(0.3 * static_cast<double>(i) - 0.4, 0.1 * static_cast<double>(i));
  auto g = L.iterated_coefficients(pa, 2);
  CHECK(g.size() == 6);
  cplx via = 0.0;
  for (std::size_t i = 0; i < space->size(); ++i) {
    auto e = space->exponent(i);
    via += g.at(MultiIndex(e.begin(), e.end())) * b2[i] * space->factorial(i);
  }
  CHECK(std::abs(L.apply_transpose(pa, b2, 2) - via) < 1e-12);
  CHECK_THROWS_AS(L.apply_transpose(pa, b, 2), OscError);
}

TEST_CASE("L reproduces the exponential") {
  for (const char* s : {"(x-y)*t", "(x-y)*t + t^3/6", "x*t + sin(t) - y*t"}) {
    auto L = ibp_operator(phase(s), 0.05);
    CHECK(L_identity_error(L) < 1e-10);
  }
}

TEST_CASE("limit extrapolation") {
  std::vector<double> s{4, 8, 16, 32};
  std::vector<cplx> v;
  for (double x : s) v.emplace_back(2.0 + 3.0 / (x * x));
  auto [lim, p] = extrapolate_limit(s, v, 1e-12);
  CHECK(std::abs(lim - 2.0) < 1e-12);
  REQUIRE(p);
  CHECK(*p == doctest::Approx(2.0));
  std::vector<cplx> flat(4, cplx(1.5));
  auto [l2, p2] = extrapolate_limit(s, flat, 1e-12);
  CHECK(l2 == cplx(1.5));
  CHECK(!p2);
}

TEST_CASE("regularized Fourier inversion") {
  auto phi = phase("(x-y)*t");
  auto one = amp("1");
  auto f = fy("exp(-y^2/2)");
  std::vector<double> sched{4, 8, 16, 32, 64};

  std::vector<double> x0{0.0};
  // Both variables are cut off by exp(-|(y, t)|^2 / sigma^2).
  for (double s : {2.0, 4.0, 8.0}) {
    const cplx v = regularized_value(one, phi, f, x0, s, CutoffSpec{CutoffKind::Gaussian});
    CHECK(std::abs(v - s * s / std::sqrt(s * s * s * s + 2 * s * s + 4)) < 1e-12);
  }

  auto r = regularized_fio_apply(one, phi, f, x0, sched, CutoffSpec{CutoffKind::Gaussian});
  CHECK(std::abs(r.value - 1.0) < 1e-6);
  REQUIRE(r.cutoff_gap);
  CHECK(*r.cutoff_gap < 1e-3);
  CHECK(r.sigma_residuals.size() == sched.size());

  std::vector<double> x1{1.0};
  auto r1 = regularized_fio_apply(one, phi, f, x1, sched, CutoffSpec{CutoffKind::SmoothBump}, {}, false);
  CHECK(std::abs(r1.value - std::exp(-0.5)) < 1e-6);
  CHECK(!r1.cutoff_gap);
  CHECK(r1.cutoff == CutoffKind::SmoothBump);

  // Absolutely integrable amplitude: (1/2pi) int e^{-t^2} sqrt(2 pi) e^{-t^2/2} dt = 1/sqrt(3).
  auto ag = amp("exp(-t^2)");
  auto r2 = regularized_fio_apply(ag, phi, f, x0, sched, CutoffSpec{CutoffKind::Gaussian}, {}, false);
  auto r3 = regularized_fio_apply(ag, phi, f, x0, sched, CutoffSpec{CutoffKind::SmoothBump}, {}, false);
  CHECK(std::abs(r2.value - 1.0 / std::sqrt(3.0)) < 1e-8);
  CHECK(std::abs(r3.value - 1.0 / std::sqrt(3.0)) < 1e-12);
  CHECK(std::abs(r2.value - r3.value) < 1e-8);

  auto j = nlohmann::json(r2);
  CHECK(j["cutoff"] == "GAUSSIAN");
  CHECK(j["sigma_residuals"].size() == sched.size());
  CHECK(j["value"]["re"].get<double>() == r2.value.real());
}

TEST_CASE("non-convergent regularization") {
  // No y dependence in the phase: the t integral grows like sigma.
  auto phi = phase("x*t");
  std::vector<double> sched{2, 4, 8};
  std::vector<double> x0{0.5};
  try {
    regularized_fio_apply(amp("1"), phi, fy("exp(-y^2/2)"), x0, sched, CutoffSpec{CutoffKind::Gaussian}, {}, false);
    FAIL("expected NonConvergence");
  } catch (const NonConvergence& e) {
    CHECK(e.residuals().size() == sched.size());
  }
  CHECK_THROWS_AS(regularized_fio_apply(amp("1"), phi, fy("1"), std::vector<double>{0.0, 1.0}, sched,
                                        CutoffSpec{}, {}, false),
                  OscError);
}

TEST_CASE("integration by parts leaves the value unchanged") {
  auto L = ibp_operator(phase("(x-y)*t"), 0.4);
  auto one = amp("1");
  auto f = fy("exp(-y^2/2)");
  std::vector<double> x0{0.0};
  auto v0 = fio_apply_ibp(one, L, f, x0, 0, 8.0);
  auto v1 = fio_apply_ibp(one, L, f, x0, 1, 8.0);
  auto v2 = fio_apply_ibp(one, L, f, x0, 2, 8.0);
  CHECK(v2.ibp_order == 2);
  REQUIRE(v2.truncation_radius);
  CHECK(*v2.truncation_radius == 8.0);
  CHECK(std::abs(v2.value - 1.0) < 1e-8);
  CHECK(std::abs(v1.value - v2.value) < 1e-6);
  // The plain truncated integral converges slowly; the tapered box keeps it close.
  CHECK(std::abs(v0.value - 1.0) < 1e-2);
  CHECK_THROWS_AS(fio_apply_ibp(one, L, f, x0, -1, 8.0), OscError);
  CHECK_THROWS_AS(fio_apply_ibp(one, L, f, x0, 9, 8.0), OscError);
}

TEST_CASE("integrand away from the stationary set") {
  auto L = ibp_operator(phase("(x-y)*t"), 0.4);
  auto one = amp("1");
  auto f = fy("exp(-y^2/2)");
  // Inside supp omega the integrand is e^{i phi} a f for every k.
  auto p = pt(0.0, 0.1, 0.1);
  const cplx base = std::exp(cplx(0.0, -0.01)) * std::exp(-0.005);
  for (int k = 0; k <= 3; ++k) CHECK(std::abs(L.integrand(one, f, p, k) - base) < 1e-15);
  // Far out, one application of tL is e^{i phi} (tL)(a f): compare with the jet form.
  auto q = pt(0.0, 0.5, 6.0);
  std::vector<cplx> b{std::exp(-0.125), -0.5 * std::exp(-0.125), 0.0};
  const cplx e = std::exp(cplx(0.0, -3.0));
  CHECK(std::abs(L.integrand(one, f, q, 1) - e * L.apply_transpose(q, b, 1)) < 1e-15);
}

TEST_CASE("truncation tail") {
  auto L = ibp_operator(phase("(x-y)*t"), 0.4);
  std::vector<double> x0{0.0}, radii{6.0, 12.0};
  auto t = ibp_tail(amp("1"), L, fy("exp(-y^2/2)"), x0, 2, radii);
  CHECK(t.predicted == 1.0);
  CHECK(t.mass.size() == 2);
  CHECK(t.mass[1].second < t.mass[0].second);
  CHECK(t.slope == doctest::Approx(1.0).epsilon(0.2));
  auto j = nlohmann::json(t);
  CHECK(j["k"] == 2);
  std::vector<double> one_radius{6.0};
  CHECK_THROWS_AS(ibp_tail(amp("1"), L, fy("exp(-y^2/2)"), x0, 2, one_radius), OscError);
}

TEST_CASE("eps0 choice and coefficient decay") {
  auto phi = phase("(x-y)*t");
  HypothesisGrid grid;
  auto c = choose_eps0(phi, grid);
  CHECK(c.admissible);
  CHECK(c.eps0 == 0.4);
  CHECK(c.constants.at(0.4) < 1e4);
  CHECK(c.constants.at(0.4) > 1.0);

  // Forcing a tiny cap exhausts the candidates and leaves a witness.
  auto bad = choose_eps0(phi, grid, 1.0, {0.4, 0.2});
  CHECK(!bad.admissible);
  CHECK(bad.witness);
  CHECK(bad.eps0 == 0.2);

  // C(eps) can only shrink with eps: supp omega_eps shrinks.
  CHECK(majoration_constant(phi, 0.1, grid) <= majoration_constant(phi, 0.4, grid));

  auto L = ibp_operator(phi, c.eps0);
  auto rep = verify_ibp_coefficients(L, grid);
  CHECK(rep.pass);
  CHECK(rep.constants.count("F1*lambda") == 1);
  CHECK(rep.constants.count("H*lambda^2") == 1);
  for (const auto& [k, g] : rep.growth) CHECK(g <= grid.growth_tolerance);

  auto j = nlohmann::json(c);
  CHECK(j["eps0"] == 0.4);
}

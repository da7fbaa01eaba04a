#include <cmath>
#include <numbers>

#include "doctest.h"
#include "fiolab/pdo_check.hpp"

using namespace fiolab;

namespace {

GeneratingFunction gen(const std::string& text, int n = 1) {
  return GeneratingFunction(parse_expression(text, VariableTable::phase_space(n)), n, text);
}

SymbolField sym(const std::string& text, int n = 1) {
  return SymbolField::parse(text, VariableTable::phase_space(n), constant_weight(1.0, 2 * n), 0.0);
}

GridSpec aligned(int M, double R) { return GridSpec{1, R, M, true}; }

// Exact Kohn-Nirenberg symbol of FF* for S = x t, a = exp(-x^2 - t^2), by
// Gaussian integration of the composed kernel.
cplx gaussian_ffstar_symbol(double x, double xi) {
  return std::exp(cplx(-10 * x * x / 9 - 2 * xi * xi / 9, -8 * x * xi / 9)) / 3.0;
}

std::vector<double> v1(double a) { return {a}; }

}  // namespace

TEST_CASE("predicted symbol formula") {
  auto p = predicted_symbol(gen("x*t"), sym("1"), v1(0.7), v1(-1.3), Composition::FFStar);
  CHECK(p.value == 1.0);
  CHECK(p.x[0] == 0.7);
  CHECK(p.xi[0] == -1.3);
  CHECK(predicted_symbol(gen("x*t"), sym("exp(-x^2-t^2)"), v1(0), v1(0), Composition::FFStar).value == 1.0);
  CHECK(predicted_symbol(gen("2*x*t"), sym("1"), v1(3), v1(-2), Composition::FFStar).value == 0.5);

  // FF* and F*F share the value; only the base point moves.
  auto S = gen("x*t + t^2/2 + x^2/4");
  auto a = sym("exp(-t^2/4)/(1+x^2)");
  auto f = predicted_symbol(S, a, v1(1.5), v1(0.5), Composition::FFStar);
  auto g = predicted_symbol(S, a, v1(1.5), v1(0.5), Composition::FStarF);
  CHECK(f.value == g.value);
  CHECK(f.xi[0] == doctest::Approx(0.5 + 0.75));
  CHECK(g.x[0] == doctest::Approx(1.5 + 0.5));
  CHECK(g.xi[0] == 0.5);

  CHECK_THROWS_AS(predicted_symbol(gen("x^2 + t^2"), sym("1"), v1(1), v1(1), Composition::FFStar), PdoError);

  // Rescaling a by c scales the prediction by c^2.
  auto a3 = sym("3*exp(-t^2/4)/(1+x^2)");
  CHECK(predicted_symbol(S, a3, v1(1.5), v1(0.5), Composition::FFStar).value == doctest::Approx(9 * f.value).epsilon(1e-14));
}

TEST_CASE("theta inverse") {
  int it = -1;
  auto t = theta_inverse(gen("x*t"), v1(0.4), v1(2.5), v1(0.0), 1e-8, &it);
  CHECK(t[0] == 2.5);
  CHECK(it <= 1);
  CHECK(theta_inverse(gen("x*t + t^2/2"), v1(1), v1(-3), v1(0))[0] == doctest::Approx(-3));
  CHECK(theta_inverse(gen("2*x*t + t^2/2"), v1(1), v1(3), v1(0))[0] == doctest::Approx(1.5));
  auto S = gen("x*t + sin(t)/2");  // d_x S = t, trivially; use a genuinely nonlinear one below
  CHECK(theta_inverse(S, v1(0.3), v1(0.9), v1(0))[0] == doctest::Approx(0.9));
  auto N = gen("x*t + x*sin(t)/2");
  auto tn = theta_inverse(N, v1(0.3), v1(0.9), v1(0));
  CHECK(std::abs(tn[0] + std::sin(tn[0]) / 2 - 0.9) < 1e-12);
  CHECK_THROWS_AS(theta_inverse(gen("x^2 + t^2"), v1(1), v1(1), v1(0)), PdoError);
}

TEST_CASE("extraction from the identity and the zero operator") {
  const GridSpec y = aligned(256, 8.0);
  auto F = discretize_fio(gen("x*t"), sym("1"), y, y, y.dual(), Route::Spectral);
  auto I = compose(F, adjoint(F));
  const double nyq = std::numbers::pi / y.spacing();
  for (double x : {-4.0, 0.0, 2.5})
    for (double xi : {-0.9 * nyq, -3.0, 0.0, 1.0, 0.5 * nyq})
      CHECK(std::abs(extract_symbol(I, v1(x), v1(xi)) - 1.0) < 0.02);
  auto Z = zero_operator(y, y);
  CHECK(extract_symbol(Z, v1(0), v1(1)) == cplx(0.0));
  CHECK_THROWS_AS(extract_symbol(I, v1(0), v1(1.01 * nyq)), PdoError);
  CHECK_THROWS_AS(extract_symbol(I, v1(0.01), v1(0)), PdoError);
  CHECK_THROWS_AS(extract_symbol(I, v1(0), v1(0), ExtractionWindow{4, 0.25}), PdoError);
}

TEST_CASE("multiplier symbol is independent of x") {
  // Kernel exp(-d^2/4)/(2 sqrt(pi)) needs the 32-spacing window to reach |d| ~ 8.
  const GridSpec y = aligned(256, 32.0);
  auto F = discretize_fio(gen("x*t"), sym("exp(-t^2/2)"), y, y, y.dual(), Route::Spectral);
  auto C = compose(F, adjoint(F));
  for (double xi : {0.0, 0.7, 1.5}) {
    const cplx ref = extract_symbol(C, v1(0), v1(xi));
    CHECK(std::abs(ref - std::exp(-xi * xi)) < 0.02);
    for (double x : {-2.0, -1.0, 1.0, 2.0}) CHECK(std::abs(extract_symbol(C, v1(x), v1(xi)) - ref) < 0.02);
  }
}

TEST_CASE("Gaussian FF* symbol against the exact composition") {
  const GridSpec y = aligned(256, 8.0);
  auto F = discretize_fio(gen("x*t"), sym("exp(-x^2-t^2)"), y, y, y.dual(), Route::Spectral);
  auto C = compose(F, adjoint(F));
  double err32 = 0, err64 = 0;
  for (double x = -2; x <= 2; x += 0.5)
    for (double xi = -3; xi <= 3; xi += 0.5) {
      err32 = std::max(err32, std::abs(extract_symbol(C, v1(x), v1(xi)) - gaussian_ffstar_symbol(x, xi)));
      err64 = std::max(err64, std::abs(extract_symbol(C, v1(x), v1(xi), ExtractionWindow{64, 0.25}) -
                                       gaussian_ffstar_symbol(x, xi)));
    }
  CHECK(err32 < 0.015);
  CHECK(err64 < 1e-4);
  // The leading-order prediction |a|^2 = 1 at the origin is off by the factor 1/3.
  CHECK(std::abs(extract_symbol(C, v1(0), v1(0), ExtractionWindow{64, 0.25}) - 1.0 / 3.0) < 1e-4);
}

TEST_CASE("S = 2xt plateau at one half") {
  for (int M : {128, 256}) {
    const double R = M / 32.0;
    const GridSpec y = aligned(M, R);
    const GridSpec x{1, R / 2, M, false};  // d_x S = 2t doubles the band
    auto S = gen("2*x*t");
    auto F = discretize_fio(S, sym("1"), x, y, y.dual(), Route::Spectral);
    auto C = compose(F, adjoint(F));
    std::vector<std::vector<double>> samples;
    for (double xs = -1.0; xs <= 1.0; xs += 0.5)
      for (double t = -6; t <= 6; t += 1.5) samples.push_back({xs, t});
    auto est = compare_symbols(S, sym("1"), C, samples, Composition::FFStar);
    for (const auto& s : est.samples) {
      REQUIRE(s.in_band);
      CHECK(std::abs(s.extracted - 0.5) < 0.05);
      REQUIRE(s.relative_error);
      CHECK(*s.relative_error < 1e-10);
    }
    CHECK(operator_norm(F).value == doctest::Approx(std::sqrt(0.5)).epsilon(1e-8));
  }
}

TEST_CASE("F*F through Fourier conjugation") {
  const GridSpec y = aligned(128, 8.0);
  auto S = gen("x*t");
  auto a = sym("exp(-x^2/8)");  // a(x): F*F = multiplication by |a|^2 in x
  auto F = discretize_fio(S, a, y, y, y.dual(), Route::Spectral);
  auto P = compose(adjoint(F), F);
  std::vector<std::vector<double>> samples;
  const GridSpec t = y.dual();
  for (double x : {-2.0, 0.0, 1.0, 3.0})
    for (int k : {56, 64, 70}) samples.push_back({x, t.node(k)});
  auto est = compare_symbols(S, a, P, samples, Composition::FStarF);
  for (const auto& s : est.samples) {
    CAPTURE(s.x[0]);
    REQUIRE(s.in_band);
    CHECK(std::abs(s.extracted.real() - s.predicted) < 0.02);
  }
  // Conjugating the identity gives the identity.
  auto Fi = discretize_fio(S, sym("1"), y, y, y.dual(), Route::Spectral);
  auto G = fourier_conjugate(compose(adjoint(Fi), Fi));
  CHECK((G.matrix - Eigen::MatrixXcd::Identity(128, 128)).norm() < 1e-9);
}

TEST_CASE("ratio test bookkeeping") {
  PdoSymbolEstimate c, f;
  auto add = [](PdoSymbolEstimate& e, double lambda, std::optional<double> err) {
    SymbolSample s;
    s.lambda = lambda;
    s.relative_error = err;
    e.samples.push_back(s);
  };
  add(c, 1.0, 0.5);  // below lambda_min: ignored
  add(f, 1.0, 0.5);
  add(c, 4.0, 0.04);
  add(f, 4.0, 0.01);
  add(c, 5.0, 1e-12);  // noise floor on both sides
  add(f, 5.0, 2e-12);
  auto r = residual_ratio_test(c, f);
  CHECK(r.pass);
  CHECK(r.counted == 2);
  CHECK(r.below_noise == 1);
  CHECK(r.worst_ratio == doctest::Approx(0.25));
  CHECK(r.within_tolerance);
  f.samples[1].relative_error = 0.03;
  CHECK_FALSE(residual_ratio_test(c, f).pass);
}

TEST_CASE("Calderon-Vaillancourt seminorms") {
  SampleGrid g{2, 4.0, 33};
  auto one = sym("1");
  CHECK(cv_seminorm(one, 2, g).Q == 1.0);
  auto gauss = sym("exp(-2*x^2 - 2*t^2)");
  CHECK(cv_seminorm(gauss, 0, g).Q == 1.0);
  // 1-D maximization oracle: sup |4 t exp(-2 t^2)| = 2 exp(-1/2) at t = 1/2.
  const double d1 = 2 * std::exp(-0.5);
  auto q1 = cv_seminorm(gauss, 1, g);
  CHECK(q1.Q == doctest::Approx(1 + 2 * d1).epsilon(1e-12));
  auto q2 = cv_seminorm(gauss, 2, g);
  CHECK(q2.Q >= q1.Q);
  // Closed form against a resampled (finite-difference) field.
  auto sampled = SymbolField::from_function(
      [](std::span<const double> p) { return cplx(std::exp(-2 * p[0] * p[0] - 2 * p[1] * p[1])); }, 2,
      constant_weight(1.0, 2), 0.0);
  CHECK(cv_seminorm(sampled, 2, g).Q == doctest::Approx(q2.Q).epsilon(1e-5));
  CHECK_THROWS_AS(cv_seminorm(sampled, 6, g), PdoError);
}

TEST_CASE("Calderon-Vaillancourt bound") {
  auto b = cv_bound_check(1.0, SeminormReport{2, 1.0, {}}, 1.0);
  CHECK(b.pass);
  CHECK(b.ratio == doctest::Approx(1.0));
  const GridSpec y = aligned(128, 8.0);
  SampleGrid g{2, 8.0, 65};
  for (double c : {1.0, 3.0}) {
    auto a = sym(std::to_string(c) + "*exp(-t^2)");
    auto F = discretize_fio(gen("x*t"), a, y, y, y.dual(), Route::Spectral);
    const double nrm = operator_norm(F).value;
    CHECK(nrm == doctest::Approx(c).epsilon(1e-8));
    auto Q = cv_seminorm(sym(std::to_string(c * c) + "*exp(-2*t^2)"), 2, g);
    auto r = cv_bound_check(nrm, Q, 1.0);
    CHECK(r.pass);
    static double first_ratio = r.ratio;
    CHECK(r.ratio == doctest::Approx(first_ratio).epsilon(1e-10));
  }
}

TEST_CASE("compactness probe") {
  std::vector<double> ones128(128, 1.0), ones256(256, 1.0);
  CHECK(compactness_probe(ones128, ones256).verdict == CompactnessVerdict::NoncompactConsistent);
  std::vector<double> z128(128, 0.0), z256(256, 0.0);
  CHECK(compactness_probe(z128, z256).verdict == CompactnessVerdict::CompactConsistent);
  std::vector<double> decay128(128), decay256(256);
  for (int j = 0; j < 256; ++j) {
    if (j < 128) decay128[static_cast<std::size_t>(j)] = std::exp(-0.1 * j);
    decay256[static_cast<std::size_t>(j)] = std::exp(-0.1 * j) * (1 + 1e-3);
  }
  CHECK(compactness_probe(decay128, decay256).verdict == CompactnessVerdict::CompactConsistent);
  std::vector<double> slow128(128), slow256(256);
  for (int j = 0; j < 256; ++j) {
    if (j < 128) slow128[static_cast<std::size_t>(j)] = 0.3 / std::sqrt(1.0 + j);
    slow256[static_cast<std::size_t>(j)] = 0.3 / std::sqrt(1.0 + j);
  }
  auto r = compactness_probe(slow128, slow256);
  CHECK(r.verdict == CompactnessVerdict::Inconclusive);
  CHECK(r.tail_coarse > 0.01);

  const GridSpec y = aligned(128, 8.0), y2 = aligned(256, 8.0);
  auto F1 = discretize_fio(gen("x*t"), sym("1"), y, y, y.dual(), Route::Spectral);
  auto F2 = discretize_fio(gen("x*t"), sym("1"), y2, y2, y2.dual(), Route::Spectral);
  CHECK(compactness_probe(singular_values(F1), singular_values(F2)).verdict ==
        CompactnessVerdict::NoncompactConsistent);
}

TEST_CASE("estimate serialization") {
  const GridSpec y = aligned(64, 4.0);
  auto F = discretize_fio(gen("x*t"), sym("1"), y, y, y.dual(), Route::Spectral);
  std::vector<std::vector<double>> samples{{0.0, 0.0}, {1.0, 100.0}};
  auto est = compare_symbols(gen("x*t"), sym("1"), compose(F, adjoint(F)), samples, Composition::FFStar,
                             ExtractionWindow{16, 0.25});
  CHECK_FALSE(est.samples[1].in_band);
  nlohmann::json j = est;
  CHECK(j["which"] == "FFSTAR");
  CHECK(j["samples"].size() == 2);
  CHECK(j["samples"][1]["relative_error"].is_null());
}

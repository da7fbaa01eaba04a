#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "doctest.h"
#include "fiolab/operators.hpp"

using namespace fiolab;

namespace {

const double kPi = std::numbers::pi;

GeneratingFunction gen(const std::string& text, int n = 1) {
  return GeneratingFunction(parse_expression(text, VariableTable::phase_space(n)), n, text);
}

SymbolField sym(const std::string& text, int n = 1) {
  return SymbolField::parse(text, VariableTable::phase_space(n), constant_weight(1.0, 2 * n), 0.0);
}

GridSpec aligned(int M, double R, int dim = 1) { return GridSpec{dim, R, M, true}; }

// Naive DFT pair on an aligned grid, independent of the operator code.
Eigen::VectorXcd naive_forward(const GridSpec& y, const Eigen::VectorXcd& u) {
  const GridSpec t = y.dual();
  Eigen::VectorXcd out(t.points);
  for (int k = 0; k < t.points; ++k) {
    cplx s = 0;
    for (int j = 0; j < y.points; ++j) s += std::exp(cplx(0, -t.node(k) * y.node(j))) * u[j];
    out[k] = s * y.spacing();
  }
  return out;
}

Eigen::VectorXcd naive_inverse(const GridSpec& y, const Eigen::VectorXcd& v) {
  const GridSpec t = y.dual();
  Eigen::VectorXcd out(y.points);
  for (int j = 0; j < y.points; ++j) {
    cplx s = 0;
    for (int k = 0; k < t.points; ++k) s += std::exp(cplx(0, t.node(k) * y.node(j))) * v[k];
    out[j] = s * t.spacing() / (2 * kPi);
  }
  return out;
}

cplx grid_inner(const GridSpec& g, const Eigen::VectorXcd& u, const Eigen::VectorXcd& v) {
  return g.cell_volume() * v.dot(u);  // sum u conj(v)
}

}  // namespace

TEST_CASE("kernel evaluation closed forms") {
  auto S = gen("x*t");
  auto a = sym("exp(-t^2)");
  GridSpec theta{1, 12.0, 480};
  const std::vector<double> x0{0.3}, x2{1.0}, y2{-1.0};
  CHECK(std::abs(kernel_eval(S, a, x0, x0, theta) - std::sqrt(kPi) / (2 * kPi)) < 1e-12);
  CHECK(std::abs(kernel_eval(S, a, x2, y2, theta) - std::sqrt(kPi) / (2 * kPi) * std::exp(-1.0)) < 1e-12);
  CHECK(std::abs(kernel_eval(S, sym("0"), x0, x2, theta)) == 0.0);
}

TEST_CASE("Fourier inversion through the spectral route") {
  const GridSpec y = aligned(256, 8.0);
  auto F = discretize_fio(gen("x*t"), sym("1"), y, y, y.dual(), Route::Spectral);
  CHECK(F.route == Route::Spectral);
  for (double c : {0.0, 1.0, -2.5}) {
    for (double s : {1.0, 0.25}) {
      auto g = sample(y, [&](std::span<const double> p) { return std::exp(-(p[0] - c) * (p[0] - c) / (2 * s * s)); });
      CHECK((fiolab::apply(F, g) - g).norm() / g.norm() < 1e-6);
    }
  }
}

TEST_CASE("zero symbol gives the zero matrix") {
  const GridSpec y = aligned(32, 4.0);
  for (Route r : {Route::Kernel, Route::Spectral}) {
    auto F = discretize_fio(gen("x*t"), sym("0"), y, y, y.dual(), r);
    CHECK(F.matrix.norm() == 0.0);
    auto u = sample(y, [](std::span<const double> p) { return std::exp(-p[0] * p[0]); });
    CHECK(fiolab::apply(F, u).norm() == 0.0);
    CHECK(operator_norm(F).value == 0.0);
  }
}

TEST_CASE("kernel and spectral routes agree") {
  const GridSpec y = aligned(256, 8.0);
  auto S = gen("x*t + t^2/2");
  auto a = sym("exp(-t^2/4)");
  auto K = discretize_fio(S, a, y, y, y.dual(), Route::Kernel);
  auto P = discretize_fio(S, a, y, y, y.dual(), Route::Spectral);
  CHECK((K.matrix - P.matrix).norm() / P.matrix.norm() < 1e-6);
  CHECK(K.config_hash != P.config_hash);
}

TEST_CASE("chirp against a DFT oracle") {
  const GridSpec y = aligned(128, 8.0);
  auto F = discretize_fio(gen("x*t + t^2/2"), sym("1"), y, y, y.dual(), Route::Spectral);
  auto g = sample(y, [](std::span<const double> p) { return std::exp(-p[0] * p[0] / 2); });
  Eigen::VectorXcd v = naive_forward(y, g);
  const GridSpec t = y.dual();
  for (int k = 0; k < t.points; ++k) v[k] *= std::exp(cplx(0, t.node(k) * t.node(k) / 2));
  const Eigen::VectorXcd expect = naive_inverse(y, v);
  CHECK((fiolab::apply(F, g) - expect).norm() / expect.norm() < 1e-6);
  CHECK(operator_norm(F).value == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("adjoint and composition") {
  const GridSpec y = aligned(64, 6.0);
  auto F = discretize_fio(gen("x*t + sin(x)*t/3"), sym("exp(-t^2/8)/(1+x^2)"), y, y, y.dual(), Route::Kernel);
  auto Fs = adjoint(F);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXcd u(64), v(64);
    for (int j = 0; j < 64; ++j) {
      u[j] = {nd(rng), nd(rng)};
      v[j] = {nd(rng), nd(rng)};
    }
    const cplx lhs = grid_inner(y, fiolab::apply(F, u), v), rhs = grid_inner(y, u, fiolab::apply(Fs, v));
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::abs(lhs));
  }
  CHECK((adjoint(Fs).matrix - F.matrix).norm() == 0.0);
  auto C = compose(F, Fs);
  Eigen::VectorXcd u = sample(y, [](std::span<const double> p) { return std::exp(-p[0] * p[0]); });
  CHECK((fiolab::apply(C, u) - fiolab::apply(F, fiolab::apply(Fs, u))).norm() <= 1e-12 * fiolab::apply(C, u).norm());

  const GridSpec other = aligned(32, 6.0);
  auto G = zero_operator(other, other);
  CHECK_THROWS_AS(compose(F, G), OperatorError);
  CHECK_THROWS_AS(fiolab::apply(F, Eigen::VectorXcd::Zero(32)), OperatorError);
}

TEST_CASE("FF* is the identity in the Fourier inversion case") {
  const GridSpec y = aligned(128, 8.0);
  auto F = discretize_fio(gen("x*t"), sym("1"), y, y, y.dual(), Route::Spectral);
  auto C = compose(F, adjoint(F));
  CHECK((C.matrix - Eigen::MatrixXcd::Identity(128, 128)).norm() < 1e-10);
}

TEST_CASE("FF* entries match the direct double integral") {
  const GridSpec y = aligned(128, 8.0);
  auto S = gen("x*t + t^2/2 + x^2/3");
  auto a = sym("exp(-t^2/4)/(1+x^2/10)");
  auto F = discretize_fio(S, a, y, y, y.dual(), Route::Spectral);
  auto C = compose(F, adjoint(F));
  const GridSpec fine{1, y.dual().radius, 3 * y.points};
  std::mt19937_64 rng(19);
  // The aligned discretization is periodic in x - x' with period 2R, so the
  // verification subgrid is the central half of the box.
  std::uniform_int_distribution<int> pick(32, 95);
  for (int trial = 0; trial < 10; ++trial) {
    const int i = pick(rng), j = pick(rng);
    const std::vector<double> x{y.node(i)}, xp{y.node(j)};
    const cplx direct = ffstar_kernel_direct(S, a, x, xp, fine);
    const cplx built = C.kernel(i, j);
    CHECK(std::abs(built - direct) <= 1e-5 * std::max(std::abs(direct), std::abs(C.kernel(i, i))));
  }
}

TEST_CASE("norm of a Fourier multiplier") {
  const GridSpec y = aligned(256, 8.0);
  auto F = discretize_fio(gen("x*t"), sym("exp(-t^2)"), y, y, y.dual(), Route::Spectral);
  auto nr = operator_norm(F, 1e-8);
  CHECK(std::abs(nr.value - 1.0) < 1e-3);
  // Oracle: the discrete operator is diagonalized by the DFT with eigenvalues a(t_k).
  double sup = 0;
  for (int k = 0; k < 256; ++k) sup = std::max(sup, std::exp(-std::pow(y.dual().node(k), 2)));
  CHECK(nr.value == doctest::Approx(sup).epsilon(1e-7));
  auto FFs = compose(F, adjoint(F));
  const double n2 = operator_norm(FFs, 1e-8).value;
  CHECK(std::abs(nr.value * nr.value - n2) <= 2e-8 * n2);
}

TEST_CASE("singular values") {
  const GridSpec y = aligned(64, 6.0);
  auto F = discretize_fio(gen("x*t + t^2/3"), sym("exp(-t^2/8)/(1+x^2)"), y, y, y.dual(), Route::Kernel);
  auto s = singular_values(F);
  REQUIRE(s.size() == 64);
  double sum2 = 0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    CHECK(s[k] >= 0.0);
    if (k) CHECK(s[k] <= s[k - 1]);
    sum2 += s[k] * s[k];
  }
  CHECK(std::abs(sum2 - F.matrix.squaredNorm()) <= 1e-8 * sum2);
  CHECK(s[0] == doctest::Approx(operator_norm(F, 1e-10).value).epsilon(1e-8));
  CHECK(singular_values(F, 5).size() == 5);
}

TEST_CASE("operator persistence round trip") {
  const GridSpec y = aligned(32, 4.0);
  auto F = discretize_fio(gen("x*t + t^2/2"), sym("exp(-t^2/4)"), y, y, y.dual(), Route::Kernel);
  const auto path = std::filesystem::temp_directory_path() / "fiolab_op_roundtrip.bin";
  save_operator(F, path);
  auto G = load_operator(path);
  CHECK((G.matrix - F.matrix).norm() == 0.0);
  CHECK(G.config_hash == F.config_hash);
  CHECK(G.route == Route::Kernel);
  CHECK(G.row_grid == F.row_grid);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_operator(path), OperatorError);
}

TEST_CASE("spectral route needs aligned grids") {
  const GridSpec y{1, 8.0, 64, false};
  CHECK_THROWS_AS(discretize_fio(gen("x*t"), sym("1"), y, y, y.dual(), Route::Spectral), OperatorError);
  const GridSpec ya = aligned(64, 8.0);
  CHECK_THROWS_AS(discretize_fio(gen("x*t"), sym("1"), ya, ya, GridSpec{1, 3.0, 64, true}, Route::Spectral),
                  OperatorError);
}

TEST_CASE("two-dimensional smoke test") {
  const GridSpec y = aligned(16, 4.0, 2);
  auto F = discretize_fio(gen("x1*t1 + x2*t2", 2), sym("1", 2), y, y, y.dual(), Route::Spectral);
  auto g = sample(y, [](std::span<const double> p) { return std::exp(-(p[0] * p[0] + p[1] * p[1]) / 2); });
  CHECK((fiolab::apply(F, g) - g).norm() / g.norm() < 1e-6);
  auto K = discretize_fio(gen("x1*t1 + x2*t2 + t1*t2/4", 2), sym("exp(-t1^2 - t2^2)", 2), y, y, y.dual(),
                          Route::Kernel);
  auto P = discretize_fio(gen("x1*t1 + x2*t2 + t1*t2/4", 2), sym("exp(-t1^2 - t2^2)", 2), y, y, y.dual(),
                          Route::Spectral);
  CHECK((K.matrix - P.matrix).norm() / P.matrix.norm() < 1e-6);
}

TEST_CASE("config hash is stable") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

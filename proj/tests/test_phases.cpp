#include <cmath>
#include <random>

#include "doctest.h"
#include "fiolab/phases.hpp"
#include "fiolab/weights.hpp"

using namespace fiolab;

namespace {

GeneratingFunction gen(const std::string& text, int n = 1) {
  return GeneratingFunction(parse_expression(text, VariableTable::phase_space(n)), n, text);
}

HypothesisGrid small_grid() {
  HypothesisGrid g;
  g.points = 17;
  return g;
}

}  // namespace

TEST_CASE("special phase assembles gradients") {
  auto S = gen("x*t + t^2/2");
  auto phi = special_phase(S);
  CHECK(phi.n() == 1);
  CHECK(phi.N() == 1);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int k = 0; k < 50; ++k) {
    const std::vector<double> p{u(rng), u(rng), u(rng)};
    auto g = phi.gradient(p);
    CHECK(g.y[0] == doctest::Approx(-p[2]));
    CHECK(g.theta[0] == doctest::Approx(p[0] + p[2] - p[1]));
    CHECK(phi(p) == doctest::Approx(p[0] * p[2] + p[2] * p[2] / 2 - p[1] * p[2]));
  }
  auto bilinear = special_phase(gen("x*t"));
  const std::vector<double> p{2.0, 0.5, -1.0};
  CHECK(bilinear.gradient(p).theta[0] == doctest::Approx(1.5));
}

TEST_CASE("exact gradients match finite differences at random points") {
  auto S = gen("sin(x)*t + x*t + exp(-t^2)*x^2/5");
  auto phi = special_phase(S);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3, 3);
  const double h = 1e-5;
  for (int k = 0; k < 100; ++k) {
    std::vector<double> p{u(rng), u(rng), u(rng)};
    auto g = phi.gradient(p);
    const double exact[3] = {g.x[0], g.y[0], g.theta[0]};
    auto H = phi.hessian(p);
    for (int i = 0; i < 3; ++i) {
      auto pp = p, pm = p;
      pp[static_cast<std::size_t>(i)] += h;
      pm[static_cast<std::size_t>(i)] -= h;
      CHECK(exact[i] == doctest::Approx((phi(pp) - phi(pm)) / (2 * h)).epsilon(1e-6));
      auto gp = phi.gradient(pp), gm = phi.gradient(pm);
      CHECK(H(0, i) == doctest::Approx((gp.x[0] - gm.x[0]) / (2 * h)).epsilon(1e-6));
    }
    const std::vector<double> x{p[0]}, t{p[2]};
    auto M = S.mixed_hessian(x, t);
    const double fd = (S.grad_x(x, std::vector<double>{t[0] + h})[0] - S.grad_x(x, std::vector<double>{t[0] - h})[0]) / (2 * h);
    CHECK(M(0, 0) == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("H2 on the bilinear phase") {
  auto phi = special_phase(gen("x*t"));
  HypothesisGrid g = small_grid();
  g.radii = {8.0};
  auto r = verify_H2(phi, g, 3);
  CHECK(r.pass);
  CHECK(r.constants.at("C(0,0,1)") <= std::sqrt(2.0) + 1e-12);
  // Independent oracle: sup of |x - y| / lambda over the same nodes.
  double sup = 0;
  for (int i = 0; i < g.points; ++i)
    for (int j = 0; j < g.points; ++j)
      for (int k = 0; k < g.points; ++k) {
        SampleGrid s{1, 8.0, g.points};
        std::vector<double> p{s.node(i), s.node(j), s.node(k)};
        sup = std::max(sup, std::abs(p[0] - p[1]) / lambda_value(p));
      }
  CHECK(r.constants.at("C(0,0,1)") == doctest::Approx(sup).epsilon(1e-14));
  for (const char* third : {"C(1,1,1)", "C(3,0,0)", "C(0,1,2)", "C(2,0,1)"}) CHECK(r.constants.at(third) == 0.0);
}

TEST_CASE("H2 fails for S = x^4 t") {
  auto phi = special_phase(gen("x^4*t"));
  auto r = verify_H2(phi, small_grid(), 2);
  CHECK_FALSE(r.pass);
  REQUIRE(r.witness);
  CHECK(r.growth.at("C(1,0,0)") > 2.0);
  CHECK(std::abs((*r.witness)[0]) == doctest::Approx(std::abs((*r.witness)[2])));
  // Oracle along the ray x = t, y = 0: 4 x^3 t / lambda grows like R^3.
  auto ray = [](double R) { return 4 * R * R * R * R / std::sqrt(1 + 2 * R * R); };
  CHECK(r.constants.at("C(1,0,0)") == doctest::Approx(ray(16.0)));
}

TEST_CASE("H3 on the bilinear phase") {
  auto phi = special_phase(gen("x*t"));
  HypothesisGrid g = small_grid();
  g.radii = {8.0};
  auto r = verify_H3(phi, g);
  CHECK(r.pass);
  CHECK(r.constants.at("K1") >= 0.29);
  CHECK(r.constants.at("K2") <= 1.8);
  CHECK(r.constants.at("K1") <= r.constants.at("K2"));
  // Quadratic-form oracle: the ratio squared lies in [min eig, max eig] of the
  // form (t^2 + (x-y)^2 + y^2) / (x^2 + y^2 + t^2) away from the origin.
  CHECK(r.constants.at("K1") >= std::sqrt((3 - std::sqrt(5.0)) / 2) - 1e-12);
  auto full = verify_H3(phi, small_grid());
  CHECK(full.pass);
}

TEST_CASE("H3 fails without x coupling") {
  auto phi = special_phase(gen("t^2/2"));
  auto r = verify_H3(phi, small_grid());
  CHECK_FALSE(r.pass);
  REQUIRE(r.witness);
  CHECK(std::abs((*r.witness)[0]) == 16.0);
  CHECK((*r.witness)[1] == 0.0);
  CHECK((*r.witness)[2] == 0.0);
  CHECK(r.constants.at("K1") == doctest::Approx(1.0 / std::sqrt(257.0)));
}

TEST_CASE("H3 on a single point is consistent") {
  auto phi = special_phase(gen("x*t + t^2/2"));
  HypothesisGrid g;
  g.radii = {1.0};
  g.points = 1;
  auto r = verify_H3(phi, g);
  CHECK(r.constants.at("K1") == r.constants.at("K2"));
  CHECK(r.constants.at("K1") == doctest::Approx(1.0));
}

TEST_CASE("H3 star on the bilinear phase") {
  auto r = verify_H3star(special_phase(gen("x*t")), small_grid());
  CHECK(r.pass);
  CHECK(r.constants.at("K1*") > 0.0);
}

TEST_CASE("G1 and H1 realness") {
  auto g = small_grid();
  CHECK(verify_G1(gen("x*t + sin(x)*t^2"), g).pass);
  CHECK(verify_H1(special_phase(gen("x*t")), g).pass);
  // sqrt leaves the reals for x < 0 and its derivative blows up at x = 0.
  auto r = verify_G1(gen("sqrt(x)*t"), g);
  CHECK_FALSE(r.pass);
  REQUIRE(r.witness);
  CHECK((*r.witness)[0] <= 0.0);
  CHECK_FALSE(verify_H1(special_phase(gen("log(x)*t")), g).pass);
}

TEST_CASE("G2 examples") {
  auto g = small_grid();
  auto r1 = verify_G2(gen("x*t"), g);
  CHECK(r1.pass);
  CHECK(r1.constants.at("delta0") == 1.0);
  CHECK(verify_G2(gen("x*t + x^2/2 + t^2/2"), g).constants.at("delta0") == 1.0);
  auto r3 = verify_G2(gen("x^2 + t^2"), g);
  CHECK_FALSE(r3.pass);
  CHECK(r3.constants.at("delta0") == 0.0);
  CHECK(r3.witness);
}

TEST_CASE("G3 examples") {
  auto g = small_grid();
  auto r = verify_G3(gen("x*t"), g, 3);
  CHECK(r.pass);
  CHECK(r.constants.at("C(2,1)") == 0.0);
  CHECK(r.constants.at("C(1,2)") == 0.0);

  QuadraticCoefficients c;
  c.xx = Eigen::MatrixXd::Zero(2, 2);
  c.xt = (Eigen::MatrixXd(2, 2) << 1, 0.5, 0, 1).finished();
  c.tt = (Eigen::MatrixXd(2, 2) << 0.5, 0, 0, 0).finished();
  auto q = verify_G3(quadratic_generating(c), g, 3);
  CHECK(q.pass);
  for (const auto& [k, v] : q.constants) CHECK(v <= 2 * 1.0);

  auto e = verify_G3(gen("exp(x)*t"), g, 2);
  CHECK_FALSE(e.pass);
  CHECK(e.growth.at("C(1,1)") > 2.0);
  REQUIRE(e.witness);
  CHECK((*e.witness)[0] == 16.0);
}

TEST_CASE("separation constant") {
  std::vector<SeparationSample> pairs;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-4, 4);
  for (int k = 0; k < 200; ++k) pairs.push_back({{u(rng)}, {u(rng)}, {u(rng)}});
  pairs.push_back({{1.0}, {1.0}, {0.0}});  // degenerate, skipped
  CHECK(verify_separation(gen("x*t"), pairs).constants.at("C") == doctest::Approx(1.0));
  CHECK(verify_separation(gen("x*t + t^2/2"), pairs).constants.at("C") == doctest::Approx(1.0));
  auto r = verify_separation(gen("2*x*t"), pairs);
  CHECK(r.pass);
  CHECK(r.constants.at("C") == doctest::Approx(0.5));
  CHECK_FALSE(verify_separation(gen("t^2"), pairs).pass);
}

TEST_CASE("Omega membership") {
  auto S = gen("x*t");
  auto in = [](const GeneratingFunction& s, double eps, double x, double y, double t) {
    return omega_domain_membership(s, eps, std::vector<double>{x}, std::vector<double>{y}, std::vector<double>{t});
  };
  CHECK(in(S, 1e-6, 1, 1, 0));
  CHECK_FALSE(in(S, 0.5, 0, 1, 0));
  CHECK(in(gen("x*t + t^2/2"), 0.01, 1, 1.05, 0.1));
  CHECK_THROWS(in(S, 0.0, 1, 1, 0));
}

TEST_CASE("quadratic generating functions") {
  QuadraticCoefficients c;
  c.xt = Eigen::MatrixXd::Ones(1, 1);
  auto S = quadratic_generating(c);
  CHECK(S(std::vector<double>{3}, std::vector<double>{2}) == 6.0);
  CHECK(verify_G2(S, small_grid()).constants.at("delta0") == 1.0);

  QuadraticCoefficients d;
  d.xx = Eigen::MatrixXd::Ones(1, 1);
  d.xt = Eigen::MatrixXd::Zero(1, 1);
  d.tt = Eigen::MatrixXd::Ones(1, 1);
  CHECK_FALSE(verify_G2(quadratic_generating(d), small_grid()).pass);

  QuadraticCoefficients e;
  e.xt = (Eigen::MatrixXd(2, 2) << 1, 1, 0, 1).finished();
  auto S2 = quadratic_generating(e);
  CHECK(verify_G2(S2, small_grid()).constants.at("delta0") == doctest::Approx(1.0));
  // The jet Hessian agrees with the coefficient table.
  GeneratingFunction plain(S2.expr(), 2);
  auto M = plain.mixed_hessian(std::vector<double>{0.3, -1.2}, std::vector<double>{2.0, 0.7});
  CHECK((M - e.xt).norm() == 0.0);
  // Polynomial identity S = x^T XT t at a sample point.
  const std::vector<double> x{0.5, -2}, th{1.5, 3};
  CHECK(S2(x, th) == doctest::Approx(0.5 * 1.5 + 0.5 * 3 + -2 * 3));
}

TEST_CASE("G2 and G3 imply H2 and H3 for the special phase") {
  for (const char* s : {"x*t", "x*t + t^2/2", "2*x*t + x^2/3", "x*t + sin(x)/2"}) {
    CAPTURE(s);
    auto S = gen(s);
    auto g = small_grid();
    if (verify_G2(S, g).pass && verify_G3(S, g, 3).pass) {
      auto phi = special_phase(S);
      CHECK(verify_H2(phi, g, 3).pass);
      CHECK(verify_H3(phi, g).pass);
    }
  }
}

TEST_CASE("lambda equivalence on Omega") {
  for (const char* s : {"x*t", "x*t + t^2/2", "2*x*t"}) {
    CAPTURE(s);
    auto r = lambda_equivalence(gen(s), kDefaultOmegaEps0, small_grid(), 2000);
    CHECK(r.pass);
    CHECK(r.constants.at("members") > 100);
    CHECK(r.constants.at("C") < 4.0);
  }
}

TEST_CASE("report serialization") {
  auto r = verify_G2(gen("x^2 + t^2"), small_grid());
  nlohmann::json j = r;
  CHECK(j["name"] == "G2");
  CHECK(j["pass"] == false);
  CHECK(j["witness"].is_array());
}

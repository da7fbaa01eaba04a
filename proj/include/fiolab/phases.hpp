#pragma once

// Phase functions phi(x, y, theta) and generating functions S(x, theta).
//
// Hypothesis verifiers return sampled estimates of the constants in the
// growth/nondegeneracy conditions, never proofs. Growth-type conditions
// ((H2), (H3), (G3)) are checked on a sequence of nested boxes [-R, R]^d:
// an estimate that keeps growing (or, for lower bounds, shrinking) with R at
// a power-law rate above `growth_tolerance` is reported as a failure even if
// it is still under the cap.

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fiolab/expr.hpp"
#include "fiolab/grid.hpp"
#include "fiolab/jet.hpp"

#include "json.hpp"

namespace fiolab {

/// Real quadratic form S = x^T XX x + x^T XT theta + theta^T TT theta.
struct QuadraticCoefficients {
  Eigen::MatrixXd xx, xt, tt;
};

class GeneratingFunction {
 public:
  /// `S` is an expression over VariableTable::phase_space(n).
  GeneratingFunction(Expr S, int n, std::string description = {});

  int n() const noexcept { return n_; }
  const Expr& expr() const noexcept { return expr_; }
  const std::string& description() const noexcept { return description_; }
  const std::optional<QuadraticCoefficients>& coeffs() const noexcept { return coeffs_; }

  double operator()(std::span<const double> x, std::span<const double> theta) const;
  Eigen::VectorXd grad_x(std::span<const double> x, std::span<const double> theta) const;
  Eigen::VectorXd grad_theta(std::span<const double> x, std::span<const double> theta) const;
  /// d^2 S / dx_i dtheta_j.
  Eigen::MatrixXd mixed_hessian(std::span<const double> x, std::span<const double> theta) const;
  /// Full second derivative matrix in (x, theta).
  Eigen::MatrixXd hessian(std::span<const double> x, std::span<const double> theta) const;

 private:
  friend GeneratingFunction quadratic_generating(const QuadraticCoefficients&);
  std::vector<cplx> jet2(std::span<const double> x, std::span<const double> theta) const;
  Expr expr_;
  std::shared_ptr<const Tape> tape_;
  int n_;
  std::string description_;
  std::optional<QuadraticCoefficients> coeffs_;
};

class PhaseField {
 public:
  /// `phi` is an expression over VariableTable::fio_space(n, N).
  PhaseField(Expr phi, int n, int N, std::string description = {});

  int n() const noexcept { return n_; }
  int N() const noexcept { return N_; }
  int dims() const noexcept { return 2 * n_ + N_; }
  const Expr& expr() const noexcept { return expr_; }
  const Tape& tape() const noexcept { return *tape_; }
  const std::string& description() const noexcept { return description_; }
  /// Set when built by special_phase().
  const std::shared_ptr<const GeneratingFunction>& generating() const noexcept { return generating_; }

  /// point = (x, y, theta) concatenated.
  double operator()(std::span<const double> point) const;
  struct Gradient {
    Eigen::VectorXd x, y, theta;
  };
  Gradient gradient(std::span<const double> point) const;
  Eigen::MatrixXd hessian(std::span<const double> point) const;
  /// Taylor coefficients in all dims() variables up to `order`.
  std::vector<cplx> jet(std::span<const double> point, int order) const;

 private:
  friend PhaseField special_phase(const GeneratingFunction&);
  Expr expr_;
  std::shared_ptr<const Tape> tape_;
  int n_, N_;
  std::string description_;
  std::shared_ptr<const GeneratingFunction> generating_;
};

/// phi(x, y, theta) = S(x, theta) - <y, theta>.
PhaseField special_phase(const GeneratingFunction& S);
GeneratingFunction quadratic_generating(const QuadraticCoefficients& C);

struct HypothesisReport {
  std::string name;
  bool pass = false;
  /// Named constant estimates (on the largest box).
  std::map<std::string, double> constants;
  /// Power-law growth exponent between the two largest boxes, per constant.
  std::map<std::string, double> growth;
  std::optional<std::vector<double>> witness;
  std::string detail;
};

void to_json(nlohmann::json& j, const HypothesisReport& r);

struct HypothesisGrid {
  std::vector<double> radii{4.0, 8.0, 16.0};
  int points = 25;  // per axis, odd so the origin is sampled
  double cap = 1e6;
  double floor = 1e-8;
  double growth_tolerance = 0.5;
};

/// Real and finite values, with derivatives to order 2, on every box.
HypothesisReport verify_H1(const PhaseField& phi, const HypothesisGrid& grid);
HypothesisReport verify_G1(const GeneratingFunction& S, const HypothesisGrid& grid);
HypothesisReport verify_H2(const PhaseField& phi, const HypothesisGrid& grid, int max_order);
HypothesisReport verify_H3(const PhaseField& phi, const HypothesisGrid& grid);
HypothesisReport verify_H3star(const PhaseField& phi, const HypothesisGrid& grid);
HypothesisReport verify_G2(const GeneratingFunction& S, const HypothesisGrid& grid);
HypothesisReport verify_G3(const GeneratingFunction& S, const HypothesisGrid& grid, int max_order);

struct SeparationSample {
  std::vector<double> x, x_prime, theta;
};
/// C = max |x - x'| / |d_theta S(x,theta) - d_theta S(x',theta)|; pairs with x = x' are skipped.
HypothesisReport verify_separation(const GeneratingFunction& S, std::span<const SeparationSample> pairs,
                                   double cap = 1e6);

/// |d_theta S(x,theta) - y|^2 < eps0 (|x|^2 + |y|^2 + |theta|^2).
bool omega_domain_membership(const GeneratingFunction& S, double eps0, std::span<const double> x,
                             std::span<const double> y, std::span<const double> theta);

/// Samples members of the region above and estimates C with
/// lambda(x,y,theta)/lambda(x,theta) in [1/C, C] and |y| <= C lambda(x,theta).
HypothesisReport lambda_equivalence(const GeneratingFunction& S, double eps0, const HypothesisGrid& grid,
                                    int samples_per_box = 4000);

constexpr double kDefaultOmegaEps0 = 0.01;

}  // namespace fiolab

#pragma once

// Truncated multivariate Taylor arithmetic ("jets").
//
// A jet of order K in d variables holds the Taylor coefficients
// c_alpha = (d^alpha f)(p) / alpha! for every |alpha| <= K, stored in graded
// order (index 0 is the value, then the d first-order coefficients, ...).
// Every smooth operation propagates exactly, so evaluating an expression on
// seeded jets yields all partial derivatives up to order K without any
// numerical differentiation.

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace fiolab {

using cplx = std::complex<double>;

class JetSpace {
 public:
  JetSpace(int dims, int order);

  int dims() const noexcept { return dims_; }
  int order() const noexcept { return order_; }
  std::size_t size() const noexcept { return degree_.size(); }

  std::span<const int> exponent(std::size_t k) const {
    return {exponents_.data() + k * static_cast<std::size_t>(dims_),
            static_cast<std::size_t>(dims_)};
  }
  int degree(std::size_t k) const { return degree_[k]; }
  /// alpha! for coefficient k (converts Taylor coefficients to derivatives).
  double factorial(std::size_t k) const { return factorial_[k]; }
  /// Index of a multi-index; throws std::out_of_range when |alpha| > order.
  std::size_t index(std::span<const int> alpha) const;
  /// Index of the first-order coefficient of variable v.
  std::size_t linear_index(int v) const { return 1 + static_cast<std::size_t>(v); }

  // Raw kernels. Arrays have size() entries; `out` must not alias inputs
  // unless stated otherwise.
  void mul(cplx* out, const cplx* a, const cplx* b) const;
  void derivative(cplx* out, const cplx* a, int var) const;
  /// out = sum_j taylor[j] * (u - u0)^j, i.e. f(u) given f^(j)(u0)/j!.
  /// `scratch` must hold 2*size() entries.
  void compose(cplx* out, const cplx* u, std::span<const cplx> taylor,
               cplx* scratch) const;

 private:
  struct Term {
    int a, b, out;
  };
  int dims_;
  int order_;
  std::vector<int> exponents_;
  std::vector<int> degree_;
  std::vector<double> factorial_;
  std::vector<Term> product_;
  // derivative tables: for var v, entry k of the result reads source
  // deriv_src_[v][k] with factor deriv_fac_[v][k] (src < 0 means zero)
  std::vector<std::vector<int>> deriv_src_;
  std::vector<std::vector<double>> deriv_fac_;
};

/// Shared, cached space for (dims, order).
std::shared_ptr<const JetSpace> jet_space(int dims, int order);

// Taylor coefficients f^(j)(u0)/j!, j = 0..order, of common functions.
std::vector<cplx> taylor_exp(cplx u0, int order);
std::vector<cplx> taylor_log(cplx u0, int order);
std::vector<cplx> taylor_pow(cplx u0, double p, int order);
std::vector<cplx> taylor_sin(cplx u0, int order);
std::vector<cplx> taylor_cos(cplx u0, int order);

/// Value-semantics jet for non-hot code and tests.
class Jet {
 public:
  Jet() = default;
  explicit Jet(std::shared_ptr<const JetSpace> space, cplx value = 0.0);
  static Jet variable(std::shared_ptr<const JetSpace> space, int var, double value);

  const JetSpace& space() const { return *space_; }
  const std::shared_ptr<const JetSpace>& space_ptr() const { return space_; }
  std::span<const cplx> coeffs() const { return c_; }
  std::span<cplx> coeffs() { return c_; }
  cplx value() const { return c_[0]; }
  /// Partial derivative d^alpha at the expansion point.
  cplx partial(std::span<const int> alpha) const;

  Jet& operator+=(const Jet& o);
  Jet& operator-=(const Jet& o);
  Jet& operator*=(const Jet& o);
  Jet& operator*=(cplx s);

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator*(const Jet& a, const Jet& b);
  friend Jet operator*(Jet a, cplx s) { return a *= s; }
  friend Jet operator*(cplx s, Jet a) { return a *= s; }
  friend Jet operator/(const Jet& a, const Jet& b);
  Jet operator-() const;

  friend Jet exp(const Jet& u);
  friend Jet log(const Jet& u);
  friend Jet pow(const Jet& u, double p);
  friend Jet sqrt(const Jet& u);
  friend Jet sin(const Jet& u);
  friend Jet cos(const Jet& u);
  friend Jet conj(const Jet& u);
  /// d/d(var); the result is exact up to order-1.
  friend Jet derivative(const Jet& u, int var);
  friend Jet compose(const Jet& u, std::span<const cplx> taylor);

 private:
  std::shared_ptr<const JetSpace> space_;
  std::vector<cplx> c_;
};

}  // namespace fiolab

#include "fiolab/jet.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <stdexcept>
#include <utility>

namespace fiolab {
namespace {

void enumerate(int dims, int degree, int pos, std::vector<int>& cur,
               std::vector<int>& out) {
  if (pos == dims - 1) {
    cur[pos] = degree;
    out.insert(out.end(), cur.begin(), cur.end());
    return;
  }
  for (int k = degree; k >= 0; --k) {
    cur[pos] = k;
    enumerate(dims, degree - k, pos + 1, cur, out);
  }
}

std::size_t encode(std::span<const int> alpha, int base) {
  std::size_t code = 0;
  for (int a : alpha) code = code * static_cast<std::size_t>(base) + static_cast<std::size_t>(a);
  return code;
}

}  // namespace

JetSpace::JetSpace(int dims, int order) : dims_(dims), order_(order) {
  if (dims < 1 || order < 0) throw std::invalid_argument("JetSpace: bad dims/order");
  std::vector<int> cur(static_cast<std::size_t>(dims));
  for (int deg = 0; deg <= order; ++deg) enumerate(dims, deg, 0, cur, exponents_);
  const std::size_t n = exponents_.size() / static_cast<std::size_t>(dims);
  degree_.resize(n);
  factorial_.resize(n);
  std::map<std::size_t, int> lookup;
  for (std::size_t k = 0; k < n; ++k) {
    auto e = exponent(k);
    int deg = 0;
    double fac = 1.0;
    for (int a : e) {
      deg += a;
      for (int j = 2; j <= a; ++j) fac *= j;
    }
    degree_[k] = deg;
    factorial_[k] = fac;
    lookup.emplace(encode(e, order + 1), static_cast<int>(k));
  }

  std::vector<int> sum(static_cast<std::size_t>(dims));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (degree_[i] + degree_[j] > order) continue;
      auto ei = exponent(i), ej = exponent(j);
      for (int v = 0; v < dims; ++v) sum[static_cast<std::size_t>(v)] = ei[v] + ej[v];
      product_.push_back({static_cast<int>(i), static_cast<int>(j),
                          lookup.at(encode(sum, order + 1))});
    }
  }
  std::sort(product_.begin(), product_.end(),
            [](const Term& l, const Term& r) { return l.out < r.out; });

  deriv_src_.assign(static_cast<std::size_t>(dims), std::vector<int>(n, -1));
  deriv_fac_.assign(static_cast<std::size_t>(dims), std::vector<double>(n, 0.0));
  for (int v = 0; v < dims; ++v) {
    for (std::size_t k = 0; k < n; ++k) {
      if (degree_[k] >= order) continue;
      auto e = exponent(k);
      std::copy(e.begin(), e.end(), sum.begin());
      sum[static_cast<std::size_t>(v)] += 1;
      deriv_src_[v][k] = lookup.at(encode(sum, order + 1));
      deriv_fac_[v][k] = static_cast<double>(sum[static_cast<std::size_t>(v)]);
    }
  }
}

std::size_t JetSpace::index(std::span<const int> alpha) const {
  if (static_cast<int>(alpha.size()) != dims_) throw std::out_of_range("JetSpace::index: arity");
  int deg = 0;
  for (int a : alpha) {
    if (a < 0) throw std::out_of_range("JetSpace::index: negative exponent");
    deg += a;
  }
  if (deg > order_) throw std::out_of_range("JetSpace::index: order exceeds jet order");
  for (std::size_t k = 0; k < size(); ++k) {
    if (degree_[k] != deg) continue;
    auto e = exponent(k);
    if (std::equal(e.begin(), e.end(), alpha.begin())) return k;
  }
  throw std::out_of_range("JetSpace::index: not found");
}

void JetSpace::mul(cplx* out, const cplx* a, const cplx* b) const {
  // Plain real arithmetic: std::complex's operator* carries inf/NaN recovery
  // that dominates this loop.
  std::fill(out, out + size(), cplx{});
  for (const Term& t : product_) {
    const double ar = a[t.a].real(), ai = a[t.a].imag();
    const double br = b[t.b].real(), bi = b[t.b].imag();
    out[t.out] += cplx(ar * br - ai * bi, ar * bi + ai * br);
  }
}

void JetSpace::derivative(cplx* out, const cplx* a, int var) const {
  const auto& src = deriv_src_[static_cast<std::size_t>(var)];
  const auto& fac = deriv_fac_[static_cast<std::size_t>(var)];
  for (std::size_t k = 0; k < size(); ++k)
    out[k] = src[k] < 0 ? cplx{} : fac[k] * a[src[k]];
}

void JetSpace::compose(cplx* out, const cplx* u, std::span<const cplx> taylor,
                       cplx* scratch) const {
  const std::size_t n = size();
  cplx* delta = scratch;
  cplx* tmp = scratch + n;
  std::copy(u, u + n, delta);
  delta[0] = 0.0;
  const int top = std::min<int>(order_, static_cast<int>(taylor.size()) - 1);
  // Horner in delta; delta has no constant term so truncation is exact.
  std::fill(out, out + n, cplx{});
  out[0] = taylor[static_cast<std::size_t>(top)];
  for (int j = top - 1; j >= 0; --j) {
    mul(tmp, out, delta);
    std::copy(tmp, tmp + n, out);
    out[0] += taylor[static_cast<std::size_t>(j)];
  }
}

std::shared_ptr<const JetSpace> jet_space(int dims, int order) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::shared_ptr<const JetSpace>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[{dims, order}];
  if (!slot) slot = std::make_shared<const JetSpace>(dims, order);
  return slot;
}

std::vector<cplx> taylor_exp(cplx u0, int order) {
  std::vector<cplx> t(static_cast<std::size_t>(order) + 1);
  t[0] = std::exp(u0);
  for (int j = 1; j <= order; ++j) t[static_cast<std::size_t>(j)] = t[static_cast<std::size_t>(j) - 1] / double(j);
  return t;
}

std::vector<cplx> taylor_log(cplx u0, int order) {
  std::vector<cplx> t(static_cast<std::size_t>(order) + 1);
  t[0] = std::log(u0);
  cplx p = 1.0;
  for (int j = 1; j <= order; ++j) {
    p /= u0;
    t[static_cast<std::size_t>(j)] = (j % 2 == 1 ? 1.0 : -1.0) * p / double(j);
  }
  return t;
}

std::vector<cplx> taylor_pow(cplx u0, double p, int order) {
  std::vector<cplx> t(static_cast<std::size_t>(order) + 1);
  t[0] = std::pow(u0, p);
  for (int j = 1; j <= order; ++j)
    t[static_cast<std::size_t>(j)] =
        t[static_cast<std::size_t>(j) - 1] * (p - j + 1) / (double(j) * u0);
  return t;
}

namespace {
std::vector<cplx> taylor_trig(cplx u0, int order, int shift) {
  const cplx s = std::sin(u0), c = std::cos(u0);
  const cplx cycle[4] = {s, c, -s, -c};
  std::vector<cplx> t(static_cast<std::size_t>(order) + 1);
  double fac = 1.0;
  for (int j = 0; j <= order; ++j) {
    if (j > 0) fac *= j;
    t[static_cast<std::size_t>(j)] = cycle[(j + shift) % 4] / fac;
  }
  return t;
}
}  // namespace

std::vector<cplx> taylor_sin(cplx u0, int order) { return taylor_trig(u0, order, 0); }
std::vector<cplx> taylor_cos(cplx u0, int order) { return taylor_trig(u0, order, 1); }

Jet::Jet(std::shared_ptr<const JetSpace> space, cplx value)
    : space_(std::move(space)), c_(space_->size()) {
  c_[0] = value;
}

Jet Jet::variable(std::shared_ptr<const JetSpace> space, int var, double value) {
  Jet j(std::move(space), value);
  if (j.space().order() >= 1) j.c_[j.space().linear_index(var)] = 1.0;
  return j;
}

cplx Jet::partial(std::span<const int> alpha) const {
  const std::size_t k = space_->index(alpha);
  return c_[k] * space_->factorial(k);
}

Jet& Jet::operator+=(const Jet& o) {
  for (std::size_t k = 0; k < c_.size(); ++k) c_[k] += o.c_[k];
  return *this;
}
Jet& Jet::operator-=(const Jet& o) {
  for (std::size_t k = 0; k < c_.size(); ++k) c_[k] -= o.c_[k];
  return *this;
}
Jet& Jet::operator*=(const Jet& o) {
  *this = *this * o;
  return *this;
}
Jet& Jet::operator*=(cplx s) {
  for (auto& c : c_) c *= s;
  return *this;
}

Jet operator*(const Jet& a, const Jet& b) {
  Jet r(a.space_);
  a.space_->mul(r.c_.data(), a.c_.data(), b.c_.data());
  return r;
}

Jet compose(const Jet& u, std::span<const cplx> taylor) {
  Jet r(u.space_);
  std::vector<cplx> scratch(2 * u.c_.size());
  u.space_->compose(r.c_.data(), u.c_.data(), taylor, scratch.data());
  return r;
}

Jet operator/(const Jet& a, const Jet& b) {
  return a * compose(b, taylor_pow(b.value(), -1.0, b.space().order()));
}

Jet Jet::operator-() const {
  Jet r = *this;
  for (auto& c : r.c_) c = -c;
  return r;
}

Jet exp(const Jet& u) { return compose(u, taylor_exp(u.value(), u.space().order())); }
Jet log(const Jet& u) { return compose(u, taylor_log(u.value(), u.space().order())); }
Jet pow(const Jet& u, double p) { return compose(u, taylor_pow(u.value(), p, u.space().order())); }
Jet sqrt(const Jet& u) { return pow(u, 0.5); }
Jet sin(const Jet& u) { return compose(u, taylor_sin(u.value(), u.space().order())); }
Jet cos(const Jet& u) { return compose(u, taylor_cos(u.value(), u.space().order())); }

Jet conj(const Jet& u) {
  Jet r = u;
  for (auto& c : r.c_) c = std::conj(c);
  return r;
}

Jet derivative(const Jet& u, int var) {
  Jet r(u.space_);
  u.space_->derivative(r.c_.data(), u.c_.data(), var);
  return r;
}

}  // namespace fiolab

#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace fiolab {

/// Uniform tensor grid on [-R, R)^dim with M points per axis:
/// node j is -R + j * (2R / M).
struct GridSpec {
  int dim = 1;
  double radius = 1.0;
  int points = 2;
  bool dft_aligned = false;

  double spacing() const { return 2.0 * radius / points; }
  double node(int j) const { return -radius + j * spacing(); }
  std::size_t total() const {
    std::size_t t = 1;
    for (int d = 0; d < dim; ++d) t *= static_cast<std::size_t>(points);
    return t;
  }
  /// Coordinates of flat index k (row-major, last axis fastest).
  void coords(std::size_t k, double* out) const {
    for (int d = dim - 1; d >= 0; --d) {
      out[d] = node(static_cast<int>(k % static_cast<std::size_t>(points)));
      k /= static_cast<std::size_t>(points);
    }
  }
  std::vector<double> coords(std::size_t k) const {
    std::vector<double> v(static_cast<std::size_t>(dim));
    coords(k, v.data());
    return v;
  }
  /// Per-point quadrature weight spacing^dim.
  double cell_volume() const { return std::pow(spacing(), dim); }
  /// The frequency grid conjugate to this one: spacing 2 pi / (M h), same M.
  GridSpec dual() const {
    return GridSpec{dim, std::numbers::pi / spacing(), points, true};
  }
  void validate() const {
    if (dim < 1 || points < 1 || !(radius > 0)) throw std::invalid_argument("GridSpec: invalid grid");
  }
  friend bool operator==(const GridSpec& a, const GridSpec& b) {
    return a.dim == b.dim && a.points == b.points && a.radius == b.radius;
  }
};

/// Symmetric sampling grid with both endpoints, for sup-norm checks:
/// `points` nodes per axis spanning [-R, R].
struct SampleGrid {
  int dim = 1;
  double radius = 1.0;
  int points = 2;

  double node(int j) const {
    return points == 1 ? 0.0 : -radius + 2.0 * radius * j / (points - 1);
  }
  std::size_t total() const {
    std::size_t t = 1;
    for (int d = 0; d < dim; ++d) t *= static_cast<std::size_t>(points);
    return t;
  }
  void coords(std::size_t k, double* out) const {
    for (int d = dim - 1; d >= 0; --d) {
      out[d] = node(static_cast<int>(k % static_cast<std::size_t>(points)));
      k /= static_cast<std::size_t>(points);
    }
  }
  std::vector<double> coords(std::size_t k) const {
    std::vector<double> v(static_cast<std::size_t>(dim));
    coords(k, v.data());
    return v;
  }
};

}  // namespace fiolab

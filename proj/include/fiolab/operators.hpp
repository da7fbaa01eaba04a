#pragma once

// Dense discretizations of
//   Fu(x) = int K(x,y) u(y) dy,   K(x,y) = int e^{i(S(x,t) - y.t)} a(x,t) dt / (2 pi)^n
// on uniform grids.
//
// The stored matrix is A = W_row^{1/2} K W_col^{1/2} where W are the
// quadrature weights, so the matrix adjoint A^H is the L^2(grid) adjoint and
// spectral probes (norms, singular values) are L^2 statements.

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "fiolab/grid.hpp"
#include "fiolab/phases.hpp"
#include "fiolab/symbols.hpp"

#include "json.hpp"

namespace fiolab {

enum class Route { Kernel, Spectral, Derived };

std::string to_string(Route r);

class OperatorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DiscreteOperator {
  Eigen::MatrixXcd matrix;
  GridSpec row_grid, col_grid;
  Eigen::VectorXd row_weights, col_weights;
  Route route = Route::Derived;
  std::string config_hash;
  nlohmann::json provenance;

  Eigen::Index rows() const { return matrix.rows(); }
  Eigen::Index cols() const { return matrix.cols(); }
  /// Kernel value K(x_i, y_j) with the weights unfolded.
  cplx kernel(Eigen::Index i, Eigen::Index j) const {
    return matrix(i, j) / std::sqrt(row_weights[i] * col_weights[j]);
  }
};

/// Options for the theta quadrature of the kernel route.
struct KernelQuadrature {
  /// Cosine roll-off over this fraction of the theta box at each end.
  double taper_fraction = 0.1;
};

/// Tapered trapezoid approximation of K(x, y) on `theta_grid`.
cplx kernel_eval(const GeneratingFunction& S, const SymbolField& a, std::span<const double> x,
                 std::span<const double> y, const GridSpec& theta_grid, const KernelQuadrature& q = {});

/// Builds F. KERNEL: K(x_i, y_j) by tapered theta quadrature. SPECTRAL:
/// discrete Fourier transform (y -> theta, requires dft_aligned grids with
/// theta_grid == y_grid.dual()) followed by the e^{iS} a multiplier-integrator.
DiscreteOperator discretize_fio(const GeneratingFunction& S, const SymbolField& a, const GridSpec& x_grid,
                                const GridSpec& y_grid, const GridSpec& theta_grid, Route route,
                                const KernelQuadrature& q = {});

/// Fu sampled on the row grid; u sampled on the column grid.
Eigen::VectorXcd apply(const DiscreteOperator& F, const Eigen::VectorXcd& u);
DiscreteOperator adjoint(const DiscreteOperator& F);
/// A B (the column grid of A must equal the row grid of B).
DiscreteOperator compose(const DiscreteOperator& A, const DiscreteOperator& B);
DiscreteOperator zero_operator(const GridSpec& rows, const GridSpec& cols);

/// Direct theta quadrature of the FF* kernel
/// int e^{i(S(x,t) - S(x',t))} a(x,t) conj(a(x',t)) dt / (2 pi)^n.
cplx ffstar_kernel_direct(const GeneratingFunction& S, const SymbolField& a, std::span<const double> x,
                          std::span<const double> x_prime, const GridSpec& theta_grid);

struct NormResult {
  double value = 0.0;
  int iterations = 0;
  double residual = 0.0;
};

/// sqrt of the top eigenvalue of A^H A by power iteration with Ritz
/// acceleration. Stops when the relative residual of the top pair is below
/// `tol`; throws OperatorError after `max_iterations` products with A^H A.
NormResult operator_norm(const DiscreteOperator& F, double tol = 1e-8, int max_iterations = 10000);
/// Leading singular values (all when count < 0), nonincreasing.
std::vector<double> singular_values(const DiscreteOperator& F, int count = -1);

/// Binary file: "FIOLABOP", u32 version, u32 header length, JSON header,
/// then rows*cols complex doubles row-major, little-endian.
void save_operator(const DiscreteOperator& F, const std::filesystem::path& path);
DiscreteOperator load_operator(const std::filesystem::path& path);

/// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(const std::string& text);

nlohmann::json grid_json(const GridSpec& g);
GridSpec grid_from_json(const nlohmann::json& j);

/// Samples of f on every grid node.
Eigen::VectorXcd sample(const GridSpec& g, const std::function<cplx(std::span<const double>)>& f);
/// Discrete L^2 norm with the grid cell volume.
double grid_l2(const GridSpec& g, const Eigen::VectorXcd& u);

}  // namespace fiolab

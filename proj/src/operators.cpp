#include "fiolab/operators.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include <unsupported/Eigen/FFT>
#include <unsupported/Eigen/KroneckerProduct>

#include "fiolab/parallel.hpp"

namespace fiolab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr std::size_t kRowTile = 16;
constexpr std::uint32_t kFormatVersion = 1;
constexpr char kMagic[8] = {'F', 'I', 'O', 'L', 'A', 'B', 'O', 'P'};

double taper(double t, double radius, double fraction) {
  if (fraction <= 0.0) return 1.0;
  const double width = fraction * radius;
  const double d = std::min(t + radius, radius - t);
  if (d >= width) return 1.0;
  if (d <= 0.0) return 0.0;
  return 0.5 * (1.0 - std::cos(std::numbers::pi * d / width));
}

double taper(std::span<const double> theta, const GridSpec& g, double fraction) {
  double w = 1.0;
  for (double t : theta) w *= taper(t, g.radius, fraction);
  return w;
}

Eigen::VectorXd uniform_weights(const GridSpec& g) {
  return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(g.total()), g.cell_volume());
}

// E(i,k) = (2 pi)^{-n} e^{i S(x_i, t_k)} a(x_i, t_k) tau(t_k) dt^n
Eigen::MatrixXcd multiplier_integrator(const GeneratingFunction& S, const SymbolField& a, const GridSpec& x_grid,
                                       const GridSpec& theta_grid, double taper_fraction) {
  const int n = S.n();
  const auto rows = static_cast<Eigen::Index>(x_grid.total());
  const auto cols = static_cast<Eigen::Index>(theta_grid.total());
  const double scale = theta_grid.cell_volume() / std::pow(kTwoPi, n);
  std::vector<double> tau(static_cast<std::size_t>(cols));
  for (Eigen::Index k = 0; k < cols; ++k)
    tau[static_cast<std::size_t>(k)] = taper(theta_grid.coords(static_cast<std::size_t>(k)), theta_grid, taper_fraction);
  Eigen::MatrixXcd E(rows, cols);
  parallel_tiles(static_cast<std::size_t>(rows), kRowTile, [&](std::size_t lo, std::size_t hi, std::size_t) {
    std::vector<double> xt(static_cast<std::size_t>(2 * n));
    std::span<const double> x(xt.data(), static_cast<std::size_t>(n));
    std::span<const double> t(xt.data() + n, static_cast<std::size_t>(n));
    for (std::size_t i = lo; i < hi; ++i) {
      x_grid.coords(i, xt.data());
      for (Eigen::Index k = 0; k < cols; ++k) {
        const double w = tau[static_cast<std::size_t>(k)];
        if (w == 0.0) {
          E(static_cast<Eigen::Index>(i), k) = 0.0;
          continue;
        }
        theta_grid.coords(static_cast<std::size_t>(k), xt.data() + n);
        const cplx amp = a(xt);
        E(static_cast<Eigen::Index>(i), k) = amp == 0.0 ? cplx(0.0) : scale * w * amp * std::polar(1.0, S(x, t));
      }
    }
  });
  return E;
}

// 1-D discrete Fourier transform on an aligned grid, built with the FFT:
// h e^{-i t_k y_j} = h e^{i R t_k} (-1)^j e^{-2 pi i k j / M}.
Eigen::MatrixXcd dft_matrix_1d(const GridSpec& y) {
  const int M = y.points;
  const double h = y.spacing();
  const GridSpec t = y.dual();
  Eigen::FFT<double> fft;
  Eigen::MatrixXcd D(M, M);
  std::vector<cplx> in(static_cast<std::size_t>(M)), out;
  for (int j = 0; j < M; ++j) {
    std::fill(in.begin(), in.end(), cplx(0.0));
    in[static_cast<std::size_t>(j)] = (j % 2 == 0) ? 1.0 : -1.0;
    fft.fwd(out, in);
    for (int k = 0; k < M; ++k) D(k, j) = h * std::polar(1.0, y.radius * t.node(k)) * out[static_cast<std::size_t>(k)];
  }
  return D;
}

void fold_weights(DiscreteOperator& F) {
  const Eigen::VectorXd r = F.row_weights.cwiseSqrt(), c = F.col_weights.cwiseSqrt();
  F.matrix = r.asDiagonal() * F.matrix * c.asDiagonal();
}

bool same_grid(const GridSpec& a, const GridSpec& b) {
  return a.dim == b.dim && a.points == b.points && std::abs(a.radius - b.radius) <= 1e-12 * std::abs(b.radius);
}

}  // namespace

std::string to_string(Route r) {
  switch (r) {
    case Route::Kernel: return "KERNEL";
    case Route::Spectral: return "SPECTRAL";
    case Route::Derived: return "DERIVED";
  }
  return "?";
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream s;
  s << std::hex;
  s.width(16);
  s.fill('0');
  s << h;
  return s.str();
}

nlohmann::json grid_json(const GridSpec& g) {
  return {{"dim", g.dim}, {"radius", g.radius}, {"points", g.points}, {"dft_aligned", g.dft_aligned}};
}

GridSpec grid_from_json(const nlohmann::json& j) {
  GridSpec g{j.at("dim").get<int>(), j.at("radius").get<double>(), j.at("points").get<int>(),
             j.value("dft_aligned", false)};
  g.validate();
  return g;
}

Eigen::VectorXcd sample(const GridSpec& g, const std::function<cplx(std::span<const double>)>& f) {
  Eigen::VectorXcd u(static_cast<Eigen::Index>(g.total()));
  std::vector<double> p(static_cast<std::size_t>(g.dim));
  for (std::size_t k = 0; k < g.total(); ++k) {
    g.coords(k, p.data());
    u[static_cast<Eigen::Index>(k)] = f(p);
  }
  return u;
}

double grid_l2(const GridSpec& g, const Eigen::VectorXcd& u) { return std::sqrt(g.cell_volume()) * u.norm(); }

cplx kernel_eval(const GeneratingFunction& S, const SymbolField& a, std::span<const double> x,
                 std::span<const double> y, const GridSpec& theta_grid, const KernelQuadrature& q) {
  const int n = S.n();
  if (theta_grid.dim != n || static_cast<int>(x.size()) != n || static_cast<int>(y.size()) != n)
    throw OperatorError("kernel_eval: dimension mismatch");
  std::vector<double> xt(x.begin(), x.end());
  xt.resize(static_cast<std::size_t>(2 * n));
  std::span<const double> t(xt.data() + n, static_cast<std::size_t>(n));
  std::vector<cplx> terms(theta_grid.total());
  for (std::size_t k = 0; k < theta_grid.total(); ++k) {
    theta_grid.coords(k, xt.data() + n);
    const double w = taper(t, theta_grid, q.taper_fraction);
    if (w == 0.0) continue;
    double yt = 0.0;
    for (int d = 0; d < n; ++d) yt += y[static_cast<std::size_t>(d)] * t[static_cast<std::size_t>(d)];
    terms[k] = w * a(xt) * std::polar(1.0, S(x, t) - yt);
  }
  return pairwise_sum(terms) * theta_grid.cell_volume() / std::pow(kTwoPi, n);
}

cplx ffstar_kernel_direct(const GeneratingFunction& S, const SymbolField& a, std::span<const double> x,
                          std::span<const double> x_prime, const GridSpec& theta_grid) {
  const int n = S.n();
  std::vector<double> p(x.begin(), x.end()), q(x_prime.begin(), x_prime.end());
  p.resize(static_cast<std::size_t>(2 * n));
  q.resize(static_cast<std::size_t>(2 * n));
  std::span<const double> t(p.data() + n, static_cast<std::size_t>(n));
  std::vector<cplx> terms(theta_grid.total());
  for (std::size_t k = 0; k < theta_grid.total(); ++k) {
    theta_grid.coords(k, p.data() + n);
    std::copy(p.begin() + n, p.end(), q.begin() + n);
    terms[k] = a(p) * std::conj(a(q)) * std::polar(1.0, S(x, t) - S(x_prime, t));
  }
  return pairwise_sum(terms) * theta_grid.cell_volume() / std::pow(kTwoPi, n);
}

DiscreteOperator discretize_fio(const GeneratingFunction& S, const SymbolField& a, const GridSpec& x_grid,
                                const GridSpec& y_grid, const GridSpec& theta_grid, Route route,
                                const KernelQuadrature& q) {
  const int n = S.n();
  x_grid.validate();
  y_grid.validate();
  theta_grid.validate();
  if (x_grid.dim != n || y_grid.dim != n || theta_grid.dim != n)
    throw OperatorError("discretize_fio: grid dimension does not match the generating function");
  if (a.dim() != 2 * n) throw OperatorError("discretize_fio: symbol must be a field of (x, theta)");

  DiscreteOperator F;
  F.row_grid = x_grid;
  F.col_grid = y_grid;
  F.row_weights = uniform_weights(x_grid);
  F.col_weights = uniform_weights(y_grid);
  F.route = route;
  F.provenance = {{"route", to_string(route)},
                  {"generating", S.expr().to_string(VariableTable::phase_space(n))},
                  {"symbol", a.description()},
                  {"x_grid", grid_json(x_grid)},
                  {"y_grid", grid_json(y_grid)},
                  {"theta_grid", grid_json(theta_grid)}};

  if (route == Route::Kernel) {
    F.provenance["taper_fraction"] = q.taper_fraction;
    const Eigen::MatrixXcd E = multiplier_integrator(S, a, x_grid, theta_grid, q.taper_fraction);
    const auto T = static_cast<Eigen::Index>(theta_grid.total()), Y = static_cast<Eigen::Index>(y_grid.total());
    Eigen::MatrixXcd P(T, Y);
    std::vector<double> t(static_cast<std::size_t>(n)), y(static_cast<std::size_t>(n));
    for (Eigen::Index k = 0; k < T; ++k) {
      theta_grid.coords(static_cast<std::size_t>(k), t.data());
      for (Eigen::Index j = 0; j < Y; ++j) {
        y_grid.coords(static_cast<std::size_t>(j), y.data());
        double s = 0.0;
        for (int d = 0; d < n; ++d) s += t[static_cast<std::size_t>(d)] * y[static_cast<std::size_t>(d)];
        P(k, j) = std::polar(1.0, -s);
      }
    }
    F.matrix = E * P;
  } else if (route == Route::Spectral) {
    if (!y_grid.dft_aligned || !theta_grid.dft_aligned || !same_grid(theta_grid, y_grid.dual()))
      throw OperatorError("discretize_fio: SPECTRAL route needs dft_aligned y and theta grids (theta = dual of y)");
    const Eigen::MatrixXcd E = multiplier_integrator(S, a, x_grid, theta_grid, 0.0);
    GridSpec axis = y_grid;
    axis.dim = 1;
    const Eigen::MatrixXcd D1 = dft_matrix_1d(axis);
    Eigen::MatrixXcd D = D1;
    for (int d = 1; d < n; ++d) {
      Eigen::MatrixXcd next = Eigen::kroneckerProduct(D, D1);
      D = std::move(next);
    }
    // E carries the theta measure, D the y measure h^n, which fold_weights adds back.
    F.matrix = E * D / y_grid.cell_volume();
  } else {
    throw OperatorError("discretize_fio: route must be KERNEL or SPECTRAL");
  }
  fold_weights(F);
  F.config_hash = fnv1a_hex(F.provenance.dump());
  F.provenance["config_hash"] = F.config_hash;
  return F;
}

Eigen::VectorXcd apply(const DiscreteOperator& F, const Eigen::VectorXcd& u) {
  if (u.size() != F.cols()) throw OperatorError("apply: vector does not live on the column grid");
  const Eigen::VectorXd r = F.row_weights.cwiseSqrt(), c = F.col_weights.cwiseSqrt();
  Eigen::VectorXcd v = F.matrix * (c.asDiagonal() * u);
  return r.cwiseInverse().asDiagonal() * v;
}

DiscreteOperator adjoint(const DiscreteOperator& F) {
  DiscreteOperator G;
  G.matrix = F.matrix.adjoint();
  G.row_grid = F.col_grid;
  G.col_grid = F.row_grid;
  G.row_weights = F.col_weights;
  G.col_weights = F.row_weights;
  G.route = F.route;
  G.provenance = {{"adjoint_of", F.provenance}};
  G.config_hash = fnv1a_hex(G.provenance.dump());
  return G;
}

DiscreteOperator compose(const DiscreteOperator& A, const DiscreteOperator& B) {
  if (!same_grid(A.col_grid, B.row_grid) || A.cols() != B.rows())
    throw OperatorError("compose: column grid of the left factor differs from the row grid of the right factor");
  DiscreteOperator C;
  C.matrix = A.matrix * B.matrix;
  C.row_grid = A.row_grid;
  C.col_grid = B.col_grid;
  C.row_weights = A.row_weights;
  C.col_weights = B.col_weights;
  C.route = Route::Derived;
  C.provenance = {{"compose", {A.provenance, B.provenance}}};
  C.config_hash = fnv1a_hex(C.provenance.dump());
  return C;
}

DiscreteOperator zero_operator(const GridSpec& rows, const GridSpec& cols) {
  DiscreteOperator Z;
  Z.matrix = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(rows.total()), static_cast<Eigen::Index>(cols.total()));
  Z.row_grid = rows;
  Z.col_grid = cols;
  Z.row_weights = uniform_weights(rows);
  Z.col_weights = uniform_weights(cols);
  Z.provenance = {{"zero", true}, {"rows", grid_json(rows)}, {"cols", grid_json(cols)}};
  Z.config_hash = fnv1a_hex(Z.provenance.dump());
  return Z;
}

NormResult operator_norm(const DiscreteOperator& F, double tol, int max_iterations) {
  const Eigen::Index N = F.cols();
  NormResult r;
  if (N == 0 || F.rows() == 0) return r;
  Eigen::VectorXcd v(N);
  for (Eigen::Index j = 0; j < N; ++j) v[j] = 1.0 + 0.25 * std::cos(0.7 * static_cast<double>(j));
  v.normalize();
  auto AhA = [&](const Eigen::VectorXcd& u) -> Eigen::VectorXcd { return F.matrix.adjoint() * (F.matrix * u); };
  // Power iteration accelerated by Rayleigh-Ritz on the Krylov block it
  // generates (restarted Lanczos): plain power steps stall when the top of
  // the spectrum is clustered, as it is for any continuous amplitude.
  const Eigen::Index m = std::min<Eigen::Index>(N, 40);
  Eigen::MatrixXcd V(N, m);
  while (true) {
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
    Eigen::Index k = 0;
    V.col(0) = v;
    for (; k < m; ++k) {
      Eigen::VectorXcd w = AhA(V.col(k));
      ++r.iterations;
      // Two passes of full reorthogonalization.
      for (int pass = 0; pass < 2; ++pass) {
        const Eigen::VectorXcd c = V.leftCols(k + 1).adjoint() * w;
        w -= V.leftCols(k + 1) * c;
        if (pass == 0) T(k, k) = c[k].real();
      }
      const double beta = w.norm();
      if (k + 1 == m || beta <= 1e-14 * std::max(T(k, k), 1e-300)) {
        ++k;
        break;
      }
      T(k, k + 1) = T(k + 1, k) = beta;
      V.col(k + 1) = w / beta;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T.topLeftCorner(k, k));
    const double mu = es.eigenvalues()[k - 1];
    if (!(mu > 0.0)) {
      r.value = 0.0;
      r.residual = 0.0;
      return r;
    }
    v = V.leftCols(k) * es.eigenvectors().col(k - 1).cast<cplx>();
    v.normalize();
    r.residual = (AhA(v) - mu * v).norm() / mu;
    r.value = std::sqrt(mu);
    if (r.residual <= tol) return r;
    if (r.iterations >= max_iterations) break;
  }
  std::ostringstream s;
  s << "operator_norm: power iteration did not converge in " << max_iterations << " iterations (residual "
    << r.residual << ")";
  throw OperatorError(s.str());
}

std::vector<double> singular_values(const DiscreteOperator& F, int count) {
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(F.matrix);
  const auto& s = svd.singularValues();
  const Eigen::Index m = count < 0 ? s.size() : std::min<Eigen::Index>(count, s.size());
  return {s.data(), s.data() + m};
}

namespace {

template <class T>
void write_le(std::ostream& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  out.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T read_le(std::istream& in) {
  unsigned char b[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(b), sizeof(T))) throw OperatorError("load_operator: truncated file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

}  // namespace

void save_operator(const DiscreteOperator& F, const std::filesystem::path& path) {
  nlohmann::json h = {{"rows", F.rows()},
                      {"cols", F.cols()},
                      {"row_grid", grid_json(F.row_grid)},
                      {"col_grid", grid_json(F.col_grid)},
                      {"route", to_string(F.route)},
                      {"config_hash", F.config_hash},
                      {"provenance", F.provenance}};
  const std::string header = h.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw OperatorError("save_operator: cannot open " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_le<std::uint32_t>(out, kFormatVersion);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(header.size()));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (Eigen::Index i = 0; i < F.rows(); ++i)
    for (Eigen::Index j = 0; j < F.cols(); ++j) {
      write_le<double>(out, F.matrix(i, j).real());
      write_le<double>(out, F.matrix(i, j).imag());
    }
  if (!out) throw OperatorError("save_operator: write failed for " + path.string());
}

DiscreteOperator load_operator(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw OperatorError("load_operator: cannot open " + path.string());
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw OperatorError("load_operator: not an operator file");
  if (read_le<std::uint32_t>(in) != kFormatVersion) throw OperatorError("load_operator: unsupported version");
  const auto len = read_le<std::uint32_t>(in);
  std::string header(len, '\0');
  if (!in.read(header.data(), len)) throw OperatorError("load_operator: truncated header");
  const auto h = nlohmann::json::parse(header);
  DiscreteOperator F;
  F.row_grid = grid_from_json(h.at("row_grid"));
  F.col_grid = grid_from_json(h.at("col_grid"));
  F.row_weights = uniform_weights(F.row_grid);
  F.col_weights = uniform_weights(F.col_grid);
  const std::string route = h.at("route");
  F.route = route == "KERNEL" ? Route::Kernel : route == "SPECTRAL" ? Route::Spectral : Route::Derived;
  F.config_hash = h.at("config_hash");
  F.provenance = h.at("provenance");
  const auto rows = h.at("rows").get<Eigen::Index>(), cols = h.at("cols").get<Eigen::Index>();
  if (rows != static_cast<Eigen::Index>(F.row_grid.total()) || cols != static_cast<Eigen::Index>(F.col_grid.total()))
    throw OperatorError("load_operator: header shape disagrees with its grids");
  F.matrix.resize(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double re = read_le<double>(in);
      const double im = read_le<double>(in);
      F.matrix(i, j) = {re, im};
    }
  return F;
}

}  // namespace fiolab

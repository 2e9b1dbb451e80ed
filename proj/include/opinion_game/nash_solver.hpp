#pragma once

// Open-loop Nash equilibrium of the opinion game.
//
// Stationarity of each agent's Hamiltonian gives u = -p, and the stacked
// state/costate pair z = [x; p] obeys
//
//   dz/dt = A z + Khat z(0),   A = [[0, -I], [-W, 0]],   Khat = [[0, 0], [K, 0]],
//
// with x(0) = x0 and the free-endpoint condition p(T) = 0. Writing
// Phi(t) = e^{At} and Psi(t) = int_0^t e^{A(t-s)} ds, the solution is
// z(t) = (Phi(t) + Psi(t) Khat) z(0), whose blocks are the zeta matrices below.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "opinion_game/dense_matrix.hpp"
#include "opinion_game/errors.hpp"
#include "opinion_game/linalg.hpp"
#include "opinion_game/network.hpp"

namespace opinion_game {

struct StateCostateSystem {
  Matrix A;     ///< 2n x 2n
  Matrix Khat;  ///< 2n x 2n

  std::size_t n() const { return A.rows() / 2; }
};

inline StateCostateSystem assemble_system(const GameMatrices& gm) {
  const std::size_t n = gm.n();
  if (gm.W.rows() != n || gm.W.cols() != n) throw InputError("assemble_system: W and K sizes differ");
  StateCostateSystem sys{Matrix(2 * n, 2 * n), Matrix(2 * n, 2 * n)};
  for (std::size_t i = 0; i < n; ++i) {
    sys.A(i, n + i) = -1.0;
    sys.Khat(n + i, i) = gm.K[i];
    for (std::size_t j = 0; j < n; ++j) sys.A(n + i, j) = -gm.W(i, j);
  }
  return sys;
}

/// Partitions of Phi(t) and Psi(t) and the derived zeta blocks at one time.
struct BlockTransition {
  double t = 0.0;
  Matrix phi11, phi12, phi21, phi22;
  Matrix psi12, psi22;
  Matrix zeta11, zeta12, zeta21, zeta22;
};

namespace detail {

inline Matrix right_diag(Matrix m, std::span<const double> d) {
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) *= d[c];
  return m;
}

inline void fill_zeta(BlockTransition& bt, std::span<const double> k) {
  bt.zeta11 = bt.phi11 + right_diag(bt.psi12, k);
  bt.zeta12 = bt.phi12;
  bt.zeta21 = bt.phi21 + right_diag(bt.psi22, k);
  bt.zeta22 = bt.phi22;
}

}  // namespace detail

inline BlockTransition transition_blocks(const StateCostateSystem& sys, const GameMatrices& gm, double t) {
  const std::size_t n = sys.n();
  if (gm.n() != n) throw InputError("transition_blocks: system and matrices disagree on n");
  const auto [phi, psi] = exp_with_integral(sys.A, t);
  BlockTransition bt;
  bt.t = t;
  bt.phi11 = phi.block(0, 0, n, n);
  bt.phi12 = phi.block(0, n, n, n);
  bt.phi21 = phi.block(n, 0, n, n);
  bt.phi22 = phi.block(n, n, n, n);
  bt.psi12 = psi.block(0, n, n, n);
  bt.psi22 = psi.block(n, n, n, n);
  detail::fill_zeta(bt, gm.K);
  return bt;
}

// Scalar kernels: cosh(sqrt(l) t), sinh(sqrt(l) t)/sqrt(l) and
// (cosh(sqrt(l) t) - 1)/l, continued to l <= 0 through their entire-function
// series (cos/sin for l < 0).
namespace detail {
constexpr double kKernelSeriesCutoff = 1e-6;
}

inline double kernel_cosh(double lambda, double t) {
  const double z = lambda * t * t;
  if (std::abs(z) < detail::kKernelSeriesCutoff) return 1.0 + z / 2.0 + z * z / 24.0 + z * z * z / 720.0;
  if (lambda > 0.0) return std::cosh(std::sqrt(lambda) * t);
  return std::cos(std::sqrt(-lambda) * t);
}

inline double kernel_sinhc(double lambda, double t) {
  const double z = lambda * t * t;
  if (std::abs(z) < detail::kKernelSeriesCutoff)
    return t * (1.0 + z / 6.0 + z * z / 120.0 + z * z * z / 5040.0);
  if (lambda > 0.0) {
    const double s = std::sqrt(lambda);
    return std::sinh(s * t) / s;
  }
  const double s = std::sqrt(-lambda);
  return std::sin(s * t) / s;
}

inline double kernel_coshm1(double lambda, double t) {
  const double z = lambda * t * t;
  if (std::abs(z) < detail::kKernelSeriesCutoff)
    return t * t * (0.5 + z / 24.0 + z * z / 720.0 + z * z * z / 40320.0);
  // Half-angle forms avoid cancellation in cosh - 1 and cos - 1.
  if (lambda > 0.0) {
    const double h = std::sinh(std::sqrt(lambda) * t / 2.0);
    return 2.0 * h * h / lambda;
  }
  const double h = std::sin(std::sqrt(-lambda) * t / 2.0);
  return -2.0 * h * h / lambda;
}

/// Real eigen-decomposition W = V diag(lambdas) V^-1.
struct SpectralData {
  Vector lambdas;
  Matrix V;
  Matrix Vinv;
};

/// Max-abs residual of W V - V diag(lambda), relative to max(1, |W|).
inline double spectral_residual(const SpectralData& sd, const Matrix& w) {
  const Matrix lhs = w * sd.V;
  const Matrix rhs = detail::right_diag(sd.V, sd.lambdas);
  return max_abs_diff(lhs, rhs) / std::max(1.0, max_abs(w));
}

inline void check_spectral(const SpectralData& sd, const Matrix& w) {
  if (sd.lambdas.size() != w.rows() || sd.V.rows() != w.rows() || sd.Vinv.rows() != w.rows())
    throw InputError("spectral data has the wrong dimension");
  if (spectral_residual(sd, w) > 1e-8) throw SolverError("spectral data does not diagonalize W");
}

/// Complete graph with common weight w and stubbornness k: eigenvalue k + n w
/// on the vectors e_i - e_n, and k on the all-ones vector.
inline SpectralData spectral_complete_uniform(std::size_t n, double w, double k) {
  if (n < 1) throw InputError("spectral_complete_uniform: n must be >= 1");
  SpectralData sd{Vector(n, k + static_cast<double>(n) * w), Matrix(n, n), Matrix(n, n)};
  sd.lambdas[n - 1] = k;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    sd.V(i, i) = 1.0;
    sd.V(n - 1, i) = -1.0;
  }
  for (std::size_t r = 0; r < n; ++r) sd.V(r, n - 1) = 1.0;
  // Rows of V^-1: (e_i - 1/n) for i < n-1 and 1/n for the consensus mode.
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i + 1 < n; ++i)
    for (std::size_t c = 0; c < n; ++c) sd.Vinv(i, c) = (i == c ? 1.0 : 0.0) - inv_n;
  for (std::size_t c = 0; c < n; ++c) sd.Vinv(n - 1, c) = inv_n;
  return sd;
}

/// Leader network (agent 0 influenced by nobody, agent i by agent 0 only):
/// W is lower triangular, lambda_i = q_i, and V is unit lower triangular with
/// first column nu_i = w_i1 / (q_i - q_1); V^-1 flips the sign of nu.
inline SpectralData spectral_leader(const GameMatrices& gm) {
  const std::size_t n = gm.n();
  SpectralData sd{gm.q, Matrix::identity(n), Matrix::identity(n)};
  for (std::size_t i = 1; i < n; ++i) {
    const double gap = gm.q[i] - gm.q[0];
    if (gap == 0.0)
      throw UnsupportedError("leader spectral form needs q_i != q_1 (agent " + std::to_string(i + 1) + ")");
    const double nu = gm.weights(i, 0) / gap;
    sd.V(i, 0) = nu;
    sd.Vinv(i, 0) = -nu;
  }
  check_spectral(sd, gm.W);
  return sd;
}

inline SpectralData spectral_symmetric(const Matrix& w) {
  auto eig = symmetric_eigen(w);
  SpectralData sd{std::move(eig.values), eig.vectors, eig.vectors.transpose()};
  check_spectral(sd, w);
  return sd;
}

/// Blocks through the scalar kernels instead of the matrix exponential.
inline BlockTransition spectral_blocks(const SpectralData& sd, const GameMatrices& gm, double t) {
  const std::size_t n = gm.n();
  if (sd.lambdas.size() != n) throw InputError("spectral_blocks: dimension mismatch");
  for (double l : sd.lambdas)
    if (!std::isfinite(l)) throw UnsupportedError("spectral_blocks: spectrum must be real and finite");
  Vector pi(n), pi_hat(n), pi_tilde(n);
  for (std::size_t i = 0; i < n; ++i) {
    pi[i] = kernel_cosh(sd.lambdas[i], t);
    pi_hat[i] = kernel_sinhc(sd.lambdas[i], t);
    pi_tilde[i] = kernel_coshm1(sd.lambdas[i], t);
  }
  BlockTransition bt;
  bt.t = t;
  bt.phi11 = detail::right_diag(sd.V, pi) * sd.Vinv;
  bt.phi12 = -(detail::right_diag(sd.V, pi_hat) * sd.Vinv);
  bt.phi21 = gm.W * bt.phi12;
  bt.phi22 = bt.phi11;
  bt.psi12 = -(detail::right_diag(sd.V, pi_tilde) * sd.Vinv);
  bt.psi22 = -bt.phi12;
  detail::fill_zeta(bt, gm.K);
  return bt;
}

/// p(0) = -zeta22(T)^-1 zeta21(T) x0, forcing p(T) = 0.
inline Vector initial_costate(const BlockTransition& bt_T, std::span<const double> x0,
                              const LinalgTolerances& tol = {}) {
  if (x0.size() != bt_T.zeta21.cols()) throw InputError("initial_costate: x0 has the wrong length");
  const Vector rhs = bt_T.zeta21 * x0;
  return scaled(solve_linear(bt_T.zeta22, rhs, tol), -1.0);
}

/// Sampled equilibrium. Row g of x, p and u holds the agents' values at grid[g].
struct EquilibriumTrajectory {
  Vector grid;
  Matrix x;
  Matrix p;
  Matrix u;

  std::size_t samples() const { return grid.size(); }
  std::size_t agents() const { return x.cols(); }
  double horizon() const { return grid.back(); }
  double step() const { return grid.back() / static_cast<double>(grid.size() - 1); }
};

/// Uniform grid of `samples` points on [0, T], last point exactly T.
inline Vector uniform_grid(double horizon, std::size_t samples) {
  if (samples < 2) throw InputError("time grid needs at least 2 samples");
  Vector grid(samples);
  const double h = horizon / static_cast<double>(samples - 1);
  for (std::size_t g = 0; g < samples; ++g) grid[g] = static_cast<double>(g) * h;
  grid.back() = horizon;
  return grid;
}

struct SolverOptions {
  LinalgTolerances linalg;
  /// Sup-norm bound on p(T) accepted by the solver, scaled by max(1, |x0|).
  double boundary_tolerance = 1e-8;
  /// Target bound on sqrt(|W|) times the length of one sweep segment.
  double segment_growth = 1.0;
};

namespace detail {

struct StepTable {
  std::vector<Matrix> phi;  // Phi(j h), j = 0..stride
  std::vector<Matrix> psi;
};

inline StepTable step_table(const Matrix& a, double h, std::size_t stride) {
  StepTable tab;
  tab.phi.reserve(stride + 1);
  tab.psi.reserve(stride + 1);
  for (std::size_t j = 0; j <= stride; ++j) {
    auto e = exp_with_integral(a, static_cast<double>(j) * h);
    tab.phi.push_back(std::move(e.phi));
    tab.psi.push_back(std::move(e.psi));
  }
  return tab;
}

inline Vector stack(std::span<const double> top, std::span<const double> bottom) {
  Vector z(top.begin(), top.end());
  z.insert(z.end(), bottom.begin(), bottom.end());
  return z;
}

}  // namespace detail

/// Equilibrium on a uniform grid.
///
/// The single-shot formula x(t) = [zeta11(t) - zeta12(t) zeta22(T)^-1
/// zeta21(T)] x0 subtracts quantities of size e^{sqrt(lambda) T}, so the
/// horizon is cut into segments short enough that each segment transition
/// stays well conditioned. The affine costate relation p = P_s x + c_s at
/// every segment node is swept backward from p(T) = 0; states are then
/// marched forward through the stable closed-loop map. Every sample is
/// produced by the stacked transition from its segment's starting node, so
/// p(T) comes out of a full segment propagation and is an independent check.
inline EquilibriumTrajectory solve_equilibrium(const InfluenceNetwork& net, std::size_t samples,
                                               const SolverOptions& opt = {}) {
  const GameMatrices gm = build_matrices(net);
  const StateCostateSystem sys = assemble_system(gm);
  const std::size_t n = net.n;
  const Vector grid = uniform_grid(net.horizon, samples);
  const double h = net.horizon / static_cast<double>(samples - 1);

  const double w_norm = norm_inf(gm.W);
  std::size_t stride = samples - 1;
  if (w_norm > 0.0) {
    const double seg_len = opt.segment_growth / std::sqrt(w_norm);
    stride = std::clamp<std::size_t>(static_cast<std::size_t>(std::floor(seg_len / h)), 1, samples - 1);
  }
  const std::size_t segments = (samples - 1 + stride - 1) / stride;
  const auto tab = detail::step_table(sys.A, h, stride);

  // Constant forcing Khat z(0) = [0; K x0].
  Vector forcing(2 * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) forcing[n + i] = gm.K[i] * net.x0[i];

  auto seg_len = [&](std::size_t s) { return std::min(stride, samples - 1 - s * stride); };

  // Backward sweep: p_s = P_s x_s + c_s.
  std::vector<Matrix> P(segments + 1, Matrix(n, n));
  std::vector<Vector> c(segments + 1, Vector(n, 0.0));
  for (std::size_t s = segments; s-- > 0;) {
    const std::size_t j = seg_len(s);
    const Matrix& F = tab.phi[j];
    const Vector g = tab.psi[j] * forcing;
    const Matrix f11 = F.block(0, 0, n, n), f12 = F.block(0, n, n, n);
    const Matrix f21 = F.block(n, 0, n, n), f22 = F.block(n, n, n, n);
    const Vector g1(g.begin(), g.begin() + static_cast<std::ptrdiff_t>(n));
    const Vector g2(g.begin() + static_cast<std::ptrdiff_t>(n), g.end());
    const Matrix& Pn = P[s + 1];
    const LuDecomposition lu = detail::checked_lu(f22 - Pn * f12, opt.linalg);
    P[s] = lu.solve(Pn * f11 - f21);
    c[s] = lu.solve((Pn * g1 + c[s + 1]) - g2);
  }

  // Forward march over segment nodes.
  std::vector<Vector> node(segments);
  Vector x = net.x0;
  for (std::size_t s = 0; s < segments; ++s) {
    const Vector p = P[s] * x + c[s];
    node[s] = detail::stack(x, p);
    if (s + 1 < segments) {
      const Vector z = tab.phi[seg_len(s)] * node[s] + tab.psi[seg_len(s)] * forcing;
      x.assign(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(n));
    }
  }

  EquilibriumTrajectory traj{grid, Matrix(samples, n), Matrix(samples, n), Matrix(samples, n)};
  for (std::size_t g = 0; g < samples; ++g) {
    const std::size_t s = std::min(g / stride, segments - 1);
    const std::size_t j = g - s * stride;
    const Vector z = j == 0 ? node[s] : tab.phi[j] * node[s] + tab.psi[j] * forcing;
    for (std::size_t i = 0; i < n; ++i) {
      traj.x(g, i) = z[i];
      traj.p(g, i) = z[n + i];
      traj.u(g, i) = -z[n + i];
    }
  }
  for (std::size_t i = 0; i < n; ++i) traj.x(0, i) = net.x0[i];

  if (!traj.x.all_finite() || !traj.p.all_finite()) throw SolverError("solve_equilibrium: non-finite trajectory");
  const double p_end = max_abs(traj.p.row(samples - 1));
  if (!(p_end <= opt.boundary_tolerance * std::max(1.0, max_abs(net.x0))))
    throw SolverError("solve_equilibrium: terminal costate residual " + std::to_string(p_end) +
                      " exceeds tolerance");
  return traj;
}

/// Samples the single-shot formula: p(0) from initial_costate, then
/// z(t) = (Phi(t) + Psi(t) Khat) z(0) from t = 0 at every grid point.
/// Accurate only while e^{sqrt(|W|) T} is modest; kept as a cross-check of
/// the swept solver.
inline EquilibriumTrajectory solve_equilibrium_single_shot(const InfluenceNetwork& net, std::size_t samples,
                                                           const LinalgTolerances& tol = {}) {
  const GameMatrices gm = build_matrices(net);
  const StateCostateSystem sys = assemble_system(gm);
  const std::size_t n = net.n;
  const Vector grid = uniform_grid(net.horizon, samples);
  const Vector p0 = initial_costate(transition_blocks(sys, gm, net.horizon), net.x0, tol);
  EquilibriumTrajectory traj{grid, Matrix(samples, n), Matrix(samples, n), Matrix(samples, n)};
  for (std::size_t g = 0; g < samples; ++g) {
    const BlockTransition bt = transition_blocks(sys, gm, grid[g]);
    const Vector x = bt.zeta11 * net.x0 + bt.zeta12 * p0;
    const Vector p = bt.zeta21 * net.x0 + bt.zeta22 * p0;
    for (std::size_t i = 0; i < n; ++i) {
      traj.x(g, i) = g == 0 ? net.x0[i] : x[i];
      traj.p(g, i) = p[i];
      traj.u(g, i) = -p[i];
    }
  }
  return traj;
}

}  // namespace opinion_game

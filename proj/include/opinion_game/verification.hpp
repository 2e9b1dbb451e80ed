#pragma once

// Independent certification of a candidate equilibrium: realized costs,
// numerical best responses with rivals frozen, Pontryagin residuals and
// random unilateral deviations.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "opinion_game/dense_matrix.hpp"
#include "opinion_game/errors.hpp"
#include "opinion_game/linalg.hpp"
#include "opinion_game/nash_solver.hpp"
#include "opinion_game/network.hpp"

namespace opinion_game {

/// Composite Simpson weights for `samples` equally spaced points. An even
/// sample count closes with Simpson's 3/8 rule on the last three intervals;
/// two samples fall back to the trapezoid.
inline Vector simpson_weights(std::size_t samples, double h) {
  if (samples < 2) throw InputError("quadrature needs at least 2 samples");
  Vector wts(samples, 0.0);
  if (samples == 2) {
    wts[0] = wts[1] = h / 2.0;
    return wts;
  }
  std::size_t simpson_end = samples - 1;  // last index covered by Simpson 1/3
  if (samples % 2 == 0) {
    simpson_end = samples - 4;
    const double c = 3.0 * h / 8.0;
    wts[simpson_end] += c;
    wts[simpson_end + 1] += 3.0 * c;
    wts[simpson_end + 2] += 3.0 * c;
    wts[simpson_end + 3] += c;
  }
  for (std::size_t g = 0; g + 2 <= simpson_end; g += 2) {
    wts[g] += h / 3.0;
    wts[g + 1] += 4.0 * h / 3.0;
    wts[g + 2] += h / 3.0;
  }
  return wts;
}

inline Vector trapezoid_weights(std::size_t samples, double h) {
  if (samples < 2) throw InputError("quadrature needs at least 2 samples");
  Vector wts(samples, h);
  wts.front() = wts.back() = h / 2.0;
  return wts;
}

struct CostBreakdown {
  std::size_t agent = 0;
  double influence_term = 0.0;
  double stubbornness_term = 0.0;
  double control_term = 0.0;
  double total = 0.0;
};

namespace detail {

inline void check_trajectory(const InfluenceNetwork& net, const EquilibriumTrajectory& traj, std::size_t i) {
  if (traj.samples() < 2) throw InputError("trajectory grid too coarse: need at least 2 samples");
  if (traj.x.cols() != net.n || traj.u.cols() != net.n || traj.x.rows() != traj.samples() ||
      traj.u.rows() != traj.samples())
    throw InputError("trajectory shape does not match the network");
  if (i >= net.n) throw InputError("agent index out of range");
}

/// Agent i's cost along (own_x, own_u) against rival states in `x`.
inline CostBreakdown path_cost(const InfluenceNetwork& net, const Matrix& weights, const Matrix& x,
                               std::span<const double> own_x, std::span<const double> own_u, std::size_t i,
                               std::span<const double> quad) {
  CostBreakdown c;
  c.agent = i;
  const double ki = net.stubbornness[i];
  const double xi0 = net.x0[i];
  for (std::size_t g = 0; g < quad.size(); ++g) {
    double infl = 0.0;
    for (std::size_t j = 0; j < net.n; ++j) {
      if (j == i) continue;
      const double wij = weights(i, j);
      if (wij == 0.0) continue;
      const double d = own_x[g] - x(g, j);
      infl += wij * d * d;
    }
    const double dev = own_x[g] - xi0;
    c.influence_term += quad[g] * 0.5 * infl;
    c.stubbornness_term += quad[g] * 0.5 * ki * dev * dev;
    c.control_term += quad[g] * 0.5 * own_u[g] * own_u[g];
  }
  c.total = c.influence_term + c.stubbornness_term + c.control_term;
  return c;
}

}  // namespace detail

/// Realized cost of agent i, term by term, by composite Simpson quadrature.
inline CostBreakdown evaluate_cost(const InfluenceNetwork& net, const EquilibriumTrajectory& traj, std::size_t i) {
  detail::check_trajectory(net, traj, i);
  const Vector quad = simpson_weights(traj.samples(), traj.step());
  const Vector own_x = traj.x.column(i);
  const Vector own_u = traj.u.column(i);
  return detail::path_cost(net, weight_matrix(net), traj.x, own_x, own_u, i, quad);
}

/// Same cost as a quadratic form: 1/2 int z' G z + u^2, with z stacking
/// x_i - x_j for j != i and x_i - x0_i, and G = diag(w_i., k_i).
inline double quadratic_cost(const InfluenceNetwork& net, const EquilibriumTrajectory& traj, std::size_t i) {
  detail::check_trajectory(net, traj, i);
  const Vector quad = simpson_weights(traj.samples(), traj.step());
  const Matrix w = weight_matrix(net);
  Vector gdiag;
  for (std::size_t j = 0; j < net.n; ++j)
    if (j != i) gdiag.push_back(w(i, j));
  gdiag.push_back(net.stubbornness[i]);

  double total = 0.0;
  Vector z(gdiag.size());
  for (std::size_t g = 0; g < traj.samples(); ++g) {
    std::size_t slot = 0;
    for (std::size_t j = 0; j < net.n; ++j)
      if (j != i) z[slot++] = traj.x(g, i) - traj.x(g, j);
    z[slot] = traj.x(g, i) - net.x0[i];
    double form = 0.0;
    for (std::size_t s = 0; s < z.size(); ++s) form += z[s] * gdiag[s] * z[s];
    total += quad[g] * 0.5 * (form + traj.u(g, i) * traj.u(g, i));
  }
  return total;
}

struct BestResponseOptions {
  enum class Method { conjugate_gradient, direct };
  Method method = Method::conjugate_gradient;
  /// Sup-norm bound on the transcription gradient at the returned control.
  double gradient_tolerance = 1e-10;
  /// Conjugate-gradient iteration cap, as a multiple of the sample count.
  std::size_t max_iterations_per_sample = 10;
  /// Extra corrections applied after the direct solve.
  int max_refinements = 3;
  LinalgTolerances linalg;
};

struct BestResponseResult {
  std::size_t agent = 0;
  Vector control;
  Vector trajectory;
  double cost = 0.0;              ///< transcription objective at the minimizer
  double equilibrium_cost = 0.0;  ///< evaluate_cost of the candidate
  double gap = 0.0;               ///< equilibrium_cost - cost
  double gradient_norm = 0.0;
  std::size_t iterations = 0;
};

/// Direct transcription of agent i's problem with every rival trajectory
/// frozen at its samples in `traj`.
///
/// Decision variables are the controls at the grid points; the state follows
/// by trapezoidal integration of dx/dt = u from x0_i, and the objective is
/// the trapezoidal quadrature of the running cost. With x = x0 + L u the
/// objective is 1/2 u' H u + b' u + const, H = q L' S L + S, so the
/// minimizer solves one SPD system. H is applied matrix-free in O(samples).
class BestResponseProblem {
 public:
  BestResponseProblem(const InfluenceNetwork& net, const EquilibriumTrajectory& traj, std::size_t i)
      : samples_(traj.samples()), h_(traj.step()), x0_(net.x0.at(i)) {
    detail::check_trajectory(net, traj, i);
    const Matrix w = weight_matrix(net);
    q_ = net.stubbornness[i];
    for (std::size_t j = 0; j < net.n; ++j)
      if (j != i) q_ += w(i, j);
    quad_ = trapezoid_weights(samples_, h_);
    pull_.assign(samples_, net.stubbornness[i] * x0_);
    rival_sq_.assign(samples_, net.stubbornness[i] * x0_ * x0_);
    for (std::size_t g = 0; g < samples_; ++g) {
      for (std::size_t j = 0; j < net.n; ++j) {
        if (j == i || w(i, j) == 0.0) continue;
        pull_[g] += w(i, j) * traj.x(g, j);
        rival_sq_[g] += w(i, j) * traj.x(g, j) * traj.x(g, j);
      }
    }
  }

  std::size_t size() const { return samples_; }

  Vector integrate(std::span<const double> u) const {
    Vector x(samples_);
    x[0] = x0_;
    for (std::size_t g = 1; g < samples_; ++g) x[g] = x[g - 1] + 0.5 * h_ * (u[g - 1] + u[g]);
    return x;
  }

  double objective(std::span<const double> u) const {
    const Vector x = integrate(u);
    double j = 0.0;
    for (std::size_t g = 0; g < samples_; ++g)
      j += quad_[g] * (0.5 * q_ * x[g] * x[g] - x[g] * pull_[g] + 0.5 * rival_sq_[g] + 0.5 * u[g] * u[g]);
    return j;
  }

  Vector gradient(std::span<const double> u) const {
    const Vector x = integrate(u);
    Vector v(samples_);
    for (std::size_t g = 0; g < samples_; ++g) v[g] = quad_[g] * (q_ * x[g] - pull_[g]);
    Vector grad = apply_lt(v);
    for (std::size_t g = 0; g < samples_; ++g) grad[g] += quad_[g] * u[g];
    return grad;
  }

  Matrix hessian() const {
    const std::size_t m = samples_;
    Vector suffix(m + 1, 0.0);
    for (std::size_t g = m; g-- > 0;) suffix[g] = suffix[g + 1] + quad_[g];
    auto c = [](std::size_t a) { return a == 0 ? 0.5 : 1.0; };
    Matrix hess(m, m);
    const double scale = q_ * h_ * h_;
    for (std::size_t b = 0; b < m; ++b) {
      for (std::size_t a = 0; a <= b; ++a) {
        double v = c(a) * c(b) * suffix[b + 1];
        if (b >= 1) v += quad_[b] * (a < b ? c(a) : 0.5) * 0.5;
        v *= scale;
        if (a == b) v += quad_[a];
        hess(a, b) = v;
        hess(b, a) = v;
      }
    }
    return hess;
  }

  /// H v without forming H.
  Vector apply_hessian(std::span<const double> v) const {
    Vector y(samples_, 0.0);
    for (std::size_t g = 1; g < samples_; ++g) y[g] = y[g - 1] + 0.5 * h_ * (v[g - 1] + v[g]);
    for (std::size_t g = 0; g < samples_; ++g) y[g] *= q_ * quad_[g];
    Vector out = apply_lt(y);
    for (std::size_t g = 0; g < samples_; ++g) out[g] += quad_[g] * v[g];
    return out;
  }

  /// Gradient at u = 0.
  Vector linear_term() const {
    Vector v(samples_);
    for (std::size_t g = 0; g < samples_; ++g) v[g] = quad_[g] * (q_ * x0_ - pull_[g]);
    return apply_lt(v);
  }

 private:
  // L' v, where row g of L integrates controls up to sample g.
  Vector apply_lt(std::span<const double> v) const {
    Vector out(samples_, 0.0);
    double tail = 0.0;  // sum of v[k] for k > a
    for (std::size_t a = samples_; a-- > 0;) {
      const double ca = a == 0 ? 0.5 : 1.0;
      out[a] = h_ * (ca * tail + (a >= 1 ? 0.5 * v[a] : 0.0));
      tail += v[a];
    }
    return out;
  }

  std::size_t samples_;
  double h_;
  double x0_;
  double q_ = 0.0;
  Vector quad_;
  Vector pull_;
  Vector rival_sq_;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Minimizes the transcription objective by conjugate gradients on H u = -b,
// restarting from the true gradient whenever the recursion stalls.
inline Vector best_response_cg(const BestResponseProblem& prob, const BestResponseOptions& opt,
                               std::size_t& iterations) {
  const std::size_t m = prob.size();
  const std::size_t cap = opt.max_iterations_per_sample * m;
  Vector u(m, 0.0);
  Vector r = scaled(prob.linear_term(), -1.0);  // residual -b - H u = -gradient
  Vector d = r;
  double rr = dot(r, r);
  iterations = 0;
  while (iterations < cap) {
    if (max_abs(r) <= 0.25 * opt.gradient_tolerance) {
      const Vector grad = prob.gradient(u);
      if (max_abs(grad) <= opt.gradient_tolerance) break;
      r = scaled(grad, -1.0);
      d = r;
      rr = dot(r, r);
    }
    const Vector hd = prob.apply_hessian(d);
    const double curv = dot(d, hd);
    if (!(curv > 0.0)) break;
    const double alpha = rr / curv;
    for (std::size_t g = 0; g < m; ++g) {
      u[g] += alpha * d[g];
      r[g] -= alpha * hd[g];
    }
    const double rr_next = dot(r, r);
    const double beta = rr_next / rr;
    rr = rr_next;
    for (std::size_t g = 0; g < m; ++g) d[g] = r[g] + beta * d[g];
    ++iterations;
  }
  return u;
}

inline Vector best_response_direct(const BestResponseProblem& prob, const BestResponseOptions& opt,
                                   std::size_t& iterations) {
  const LuDecomposition lu = checked_lu(prob.hessian(), opt.linalg);
  Vector u = scaled(lu.solve(prob.linear_term()), -1.0);
  Vector grad = prob.gradient(u);
  iterations = 0;
  while (max_abs(grad) > opt.gradient_tolerance && iterations < static_cast<std::size_t>(opt.max_refinements)) {
    u = u - lu.solve(grad);
    grad = prob.gradient(u);
    ++iterations;
  }
  return u;
}

}  // namespace detail

/// Best response of agent i to the frozen rival samples of `traj`, with the
/// gap measured against the candidate's own Simpson cost.
inline BestResponseResult best_response(const InfluenceNetwork& net, const EquilibriumTrajectory& traj, std::size_t i,
                                        const BestResponseOptions& opt = {}) {
  const BestResponseProblem prob(net, traj, i);
  std::size_t iterations = 0;
  Vector u = opt.method == BestResponseOptions::Method::direct ? detail::best_response_direct(prob, opt, iterations)
                                                               : detail::best_response_cg(prob, opt, iterations);
  const double gnorm = max_abs(prob.gradient(u));
  if (!(gnorm <= opt.gradient_tolerance))
    throw SolverError("best_response: agent " + std::to_string(i + 1) + " did not converge after " +
                      std::to_string(iterations) + " iterations, gradient norm " + std::to_string(gnorm));

  BestResponseResult r;
  r.agent = i;
  r.trajectory = prob.integrate(u);
  r.cost = prob.objective(u);
  r.control = std::move(u);
  r.equilibrium_cost = evaluate_cost(net, traj, i).total;
  r.gap = r.equilibrium_cost - r.cost;
  r.gradient_norm = gnorm;
  r.iterations = iterations;
  return r;
}

struct NashResidual {
  double residual = 0.0;  ///< max over agents of gap / max(1, equilibrium cost)
  std::size_t worst_agent = 0;
  std::vector<BestResponseResult> agents;
};

inline NashResidual nash_residual_report(const InfluenceNetwork& net, const EquilibriumTrajectory& traj,
                                         const BestResponseOptions& opt = {}) {
  NashResidual out;
  out.residual = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < net.n; ++i) {
    out.agents.push_back(best_response(net, traj, i, opt));
    const auto& br = out.agents.back();
    const double rel = br.gap / std::max(1.0, br.equilibrium_cost);
    if (rel > out.residual) {
      out.residual = rel;
      out.worst_agent = i;
    }
  }
  return out;
}

inline double nash_residual(const InfluenceNetwork& net, const EquilibriumTrajectory& traj,
                            const BestResponseOptions& opt = {}) {
  return nash_residual_report(net, traj, opt).residual;
}

struct StationarityResidual {
  std::size_t agent = 0;
  double control = 0.0;       ///< max |u + p|
  double costate_ode = 0.0;   ///< max |dp/dt + dH/dx| by central differences
  double state_ode = 0.0;     ///< max |dx/dt - u| by central differences
  double initial = 0.0;       ///< |x(0) - x0|
  double terminal = 0.0;      ///< |p(T)|
  double control_tol = 0.0;
  double ode_tol = 0.0;
  double initial_tol = 0.0;
  double terminal_tol = 0.0;

  bool passed() const {
    return control <= control_tol && costate_ode <= ode_tol && state_ode <= ode_tol && initial <= initial_tol &&
           terminal <= terminal_tol;
  }
};

struct StationarityOptions {
  double control_tol = 1e-12;
  double terminal_tol = 1e-8;
  double initial_tol = 0.0;
  /// Multiplier on the h^2 truncation bound of the central difference.
  double ode_safety = 4.0;
};

/// Necessary-condition residuals per agent: u = -p, dp_i/dt = -(W x)_i + k_i x0_i,
/// dx/dt = u, x(0) = x0 and p(T) = 0.
inline std::vector<StationarityResidual> stationarity_check(const InfluenceNetwork& net,
                                                            const EquilibriumTrajectory& traj,
                                                            const StationarityOptions& opt = {}) {
  const GameMatrices gm = build_matrices(net);
  detail::check_trajectory(net, traj, 0);
  const std::size_t m = traj.samples();
  const double h = traj.step();
  const double w_norm = norm_inf(gm.W);
  const double x_scale = std::max(1.0, max_abs(traj.x));
  // Central differences err by h^2/6 |f'''|; along the equilibrium
  // |p'''| <= |W| (|W| |x| + |K x0|) and |x'''| <= |W| |p|.
  const double kx0 = [&] {
    double v = 0.0;
    for (std::size_t i = 0; i < net.n; ++i) v = std::max(v, std::abs(gm.K[i] * net.x0[i]));
    return v;
  }();
  const double third = w_norm * (w_norm * x_scale + kx0) + w_norm * max_abs(traj.p);
  const double ode_tol = opt.ode_safety * h * h / 6.0 * third + 1e-12 * x_scale / std::max(h, 1e-300);

  std::vector<StationarityResidual> out(net.n);
  for (std::size_t i = 0; i < net.n; ++i) {
    auto& r = out[i];
    r.agent = i;
    r.control_tol = opt.control_tol;
    r.ode_tol = ode_tol;
    r.initial_tol = opt.initial_tol;
    r.terminal_tol = opt.terminal_tol;
    for (std::size_t g = 0; g < m; ++g) r.control = std::max(r.control, std::abs(traj.u(g, i) + traj.p(g, i)));
    for (std::size_t g = 1; g + 1 < m; ++g) {
      double wx = 0.0;
      for (std::size_t j = 0; j < net.n; ++j) wx += gm.W(i, j) * traj.x(g, j);
      const double dp = (traj.p(g + 1, i) - traj.p(g - 1, i)) / (2.0 * h);
      r.costate_ode = std::max(r.costate_ode, std::abs(dp + wx - gm.K[i] * net.x0[i]));
      const double dx = (traj.x(g + 1, i) - traj.x(g - 1, i)) / (2.0 * h);
      r.state_ode = std::max(r.state_ode, std::abs(dx - traj.u(g, i)));
    }
    r.initial = std::abs(traj.x(0, i) - net.x0[i]);
    r.terminal = std::abs(traj.p(m - 1, i));
  }
  return out;
}

/// Smooth control perturbation: a low-order trigonometric series on [0, T]
/// whose state response is integrated in closed form.
struct Perturbation {
  double amplitude = 0.0;
  Vector cos_coeffs;  ///< multiply cos(j pi t / T), j = 1..J
  Vector sin_coeffs;  ///< multiply sin(j pi t / T)

  double control(double t, double horizon) const {
    double v = 0.0;
    for (std::size_t j = 0; j < cos_coeffs.size(); ++j) {
      const double om = static_cast<double>(j + 1) * std::numbers::pi / horizon;
      v += cos_coeffs[j] * std::cos(om * t) + sin_coeffs[j] * std::sin(om * t);
    }
    return amplitude * v;
  }

  /// Integral of control() from 0 to t.
  double state(double t, double horizon) const {
    double v = 0.0;
    for (std::size_t j = 0; j < cos_coeffs.size(); ++j) {
      const double om = static_cast<double>(j + 1) * std::numbers::pi / horizon;
      v += cos_coeffs[j] * std::sin(om * t) / om + sin_coeffs[j] * (1.0 - std::cos(om * t)) / om;
    }
    return amplitude * v;
  }
};

/// Change in agent i's Simpson cost when its control is perturbed and rivals
/// stay frozen. Exactly zero for a zero perturbation.
inline double deviation_cost_change(const InfluenceNetwork& net, const EquilibriumTrajectory& traj, std::size_t i,
                                    const Perturbation& pert) {
  detail::check_trajectory(net, traj, i);
  const Vector quad = simpson_weights(traj.samples(), traj.step());
  const Matrix w = weight_matrix(net);
  const Vector base_x = traj.x.column(i);
  const Vector base_u = traj.u.column(i);
  Vector x = base_x, u = base_u;
  for (std::size_t g = 0; g < traj.samples(); ++g) {
    x[g] += pert.state(traj.grid[g], traj.horizon());
    u[g] += pert.control(traj.grid[g], traj.horizon());
  }
  const double base = detail::path_cost(net, w, traj.x, base_x, base_u, i, quad).total;
  const double moved = detail::path_cost(net, w, traj.x, x, u, i, quad).total;
  return moved - base;
}

struct DeviationOptions {
  std::size_t harmonics = 4;
  std::vector<double> amplitudes = {1e-3, 1e-2, 1e-1};  ///< relative to |u_i| + 1
  double tolerance = 1e-9;
};

struct DeviationResult {
  bool passed = true;
  double worst_gap = 0.0;  ///< smallest cost change observed
  std::size_t worst_index = 0;
  std::size_t count = 0;
};

/// `count` seeded random perturbations of agent i's control; passes iff none
/// lowers the cost by more than the tolerance.
inline DeviationResult deviation_test(const InfluenceNetwork& net, const EquilibriumTrajectory& traj, std::size_t i,
                                      std::size_t count, std::uint64_t seed, const DeviationOptions& opt = {}) {
  if (count < 1) throw InputError("deviation_test: count must be at least 1");
  if (opt.amplitudes.empty() || opt.harmonics < 1) throw InputError("deviation_test: empty perturbation family");
  detail::check_trajectory(net, traj, i);
  const double u_scale = max_abs(traj.u.column(i)) + 1.0;
  // Agent index folded into the stream so agents see different draws.
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + i);
  std::uniform_real_distribution<double> coeff(-1.0, 1.0);

  DeviationResult res;
  res.count = count;
  res.worst_gap = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < count; ++c) {
    Perturbation pert;
    pert.amplitude = opt.amplitudes[c % opt.amplitudes.size()] * u_scale / static_cast<double>(opt.harmonics);
    pert.cos_coeffs.resize(opt.harmonics);
    pert.sin_coeffs.resize(opt.harmonics);
    for (std::size_t j = 0; j < opt.harmonics; ++j) {
      pert.cos_coeffs[j] = coeff(rng);
      pert.sin_coeffs[j] = coeff(rng);
    }
    const double gap = deviation_cost_change(net, traj, i, pert);
    if (gap < res.worst_gap) {
      res.worst_gap = gap;
      res.worst_index = c;
    }
  }
  res.passed = res.worst_gap >= -opt.tolerance;
  return res;
}

/// x(t) = x0, p = u = 0: the "nobody moves" candidate.
inline EquilibriumTrajectory constant_candidate(const InfluenceNetwork& net, std::size_t samples) {
  EquilibriumTrajectory traj{uniform_grid(net.horizon, samples), Matrix(samples, net.n), Matrix(samples, net.n),
                             Matrix(samples, net.n)};
  for (std::size_t g = 0; g < samples; ++g)
    for (std::size_t i = 0; i < net.n; ++i) traj.x(g, i) = net.x0[i];
  return traj;
}

}  // namespace opinion_game

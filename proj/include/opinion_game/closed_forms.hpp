#pragma once

// Analytic equilibria for the complete uniform network and the single-leader
// network, with their long-run limits and distance metrics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>

#include "opinion_game/dense_matrix.hpp"
#include "opinion_game/errors.hpp"
#include "opinion_game/network.hpp"
#include "opinion_game/nash_solver.hpp"

namespace opinion_game {

/// cosh(a) / cosh(b) for a, b >= 0 without overflow.
inline double cosh_ratio(double a, double b) {
  if (b < 20.0) return std::cosh(a) / std::cosh(b);
  return std::exp(a - b) * (1.0 + std::exp(-2.0 * a)) / (1.0 + std::exp(-2.0 * b));
}

inline double mean(std::span<const double> v) {
  if (v.empty()) throw InputError("mean of an empty vector");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

namespace detail {
inline void check_time(double t, double horizon, const char* who) {
  if (!(t >= 0.0 && t <= horizon)) throw InputError(std::string(who) + ": t must lie in [0, T]");
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Complete network, common weight w and stubbornness k.

struct CompleteUniformParams {
  std::size_t n = 0;
  double w = 0.0;
  double k = 0.0;
  double horizon = 0.0;

  double lambda1() const { return k + static_cast<double>(n) * w; }

  static CompleteUniformParams make(std::size_t n, double w, double k, double horizon) {
    if (n < 1) throw InputError("complete network needs n >= 1");
    if (!(w >= 0.0) || !(k >= 0.0)) throw InputError("complete network needs w, k >= 0");
    if (w == 0.0 && k == 0.0) throw InputError("complete network with w = k = 0 is degenerate");
    if (!(horizon > 0.0)) throw InputError("horizon must be positive");
    return {n, w, k, horizon};
  }

  static CompleteUniformParams from(const InfluenceNetwork& net) {
    const Topology topo = classify_topology(net);
    const auto* cu = std::get_if<CompleteUniform>(&topo);
    if (cu == nullptr) throw UnsupportedError("network is not complete with uniform parameters");
    return make(net.n, cu->w, cu->k, net.horizon);
  }
};

/// Weight on the initial deviation from the mean:
/// k/l1 + (n w/l1) cosh(sqrt(l1)(T - t)) / cosh(sqrt(l1) T).
inline double gamma(const CompleteUniformParams& p, double t) {
  detail::check_time(t, p.horizon, "gamma");
  const double l1 = p.lambda1();
  const double nw = static_cast<double>(p.n) * p.w;
  const double s = std::sqrt(l1);
  return p.k / l1 + (nw / l1) * cosh_ratio(s * (p.horizon - t), s * p.horizon);
}

inline Vector complete_trajectory(const CompleteUniformParams& p, std::span<const double> x0, double t) {
  if (x0.size() != p.n) throw InputError("complete_trajectory: x0 has the wrong length");
  const double avg = mean(x0);
  const double g = gamma(p, t);
  Vector x(p.n);
  for (std::size_t i = 0; i < p.n; ++i) x[i] = avg + g * (x0[i] - avg);
  return x;
}

/// lim_{T->inf} lim_{t->T} x(t).
inline Vector complete_limit(const CompleteUniformParams& p, std::span<const double> x0) {
  if (x0.size() != p.n) throw InputError("complete_limit: x0 has the wrong length");
  const double avg = mean(x0);
  const double ratio = p.k / p.lambda1();
  Vector x(p.n);
  for (std::size_t i = 0; i < p.n; ++i) x[i] = avg + ratio * (x0[i] - avg);
  return x;
}

inline double complete_pairwise_distance(const CompleteUniformParams& p, double x0i, double x0j, double t) {
  return gamma(p, t) * std::abs(x0i - x0j);
}

/// Earliest t in [0, T] with max_i |x_i(t) - mean(x0)| <= eps; nullopt when
/// the horizon ends first.
inline std::optional<double> epsilon_consensus_time(const CompleteUniformParams& p, std::span<const double> x0,
                                                    double eps) {
  if (!(eps > 0.0)) throw InputError("epsilon_consensus_time: eps must be positive");
  if (x0.size() != p.n) throw InputError("epsilon_consensus_time: x0 has the wrong length");
  const double avg = mean(x0);
  double spread = 0.0;
  for (double v : x0) spread = std::max(spread, std::abs(v - avg));
  if (spread <= eps) return 0.0;
  auto dev = [&](double t) { return gamma(p, t) * spread; };
  if (dev(p.horizon) > eps) return std::nullopt;
  double lo = 0.0, hi = p.horizon;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, p.horizon); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (dev(mid) <= eps)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

// ---------------------------------------------------------------------------
// Single leader (agent index 0), followers pulled by the leader only.

struct LeaderParams {
  double leader_stubbornness = 0.0;
  Vector k;  ///< per agent, entry 0 is the leader's
  Vector w;  ///< w_i1 per agent, entry 0 unused (zero)
  double horizon = 0.0;

  std::size_t n() const { return k.size(); }
  double lambda(std::size_t i) const { return k[i] + w[i]; }

  static LeaderParams from(const InfluenceNetwork& net) {
    const Topology topo = classify_topology(net);
    if (!std::holds_alternative<SingleLeader>(topo))
      throw UnsupportedError("network is not a single-leader network");
    return from_weights(net, weight_matrix(net));
  }

  /// Reads k_i and w_i1 without checking the topology.
  static LeaderParams from_weights(const InfluenceNetwork& net, const Matrix& weights) {
    LeaderParams p;
    p.leader_stubbornness = net.stubbornness.at(0);
    p.k = net.stubbornness;
    p.w = Vector(net.n, 0.0);
    for (std::size_t i = 1; i < net.n; ++i) p.w[i] = weights(i, 0);
    p.horizon = net.horizon;
    return p;
  }
};

/// xi_i(t) = (w_i1/l_i) cosh(sqrt(l_i)(T - t)) / cosh(sqrt(l_i) T); zero for a
/// follower with no coupling at all.
inline double leader_xi(const LeaderParams& p, std::size_t i, double t) {
  detail::check_time(t, p.horizon, "leader_xi");
  const double l = p.lambda(i);
  if (l == 0.0) return 0.0;
  const double s = std::sqrt(l);
  return (p.w[i] / l) * cosh_ratio(s * (p.horizon - t), s * p.horizon);
}

namespace detail {
// Long-run weights (on x0_i, on x0_1) for follower i.
inline std::pair<double, double> follower_weights(const LeaderParams& p, std::size_t i) {
  const double l = p.lambda(i);
  if (l == 0.0) return {1.0, 0.0};
  return {p.k[i] / l, p.w[i] / l};
}

inline void check_leader_dims(const LeaderParams& p, std::span<const double> x0, const char* who) {
  if (p.n() < 1 || x0.size() != p.n() || p.w.size() != p.n())
    throw InputError(std::string(who) + ": dimension mismatch");
}
}  // namespace detail

inline Vector leader_trajectory(const LeaderParams& p, std::span<const double> x0, double t) {
  detail::check_leader_dims(p, x0, "leader_trajectory");
  Vector x(p.n());
  x[0] = x0[0];
  for (std::size_t i = 1; i < p.n(); ++i) {
    const auto [a, b] = detail::follower_weights(p, i);
    x[i] = a * x0[i] + b * x0[0] + leader_xi(p, i, t) * (x0[i] - x0[0]);
  }
  return x;
}

/// Same trajectory through the triangular factorization
/// x_i = rho_i x0_1 + sigma_i x0_i with rho_i = w_i1/q_i - xi_i and
/// sigma_i = k_i/q_i + xi_i.
struct LeaderCoefficients {
  double rho = 0.0;
  double sigma = 1.0;
};

inline LeaderCoefficients leader_coefficients(const LeaderParams& p, std::size_t i, double t) {
  if (i == 0 || i >= p.n()) throw InputError("leader_coefficients: follower index out of range");
  const auto [a, b] = detail::follower_weights(p, i);
  const double xi = leader_xi(p, i, t);
  return {b - xi, a + xi};
}

inline Vector leader_trajectory_triangular(const LeaderParams& p, std::span<const double> x0, double t) {
  detail::check_leader_dims(p, x0, "leader_trajectory_triangular");
  Vector x(p.n());
  x[0] = x0[0];
  for (std::size_t i = 1; i < p.n(); ++i) {
    const auto c = leader_coefficients(p, i, t);
    x[i] = c.rho * x0[0] + c.sigma * x0[i];
  }
  return x;
}

inline Vector leader_limit(const LeaderParams& p, std::span<const double> x0) {
  detail::check_leader_dims(p, x0, "leader_limit");
  Vector x(p.n());
  x[0] = x0[0];
  for (std::size_t i = 1; i < p.n(); ++i) {
    const auto [a, b] = detail::follower_weights(p, i);
    x[i] = a * x0[i] + b * x0[0];
  }
  return x;
}

/// |x_i(t) - x_1(t)| = (k_i/l_i + xi_i(t)) |x0_i - x0_1|.
inline double leader_distance(const LeaderParams& p, std::size_t i, std::span<const double> x0, double t) {
  detail::check_leader_dims(p, x0, "leader_distance");
  if (i == 0 || i >= p.n()) throw InputError("leader_distance: follower index out of range");
  const auto [a, b] = detail::follower_weights(p, i);
  (void)b;
  return (a + leader_xi(p, i, t)) * std::abs(x0[i] - x0[0]);
}

/// Earliest t with follower i within eps of the leader; nullopt if never on [0, T].
inline std::optional<double> leader_epsilon_time(const LeaderParams& p, std::size_t i, std::span<const double> x0,
                                                 double eps) {
  if (!(eps > 0.0)) throw InputError("leader_epsilon_time: eps must be positive");
  if (leader_distance(p, i, x0, 0.0) <= eps) return 0.0;
  if (leader_distance(p, i, x0, p.horizon) > eps) return std::nullopt;
  double lo = 0.0, hi = p.horizon;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, p.horizon); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (leader_distance(p, i, x0, mid) <= eps)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

/// Closed-form trajectory sampled on `grid` when the network has one; rows are
/// time samples.
inline std::optional<Matrix> closed_form_samples(const InfluenceNetwork& net, std::span<const double> grid) {
  const Topology topo = classify_topology(net);
  Matrix out(grid.size(), net.n);
  if (const auto* cu = std::get_if<CompleteUniform>(&topo)) {
    const auto p = CompleteUniformParams::make(net.n, cu->w, cu->k, net.horizon);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const Vector x = complete_trajectory(p, net.x0, std::min(grid[g], net.horizon));
      std::copy(x.begin(), x.end(), out.row(g).begin());
    }
    return out;
  }
  if (std::holds_alternative<SingleLeader>(topo)) {
    const auto p = LeaderParams::from(net);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const Vector x = leader_trajectory(p, net.x0, std::min(grid[g], net.horizon));
      std::copy(x.begin(), x.end(), out.row(g).begin());
    }
    return out;
  }
  return std::nullopt;
}

}  // namespace opinion_game

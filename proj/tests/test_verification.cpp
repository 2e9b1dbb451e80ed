#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "opinion_game/opinion_game.hpp"
#include "random_networks.hpp"

namespace og = opinion_game;
using og::Matrix;
using og::Vector;

namespace {

double integrate(const Vector& w, const Vector& grid, double (*f)(double)) {
  double s = 0.0;
  for (std::size_t g = 0; g < grid.size(); ++g) s += w[g] * f(grid[g]);
  return s;
}

// Candidate with agent `i` pushed off the equilibrium by a consistent bump.
og::EquilibriumTrajectory bumped(const og::InfluenceNetwork& net, std::size_t i, double amp) {
  auto traj = og::solve_equilibrium(net, 501);
  const double T = net.horizon;
  for (std::size_t g = 0; g < traj.samples(); ++g) {
    const double t = traj.grid[g];
    traj.u(g, i) += amp * std::sin(std::numbers::pi * t / T);
    traj.x(g, i) += amp * (1.0 - std::cos(std::numbers::pi * t / T)) * T / std::numbers::pi;
    traj.p(g, i) = -traj.u(g, i);
  }
  return traj;
}

}  // namespace

TEST(Quadrature, SimpsonIsExactForCubics) {
  for (std::size_t m : {5u, 6u, 11u, 12u}) {
    const Vector grid = og::uniform_grid(2.0, m);
    const Vector w = og::simpson_weights(m, 2.0 / static_cast<double>(m - 1));
    EXPECT_NEAR(integrate(w, grid, [](double) { return 1.0; }), 2.0, 1e-14) << m;
    EXPECT_NEAR(integrate(w, grid, [](double t) { return t * t * t; }), 4.0, 1e-13) << m;
  }
  const Vector two = og::simpson_weights(2, 1.0);
  EXPECT_EQ(two, (Vector{0.5, 0.5}));
}

TEST(Quadrature, TrapezoidWeights) {
  EXPECT_EQ(og::trapezoid_weights(4, 2.0), (Vector{1.0, 2.0, 2.0, 1.0}));
}

TEST(Cost, TwoFormulasAgree) {
  for (const auto& id : og::figure_ids()) {
    const auto net = *og::preset(id);
    const auto traj = og::solve_equilibrium(net, 501);
    for (std::size_t i = 0; i < net.n; ++i) {
      const auto c = og::evaluate_cost(net, traj, i);
      EXPECT_NEAR(c.total, og::quadratic_cost(net, traj, i), 1e-9) << id << " " << i;
      EXPECT_NEAR(c.total, c.influence_term + c.stubbornness_term + c.control_term, 1e-15);
    }
  }
}

TEST(Cost, IsolatedLeaderPaysNothing) {
  const auto net = *og::preset("fig2b");
  const auto traj = og::solve_equilibrium(net, 501);
  const auto c = og::evaluate_cost(net, traj, 0);
  EXPECT_NEAR(c.total, 0.0, 1e-20);
  EXPECT_GT(og::evaluate_cost(net, traj, 4).total, 0.0);
}

TEST(Cost, ConstantPathHandComputed) {
  const og::InfluenceNetwork net{"pair", 2, {{0, 1, 2.0}}, {0.5, 0.0}, {0.2, 0.6}, 3.0};
  const auto traj = og::constant_candidate(net, 31);
  // Only the influence term survives: 1/2 * 2 * 0.4^2 * 3.
  EXPECT_NEAR(og::evaluate_cost(net, traj, 0).total, 0.48, 1e-14);
  EXPECT_EQ(og::evaluate_cost(net, traj, 1).total, 0.0);
  EXPECT_THROW(og::evaluate_cost(net, traj, 2), og::InputError);
}

TEST(BestResponseProblem, HessianMatchesExplicitOperator) {
  const auto net = og::testing::random_network(3, 4);
  const auto traj = og::solve_equilibrium(net, 9);
  const og::BestResponseProblem prob(net, traj, 1);
  const std::size_t m = prob.size();
  const double h = traj.step();
  Matrix L(m, m);
  for (std::size_t g = 1; g < m; ++g)
    for (std::size_t a = 0; a <= g; ++a) L(g, a) = (a == 0 || a == g) ? 0.5 * h : h;
  const auto gm = og::build_matrices(net);
  const Matrix S = Matrix::diagonal(og::trapezoid_weights(m, h));
  const Matrix H = L.transpose() * S * L * gm.q[1] + S;
  EXPECT_LT(og::max_abs_diff(prob.hessian(), H), 1e-14);
  for (std::size_t k = 0; k < m; ++k) {
    Vector e(m, 0.0);
    e[k] = 1.0;
    EXPECT_LT(og::max_abs_diff(prob.apply_hessian(e), H.column(k)), 1e-14);
  }
  // The objective is exactly quadratic with that Hessian.
  Vector u(m);
  for (std::size_t g = 0; g < m; ++g) u[g] = std::sin(1.0 + static_cast<double>(g));
  const Vector b = prob.linear_term();
  const Vector hu = H * u;
  double quad = prob.objective(Vector(m, 0.0));
  for (std::size_t g = 0; g < m; ++g) quad += b[g] * u[g] + 0.5 * u[g] * hu[g];
  EXPECT_NEAR(prob.objective(u), quad, 1e-13);
}

TEST(BestResponseProblem, GradientMatchesFiniteDifferences) {
  const auto net = *og::preset("fig3b");
  const auto traj = og::solve_equilibrium(net, 21);
  const og::BestResponseProblem prob(net, traj, 6);
  Vector u(prob.size());
  for (std::size_t g = 0; g < u.size(); ++g) u[g] = 0.1 * std::cos(static_cast<double>(g));
  const Vector grad = prob.gradient(u);
  for (std::size_t k = 0; k < u.size(); k += 4) {
    Vector up = u, dn = u;
    up[k] += 1e-5;
    dn[k] -= 1e-5;
    EXPECT_NEAR((prob.objective(up) - prob.objective(dn)) / 2e-5, grad[k], 1e-8);
  }
}

TEST(BestResponse, ConjugateGradientMatchesDirect) {
  const auto net = *og::preset("fig1b");
  const auto traj = og::solve_equilibrium(net, 201);
  og::BestResponseOptions direct;
  direct.method = og::BestResponseOptions::Method::direct;
  for (std::size_t i : {0u, 5u, 9u}) {
    const auto a = og::best_response(net, traj, i);
    const auto b = og::best_response(net, traj, i, direct);
    EXPECT_LT(og::max_abs_diff(a.control, b.control), 1e-9);
    EXPECT_NEAR(a.cost, b.cost, 1e-12);
  }
}

TEST(BestResponse, TracksEquilibriumPath) {
  const auto net = *og::preset("fig1b");
  const auto traj = og::solve_equilibrium(net, 501);
  const double h = traj.step();
  for (std::size_t i = 0; i < net.n; ++i) {
    const auto br = og::best_response(net, traj, i);
    EXPECT_LT(og::max_abs_diff(br.trajectory, traj.x.column(i)), 5.0 * h * h) << i;
    EXPECT_LE(br.gap, 1e-6) << i;
    EXPECT_LT(std::abs(br.gap), 5.0 * h * h) << i;
  }
}

TEST(BestResponse, NothingToGainAtConsensus) {
  auto net = og::testing::random_network(6, 5);
  net.x0.assign(5, 0.3);
  const auto traj = og::solve_equilibrium(net, 101);
  for (std::size_t i = 0; i < net.n; ++i) {
    const auto br = og::best_response(net, traj, i);
    EXPECT_LT(og::max_abs(br.control), 1e-12);
    EXPECT_NEAR(br.gap, 0.0, 1e-14);
  }
}

TEST(NashResidual, EquilibriumPassesConstantCandidateFails) {
  const auto net = *og::preset("fig1b");
  EXPECT_LE(og::nash_residual(net, og::solve_equilibrium(net, 501)), 1e-6);
  const double bad = og::nash_residual(net, og::constant_candidate(net, 501));
  EXPECT_GT(bad, 1e-2);
}

TEST(NashResidual, DiscretizationErrorShrinksQuadratically) {
  const auto net = *og::preset("fig1b");
  double prev = 0.0;
  for (std::size_t m : {101u, 201u, 401u}) {
    const double r = std::abs(og::nash_residual(net, og::solve_equilibrium(net, m)));
    if (prev > 0.0) {
      EXPECT_GE(prev / r, 3.0) << m;
      EXPECT_LE(prev / r, 5.0) << m;
    }
    prev = r;
  }
}

TEST(Stationarity, EquilibriumPasses) {
  for (const auto& id : og::figure_ids()) {
    const auto net = *og::preset(id);
    for (const auto& r : og::stationarity_check(net, og::solve_equilibrium(net, 501))) {
      EXPECT_TRUE(r.passed()) << id << " agent " << r.agent;
      EXPECT_LE(r.control, 1e-12);
      EXPECT_LE(r.terminal, 1e-8);
    }
  }
}

TEST(Stationarity, NegativeControls) {
  const auto net = *og::preset("fig1b");
  bool any = false;
  for (const auto& r : og::stationarity_check(net, og::constant_candidate(net, 501))) any = any || !r.passed();
  EXPECT_TRUE(any);
  const auto res = og::stationarity_check(net, bumped(net, 3, 0.05));
  EXPECT_FALSE(res[3].passed());
  EXPECT_GT(res[3].costate_ode, res[3].ode_tol);
}

TEST(Perturbation, StateIsIntegralOfControl) {
  og::Perturbation p{0.7, {0.3, -0.2}, {0.5, 0.1}};
  const double T = 4.0, t = 2.7;
  double integral = 0.0;
  const int steps = 20000;
  for (int s = 0; s < steps; ++s) integral += p.control((s + 0.5) * t / steps, T) * t / steps;
  EXPECT_NEAR(p.state(t, T), integral, 1e-8);
  EXPECT_EQ(p.state(0.0, T), 0.0);
}

TEST(Deviation, ZeroAmplitudeChangesNothing) {
  const auto net = *og::preset("fig3b");
  const auto traj = og::solve_equilibrium(net, 101);
  const og::Perturbation p{0.0, {1.0, 2.0}, {-1.0, 0.5}};
  EXPECT_EQ(og::deviation_cost_change(net, traj, 2, p), 0.0);
}

TEST(Deviation, EquilibriumSurvivesRandomDeviations) {
  for (const char* id : {"fig1b", "fig3b"}) {
    const auto net = *og::preset(id);
    const auto traj = og::solve_equilibrium(net, 501);
    for (std::size_t i = 0; i < net.n; ++i) {
      const auto r = og::deviation_test(net, traj, i, 100, 7);
      EXPECT_TRUE(r.passed) << id << " agent " << i << " worst " << r.worst_gap;
      EXPECT_EQ(r.count, 100u);
    }
  }
}

TEST(Deviation, PerturbedCandidateIsCaught) {
  const auto net = *og::preset("fig1b");
  const auto r = og::deviation_test(net, bumped(net, 3, 0.05), 3, 100, 1);
  EXPECT_FALSE(r.passed);
  EXPECT_LT(r.worst_gap, -1e-6);
}

TEST(Deviation, SeedIsReproducible) {
  const auto net = *og::preset("fig2b");
  const auto traj = og::solve_equilibrium(net, 201);
  const auto a = og::deviation_test(net, traj, 4, 20, 99);
  const auto b = og::deviation_test(net, traj, 4, 20, 99);
  EXPECT_EQ(a.worst_gap, b.worst_gap);
  EXPECT_EQ(a.worst_index, b.worst_index);
  EXPECT_THROW(og::deviation_test(net, traj, 4, 0, 99), og::InputError);
}

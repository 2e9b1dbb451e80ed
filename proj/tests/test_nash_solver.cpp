#include <gtest/gtest.h>

#include <cmath>

#include "opinion_game/opinion_game.hpp"
#include "random_networks.hpp"

namespace og = opinion_game;
using og::Matrix;

namespace {

double rel_diff(const Matrix& a, const Matrix& b) { return og::max_abs_diff(a, b) / std::max(1.0, og::max_abs(a)); }

og::BlockTransition blocks(const og::InfluenceNetwork& net, double t) {
  const auto gm = og::build_matrices(net);
  return og::transition_blocks(og::assemble_system(gm), gm, t);
}

}  // namespace

TEST(AssembleSystem, Layout) {
  const auto gm = og::build_matrices(*og::preset("fig2b"));
  const auto sys = og::assemble_system(gm);
  const std::size_t n = gm.n();
  ASSERT_EQ(sys.n(), n);
  EXPECT_EQ(sys.A.block(0, 0, n, n), Matrix(n, n));
  EXPECT_EQ(sys.A.block(0, n, n, n), -Matrix::identity(n));
  EXPECT_EQ(sys.A.block(n, 0, n, n), -gm.W);
  EXPECT_EQ(sys.Khat.block(n, 0, n, n), Matrix::diagonal(gm.K));
  EXPECT_EQ(sys.Khat.block(0, 0, n, 2 * n), Matrix(n, 2 * n));
}

TEST(TransitionBlocks, IdentityAtTimeZero) {
  const auto bt = blocks(*og::preset("fig3b"), 0.0);
  const std::size_t n = 10;
  EXPECT_EQ(bt.phi11, Matrix::identity(n));
  EXPECT_EQ(bt.phi22, Matrix::identity(n));
  EXPECT_EQ(bt.phi12, Matrix(n, n));
  EXPECT_EQ(bt.psi12, Matrix(n, n));
  EXPECT_EQ(bt.zeta11, Matrix::identity(n));
}

TEST(TransitionBlocks, ScalarAgent) {
  const double lambda = 1.7;
  const og::InfluenceNetwork net{"one", 1, {}, {lambda}, {0.4}, 2.0};
  for (double t : {0.3, 1.0, 2.0}) {
    const auto bt = blocks(net, t);
    const double s = std::sqrt(lambda);
    EXPECT_NEAR(bt.phi11(0, 0), std::cosh(s * t), 1e-13 * std::cosh(s * t));
    EXPECT_NEAR(bt.phi12(0, 0), -std::sinh(s * t) / s, 1e-13 * std::cosh(s * t));
    EXPECT_NEAR(bt.psi12(0, 0), -(std::cosh(s * t) - 1.0) / lambda, 1e-13 * std::cosh(s * t));
  }
}

TEST(TransitionBlocks, StructuralIdentities) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto net = og::testing::random_network(seed, 3 + seed);
    const auto gm = og::build_matrices(net);
    for (double t : {0.25, 1.0, 3.0}) {
      const auto bt = og::transition_blocks(og::assemble_system(gm), gm, t);
      EXPECT_LT(rel_diff(bt.phi22, bt.phi11), 1e-10);
      EXPECT_LT(rel_diff(bt.psi22, -bt.phi12), 1e-10);
      EXPECT_LT(rel_diff(bt.phi21, gm.W * bt.phi12), 1e-10);
    }
  }
}

TEST(Kernels, ReferenceValues) {
  EXPECT_NEAR(og::kernel_cosh(4.0, 1.0), std::cosh(2.0), 1e-15 * std::cosh(2.0));
  EXPECT_NEAR(og::kernel_sinhc(4.0, 1.0), std::sinh(2.0) / 2.0, 1e-15 * std::sinh(2.0));
  EXPECT_NEAR(og::kernel_coshm1(4.0, 1.0), (std::cosh(2.0) - 1.0) / 4.0, 1e-15 * std::cosh(2.0));
  EXPECT_NEAR(og::kernel_cosh(-4.0, 1.0), std::cos(2.0), 1e-15);
  EXPECT_NEAR(og::kernel_sinhc(-4.0, 1.0), std::sin(2.0) / 2.0, 1e-15);
  EXPECT_NEAR(og::kernel_coshm1(-4.0, 1.0), (std::cos(2.0) - 1.0) / -4.0, 1e-15);
}

TEST(Kernels, ZeroEigenvalueLimit) {
  for (double t : {0.0, 0.5, 3.0}) {
    EXPECT_EQ(og::kernel_cosh(0.0, t), 1.0);
    EXPECT_EQ(og::kernel_sinhc(0.0, t), t);
    EXPECT_EQ(og::kernel_coshm1(0.0, t), t * t / 2.0);
  }
}

TEST(Kernels, ContinuousAcrossSeriesCutoff) {
  const double t = 1.0;
  for (double l : {1e-9, -1e-9, 1e-6 * 0.999, 1e-6 * 1.001, -1e-6 * 1.001}) {
    EXPECT_NEAR(og::kernel_cosh(l, t), 1.0 + l / 2.0, 1e-12);
    EXPECT_NEAR(og::kernel_sinhc(l, t), 1.0 + l / 6.0, 1e-12);
    EXPECT_NEAR(og::kernel_coshm1(l, t), 0.5 + l / 24.0, 1e-12);
  }
}

TEST(SpectralBlocks, CompleteUniformMatchesExponential) {
  const auto net = *og::preset("fig1b");
  const auto gm = og::build_matrices(net);
  const auto sd = og::spectral_complete_uniform(10, 2.0, 0.2);
  EXPECT_LT(og::spectral_residual(sd, gm.W), 1e-14);
  EXPECT_LT(og::max_abs_diff(sd.V * sd.Vinv, Matrix::identity(10)), 1e-15);
  for (double t : {0.1, 0.5, 1.0}) {
    const auto a = og::spectral_blocks(sd, gm, t);
    const auto b = og::transition_blocks(og::assemble_system(gm), gm, t);
    EXPECT_LT(rel_diff(a.phi11, b.phi11), 1e-10);
    EXPECT_LT(rel_diff(a.phi12, b.phi12), 1e-10);
    EXPECT_LT(rel_diff(a.phi21, b.phi21), 1e-10);
    EXPECT_LT(rel_diff(a.psi12, b.psi12), 1e-10);
    EXPECT_LT(rel_diff(a.zeta21, b.zeta21), 1e-10);
  }
}

TEST(SpectralBlocks, LeaderAndSymmetricPaths) {
  const auto leader = og::testing::random_leader_network(3, 6);
  const auto gl = og::build_matrices(leader);
  const auto sl = og::spectral_leader(gl);
  const auto a = og::spectral_blocks(sl, gl, 0.8);
  const auto b = og::transition_blocks(og::assemble_system(gl), gl, 0.8);
  EXPECT_LT(rel_diff(a.zeta11, b.zeta11), 1e-10);
  EXPECT_LT(rel_diff(a.zeta21, b.zeta21), 1e-10);

  auto sym = og::complete_network("sym", 5, 1.0, 0.5, 2.0, {0.1, 0.2, 0.3, 0.4, 0.5});
  sym.edges[0].weight = 2.0;
  for (auto& e : sym.edges)
    if (e.from == 1 && e.to == 0) e.weight = 2.0;
  const auto gs = og::build_matrices(sym);
  const auto ss = og::spectral_symmetric(gs.W);
  const auto c = og::spectral_blocks(ss, gs, 1.2);
  const auto d = og::transition_blocks(og::assemble_system(gs), gs, 1.2);
  EXPECT_LT(rel_diff(c.zeta11, d.zeta11), 1e-10);
  EXPECT_LT(rel_diff(c.psi12, d.psi12), 1e-10);
}

TEST(SpectralBlocks, LeaderWithEqualDiagonalUnsupported) {
  auto net = *og::preset("fig2b");
  net.stubbornness[0] = 2.2;
  EXPECT_THROW(og::spectral_leader(og::build_matrices(net)), og::UnsupportedError);
}

TEST(InitialCostate, ForcesTerminalCondition) {
  auto net = *og::preset("fig1b");
  net.horizon = 1.0;
  const auto gm = og::build_matrices(net);
  const auto sys = og::assemble_system(gm);
  const auto bt = og::transition_blocks(sys, gm, net.horizon);
  const og::Vector p0 = og::initial_costate(bt, net.x0);
  const og::Vector pT = og::operator+(bt.zeta21 * net.x0, bt.zeta22 * p0);
  EXPECT_LT(og::max_abs(pT), 1e-10);
}

TEST(SolveEquilibrium, SingleShotAgreesOnShortHorizon) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto net = og::testing::random_network(seed, 6, 1.0);
    const auto a = og::solve_equilibrium(net, 51);
    const auto b = og::solve_equilibrium_single_shot(net, 51);
    EXPECT_LT(og::max_abs_diff(a.x, b.x), 1e-10) << seed;
    EXPECT_LT(og::max_abs_diff(a.p, b.p), 1e-10) << seed;
  }
}

TEST(SolveEquilibrium, BoundaryConditions) {
  for (const auto& id : og::figure_ids()) {
    const auto net = *og::preset(id);
    const auto traj = og::solve_equilibrium(net, 501);
    EXPECT_LE(og::max_abs(traj.p.row(traj.samples() - 1)), 1e-8) << id;
    for (std::size_t i = 0; i < net.n; ++i) EXPECT_EQ(traj.x(0, i), net.x0[i]) << id;
    EXPECT_EQ(traj.u, -traj.p) << id;
  }
}

TEST(SolveEquilibrium, LinearInInitialOpinions) {
  auto a = og::testing::random_network(8, 7);
  auto b = a;
  auto sum = a;
  for (std::size_t i = 0; i < a.n; ++i) {
    b.x0[i] = 0.3 * static_cast<double>(i % 3);
    sum.x0[i] = a.x0[i] + b.x0[i];
  }
  const auto ta = og::solve_equilibrium(a, 201);
  const auto tb = og::solve_equilibrium(b, 201);
  const auto ts = og::solve_equilibrium(sum, 201);
  EXPECT_LT(og::max_abs_diff(ts.x, ta.x + tb.x), 1e-12);
  EXPECT_LT(og::max_abs_diff(ts.p, ta.p + tb.p), 1e-12);
}

TEST(SolveEquilibrium, PermutationEquivariance) {
  const auto net = og::testing::random_network(4, 5);
  const std::vector<std::size_t> perm = {2, 4, 0, 1, 3};
  auto moved = net;
  for (auto& e : moved.edges) {
    e.from = perm[e.from];
    e.to = perm[e.to];
  }
  for (std::size_t i = 0; i < net.n; ++i) {
    moved.stubbornness[perm[i]] = net.stubbornness[i];
    moved.x0[perm[i]] = net.x0[i];
  }
  const auto a = og::solve_equilibrium(net, 101);
  const auto b = og::solve_equilibrium(moved, 101);
  for (std::size_t g = 0; g < 101; ++g)
    for (std::size_t i = 0; i < net.n; ++i) EXPECT_NEAR(a.x(g, i), b.x(g, perm[i]), 1e-12);
}

TEST(SolveEquilibrium, ConsensusIsFixed) {
  auto net = og::testing::random_network(2, 6);
  net.x0.assign(6, 0.42);
  const auto traj = og::solve_equilibrium(net, 101);
  for (double v : traj.x.data()) EXPECT_NEAR(v, 0.42, 1e-12);
  EXPECT_LT(og::max_abs(traj.p), 1e-12);
}

TEST(SolveEquilibrium, LongHorizonStaysAccurate) {
  auto net = *og::preset("fig1b");
  net.horizon = 50.0;
  const auto traj = og::solve_equilibrium(net, 2001);
  const auto cf = og::closed_form_samples(net, traj.grid);
  ASSERT_TRUE(cf);
  EXPECT_LT(og::max_abs_diff(*cf, traj.x), 1e-8);
}

TEST(SolveEquilibrium, RejectsBadInput) {
  auto net = *og::preset("fig1b");
  EXPECT_THROW(og::solve_equilibrium(net, 1), og::InputError);
  net.horizon = -1.0;
  EXPECT_THROW(og::solve_equilibrium(net, 11), og::InputError);
}

TEST(UniformGrid, EndsExactlyAtHorizon) {
  const auto g = og::uniform_grid(5.0, 7);
  ASSERT_EQ(g.size(), 7u);
  EXPECT_EQ(g.front(), 0.0);
  EXPECT_EQ(g.back(), 5.0);
}

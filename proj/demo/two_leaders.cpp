// Two camps pulled by leaders 1 and 10. Raising leader 1's pull on its camp
// and the camps' cross influence moves the followers of leader 10 toward the
// other camp.

#include <cstdio>

#include "opinion_game/opinion_game.hpp"

namespace og = opinion_game;

namespace {

double group_mean(const og::EquilibriumTrajectory& traj, std::size_t g, std::size_t first, std::size_t last) {
  double s = 0.0;
  for (std::size_t i = first; i <= last; ++i) s += traj.x(g, i);
  return s / static_cast<double>(last - first + 1);
}

void report(const og::InfluenceNetwork& net) {
  const auto traj = og::solve_equilibrium(net, 501);
  std::printf("%s\n", net.name.c_str());
  std::printf("     t   leader1  camp1    camp10   leader10\n");
  for (std::size_t g = 0; g < traj.samples(); g += 100)
    std::printf("%6.2f  %7.4f  %7.4f  %7.4f  %7.4f\n", traj.grid[g], traj.x(g, 0), group_mean(traj, g, 1, 4),
                group_mean(traj, g, 5, 8), traj.x(g, 9));
  std::printf("nash residual %.3e\n\n", og::nash_residual(net, traj));
}

}  // namespace

int main() {
  report(*og::preset("fig3b"));
  report(*og::preset("fig3c"));
  return 0;
}

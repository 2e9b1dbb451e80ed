#pragma once

// Command implementations behind the opinion-game executable.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "opinion_game/opinion_game.hpp"

namespace opinion_game::cli {

enum ExitCode : int {
  kOk = 0,
  kVerificationFailed = 1,
  kInputError = 2,
  kSolverError = 3,
  kUnsupported = 4,
};

struct RunReport {
  std::string scenario;
  std::size_t samples = 0;
  std::string trajectory_path;
  std::vector<CostBreakdown> costs;
  std::optional<double> nash_residual;
  std::vector<StationarityResidual> stationarity;
  Vector terminal;
  std::optional<double> closed_form_error;
  std::vector<DeviationResult> deviations;
};

inline void print_report(std::ostream& os, const RunReport& r) {
  const auto old_flags = os.flags();
  const auto old_prec = os.precision();
  os << "scenario: " << r.scenario << "\n"
     << "samples: " << r.samples << "\n";
  if (!r.trajectory_path.empty()) os << "trajectory: " << r.trajectory_path << "\n";
  os << std::scientific << std::setprecision(6);
  os << "agent  influence     stubbornness  control       total\n";
  for (const auto& c : r.costs)
    os << std::setw(5) << c.agent + 1 << "  " << c.influence_term << "  " << c.stubbornness_term << "  "
       << c.control_term << "  " << c.total << "\n";
  os << "terminal opinions:";
  for (double v : r.terminal) os << " " << std::defaultfloat << std::setprecision(10) << v;
  os << std::scientific << std::setprecision(6) << "\n";
  if (!r.stationarity.empty()) {
    double ctrl = 0, ode = 0, sx = 0, init = 0, term = 0;
    bool ok = true;
    for (const auto& s : r.stationarity) {
      ctrl = std::max(ctrl, s.control);
      ode = std::max(ode, s.costate_ode);
      sx = std::max(sx, s.state_ode);
      init = std::max(init, s.initial);
      term = std::max(term, s.terminal);
      ok = ok && s.passed();
    }
    os << "stationarity: |u+p| " << ctrl << ", costate ODE " << ode << ", state ODE " << sx << " (tol "
       << r.stationarity.front().ode_tol << "), |x(0)-x0| " << init << ", |p(T)| " << term << " -> "
       << (ok ? "pass" : "FAIL") << "\n";
  }
  if (r.nash_residual) os << "nash residual: " << *r.nash_residual << "\n";
  if (!r.deviations.empty()) {
    double worst = std::numeric_limits<double>::infinity();
    bool ok = true;
    for (const auto& d : r.deviations) {
      worst = std::min(worst, d.worst_gap);
      ok = ok && d.passed;
    }
    os << "deviation tests: " << r.deviations.size() << " agents x " << r.deviations.front().count
       << " perturbations, worst cost change " << worst << " -> " << (ok ? "pass" : "FAIL") << "\n";
  }
  if (r.closed_form_error) os << "closed-form max deviation: " << *r.closed_form_error << "\n";
  os.flags(old_flags);
  os.precision(old_prec);
}

inline RunReport base_report(const InfluenceNetwork& net, const EquilibriumTrajectory& traj) {
  RunReport r;
  r.scenario = net.name;
  r.samples = traj.samples();
  for (std::size_t i = 0; i < net.n; ++i) r.costs.push_back(evaluate_cost(net, traj, i));
  const auto last = traj.x.row(traj.samples() - 1);
  r.terminal.assign(last.begin(), last.end());
  r.stationarity = stationarity_check(net, traj);
  if (auto cf = closed_form_samples(net, traj.grid)) r.closed_form_error = max_abs_diff(*cf, traj.x);
  return r;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

inline std::string output_stem(const InfluenceNetwork& net) { return net.name.empty() ? "scenario" : net.name; }

inline RunReport cmd_simulate(const InfluenceNetwork& net, std::size_t samples, const std::filesystem::path& out_dir,
                              bool with_costate) {
  const auto traj = solve_equilibrium(net, samples);
  RunReport r = base_report(net, traj);
  const auto path = out_dir / (output_stem(net) + ".csv");
  write_text(path, trajectory_csv(traj, with_costate));
  r.trajectory_path = path.string();
  return r;
}

struct VerifyOptions {
  std::size_t samples = 501;
  std::size_t count = 100;
  std::uint64_t seed = 0;
  bool constant_candidate = false;
  double nash_tolerance = 1e-6;
  double deviation_tolerance = 1e-9;
};

inline bool report_passed(const RunReport& r, double nash_tolerance) {
  for (const auto& s : r.stationarity)
    if (!s.passed()) return false;
  for (const auto& d : r.deviations)
    if (!d.passed) return false;
  return r.nash_residual && *r.nash_residual <= nash_tolerance;
}

inline RunReport cmd_verify(const InfluenceNetwork& net, const VerifyOptions& opt) {
  const auto traj = opt.constant_candidate ? constant_candidate(net, opt.samples) : solve_equilibrium(net, opt.samples);
  RunReport r = base_report(net, traj);
  if (opt.constant_candidate) r.scenario += " [constant candidate]";
  r.nash_residual = nash_residual(net, traj);
  DeviationOptions dopt;
  dopt.tolerance = opt.deviation_tolerance;
  for (std::size_t i = 0; i < net.n; ++i) r.deviations.push_back(deviation_test(net, traj, i, opt.count, opt.seed, dopt));
  return r;
}

inline std::string format_time(const std::optional<double>& t) {
  if (!t) return "not reached";
  std::ostringstream s;
  s << std::setprecision(10) << *t;
  return s.str();
}

/// Long-run limits, epsilon-consensus times and distance ratios for the two
/// closed-form topologies. Throws UnsupportedError otherwise.
inline void cmd_limits(std::ostream& os, const InfluenceNetwork& net, const std::vector<double>& eps_list) {
  const Topology topo = classify_topology(net);
  os << std::setprecision(12);
  if (const auto* cu = std::get_if<CompleteUniform>(&topo)) {
    const auto p = CompleteUniformParams::make(net.n, cu->w, cu->k, net.horizon);
    os << "topology: complete-uniform (w = " << p.w << ", k = " << p.k << ", lambda1 = " << p.lambda1() << ")\n";
    os << "mean initial opinion: " << mean(net.x0) << "\n";
    const Vector lim = complete_limit(p, net.x0);
    os << "long-run limits:";
    for (double v : lim) os << " " << v;
    os << "\n";
    os << "pairwise distance ratio gamma(T): " << gamma(p, net.horizon) << "  (long-run k/lambda1: "
       << p.k / p.lambda1() << ")\n";
    for (double eps : eps_list)
      os << "eps " << eps << ": consensus time " << format_time(epsilon_consensus_time(p, net.x0, eps)) << "\n";
    return;
  }
  if (std::holds_alternative<SingleLeader>(topo)) {
    const auto p = LeaderParams::from(net);
    os << "topology: single-leader\n";
    const Vector lim = leader_limit(p, net.x0);
    os << "long-run limits:";
    for (double v : lim) os << " " << v;
    os << "\n";
    for (std::size_t i = 1; i < net.n; ++i) {
      const double base = std::abs(net.x0[i] - net.x0[0]);
      const double ratio = base == 0.0 ? 0.0 : leader_distance(p, i, net.x0, net.horizon) / base;
      os << "agent " << i + 1 << ": distance ratio to leader at T " << ratio;
      for (double eps : eps_list) os << ", eps " << eps << " time " << format_time(leader_epsilon_time(p, i, net.x0, eps));
      os << "\n";
    }
    return;
  }
  throw UnsupportedError("no closed form for a general topology; use simulate with a large T");
}

/// Writes <id>.csv and <id>.gp for each requested figure; returns the files.
inline std::vector<std::string> cmd_figures(const std::string& which, const std::filesystem::path& out_dir,
                                            std::size_t samples) {
  std::vector<std::string> ids;
  if (which == "all") {
    ids = figure_ids();
  } else {
    for (const auto& id : figure_ids())
      if (id == which) ids.push_back(id);
    if (ids.empty()) throw InputError("unknown figure id '" + which + "'");
  }
  std::vector<std::string> files;
  for (const auto& id : ids) {
    const auto net = *preset(id);
    const auto traj = solve_equilibrium(net, samples);
    const auto csv = out_dir / (id + ".csv");
    const auto gp = out_dir / (id + ".gp");
    write_text(csv, trajectory_csv(traj));
    write_text(gp, gnuplot_script(id, id + ".csv", net.n));
    files.push_back(csv.string());
    files.push_back(gp.string());
  }
  return files;
}

}  // namespace opinion_game::cli

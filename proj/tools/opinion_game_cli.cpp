#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cli_app.hpp"

namespace og = opinion_game;
namespace cli = opinion_game::cli;

namespace {

struct Source {
  std::string scenario;
  std::string preset;
};

void add_source(CLI::App* cmd, Source& src) {
  auto* s = cmd->add_option("--scenario", src.scenario, "scenario JSON file");
  auto* p = cmd->add_option("--preset", src.preset, "built-in scenario (fig1b, fig1c, fig2b, fig2c, fig3b, fig3c)");
  s->excludes(p);
  p->excludes(s);
}

og::InfluenceNetwork load(const Source& src) {
  if (!src.preset.empty()) {
    auto net = og::preset(src.preset);
    if (!net) throw og::InputError("unknown preset '" + src.preset + "'");
    return *net;
  }
  if (src.scenario.empty()) throw og::InputError("one of --scenario or --preset is required");
  std::vector<std::string> warnings;
  auto net = og::load_scenario(src.scenario, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  if (net.name.empty()) net.name = std::filesystem::path(src.scenario).stem().string();
  return net;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Open-loop Nash equilibria of the opinion-dynamics game"};
  app.require_subcommand(1);

  Source src;
  std::size_t samples = 501;
  std::string out_dir = ".";
  bool costate = false;

  auto* simulate = app.add_subcommand("simulate", "solve for the equilibrium and write the trajectory CSV");
  add_source(simulate, src);
  simulate->add_option("--samples", samples, "number of time samples on [0, T]")->check(CLI::Range(2, 1000000));
  simulate->add_option("--out", out_dir, "output directory");
  simulate->add_flag("--costate", costate, "append costate columns to the CSV");

  cli::VerifyOptions vopt;
  std::string candidate;
  auto* verify = app.add_subcommand("verify", "check the equilibrium by best responses and deviations");
  add_source(verify, src);
  verify->add_option("--samples", vopt.samples, "number of time samples on [0, T]")->check(CLI::Range(3, 1000000));
  verify->add_option("--seed", vopt.seed, "seed for the deviation tests");
  verify->add_option("--count", vopt.count, "random deviations per agent")->check(CLI::Range(1, 1000000));
  verify->add_option("--tol", vopt.nash_tolerance, "accepted Nash residual");
  verify->add_option("--candidate", candidate, "verify a different candidate instead")
      ->check(CLI::IsMember({"equilibrium", "constant"}));

  std::vector<double> eps = {0.1, 0.01};
  auto* limits = app.add_subcommand("limits", "closed-form limits and epsilon-consensus times");
  add_source(limits, src);
  limits->add_option("--eps", eps, "tolerance list")->delimiter(',');

  std::string figure;
  auto* figures = app.add_subcommand("figures", "write CSV and gnuplot files for the built-in figures");
  figures->add_option("id", figure, "figure id or 'all'")->required();
  figures->add_option("--samples", samples, "number of time samples on [0, T]")->check(CLI::Range(2, 1000000));
  figures->add_option("--out", out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kOk : cli::kInputError;
  }

  try {
    if (*simulate) {
      cli::print_report(std::cout, cli::cmd_simulate(load(src), samples, out_dir, costate));
      return cli::kOk;
    }
    if (*verify) {
      vopt.constant_candidate = candidate == "constant";
      const auto report = cli::cmd_verify(load(src), vopt);
      cli::print_report(std::cout, report);
      const bool ok = cli::report_passed(report, vopt.nash_tolerance);
      std::cout << "verdict: " << (ok ? "PASS" : "FAIL") << "\n";
      return ok ? cli::kOk : cli::kVerificationFailed;
    }
    if (*limits) {
      cli::cmd_limits(std::cout, load(src), eps);
      return cli::kOk;
    }
    if (*figures) {
      for (const auto& f : cli::cmd_figures(figure, out_dir, samples)) std::cout << f << "\n";
      return cli::kOk;
    }
  } catch (const og::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kInputError;
  } catch (const og::UnsupportedError& e) {
    std::cerr << "unsupported: " << e.what() << "\n";
    return cli::kUnsupported;
  } catch (const std::exception& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return cli::kSolverError;
  }
  return cli::kInputError;
}

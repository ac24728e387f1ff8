// Command-line laboratory for the decentralized momentum gradient
// descent-ascent solver.
//
//   dmgda run    <config.json>   one trajectory  -> metrics.csv, summary.json
//   dmgda sweep  <config.json>   horizon sweep   -> sweep.csv, rate.json
//   dmgda verify <config.json>   checked run     -> verify_report.{json,txt}
//
// Common options: --out <dir>, --threads <n>, --cadence <k>.
// Exit codes: 0 ok, 1 verification failure, 2 config error, 3 divergence.

#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dmgda/dmgda.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::optional<std::string> out;
  std::optional<int> threads;
  std::optional<long long> cadence;

  dmgda::Overrides overrides() const {
    dmgda::Overrides ov;
    ov.out = out;
    ov.threads = threads;
    ov.cadence = cadence;
    return ov;
  }
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("config", args.config, "experiment config (JSON)")
      ->required();
  cmd->add_option("--out", args.out,
                  "output directory (overrides the config's run.out)");
  cmd->add_option("--threads", args.threads,
                  "worker threads (overrides DMGDA_THREADS and run.threads)");
  cmd->add_option("--cadence", args.cadence,
                  "metrics cadence in iterations; 0 = auto (overrides "
                  "run.cadence)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"decentralized momentum gradient descent-ascent laboratory"};
  app.set_version_flag("--version", std::string(dmgda::version()));
  app.require_subcommand(1);

  CommonArgs run_args, sweep_args, verify_args;
  CLI::App* run_cmd =
      app.add_subcommand("run", "execute one trajectory and emit metrics");
  add_common(run_cmd, run_args);
  CLI::App* sweep_cmd = app.add_subcommand(
      "sweep", "run a horizon sweep and fit the convergence rate");
  add_common(sweep_cmd, sweep_args);
  CLI::App* verify_cmd = app.add_subcommand(
      "verify", "run with full instrumentation and check every invariant");
  add_common(verify_cmd, verify_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    app.exit(e);
    return 2;  // usage errors are config errors
  }

  try {
    if (run_cmd->parsed()) return dmgda::cmd_run(run_args.config,
                                                 run_args.overrides());
    if (sweep_cmd->parsed())
      return dmgda::cmd_sweep(sweep_args.config, sweep_args.overrides());
    if (verify_cmd->parsed())
      return dmgda::cmd_verify(verify_args.config, verify_args.overrides());
  } catch (const dmgda::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

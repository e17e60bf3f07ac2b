#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "afl/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Federated-learning procurement auction experiments"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run an experiment config and write CSV results");
  run->add_option("config", config_path, "Config file")->required();

  std::string ledger_path;
  auto* verify = app.add_subcommand("verify-ledger", "Verify a hash-chained reputation ledger");
  verify->add_option("file", ledger_path, "Ledger file (ledger.bin)")->required();

  double theta = 1.0;
  double lambda = 1.0;
  double delta = 2.0;
  std::string regime = "complete";
  auto* solve = app.add_subcommand("solve", "Print the optimal contract for one client type");
  solve->add_option("--theta", theta, "Client efficiency in [0, 1]")->required();
  solve->add_option("--lambda", lambda, "Server value per unit output")->capture_default_str();
  solve->add_option("--delta", delta, "Efficiency sensitivity of cost")->capture_default_str();
  solve->add_option("--regime", regime, "complete or incomplete")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? afl::cli::kOk : afl::cli::kUsage;
  }

  if (*run) return afl::cli::cmd_run(config_path, std::cout, std::cerr);
  if (*verify) return afl::cli::cmd_verify_ledger(ledger_path, std::cout, std::cerr);
  return afl::cli::cmd_solve(theta, lambda, delta, regime, std::cout, std::cerr);
}

// Command-line front end: solves frictional/frictionless utility
// maximization on event-tree markets, certifies deflators and consistent
// price systems, renders shadow-price verdicts, and generates the
// no-shadow-price example market.

#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "bidask/report.hpp"

int main(int argc, char** argv) {
  CLI::App app{"event-tree utility maximization under proportional transaction costs"};
  app.require_subcommand(1);

  bidask::RunConfig cfg;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--out", cfg.out_path, "report output path");
    cmd->add_option("--seed", cfg.seed, "seed for sampled checks");
    cmd->add_option("--samples", cfg.samples, "sampled strategies per check");
    cmd->add_option("--tol-gap", cfg.gap_tol, "duality gap tolerance");
    cmd->add_option("--tol-cert", cfg.cert_tol, "certificate tolerance");
    cmd->add_option("--tol-value", cfg.value_tol, "value comparison tolerance");
    cmd->add_option("--tol-align", cfg.align_tol, "trade alignment tolerance");
    cmd->add_option("--tol-trade", cfg.trade_tol, "line-search tolerance");
  };

  CLI::App* solve = app.add_subcommand("solve", "primal + dual solve with certificates");
  solve->add_option("--market", cfg.market_path, "market JSON file")->required();
  solve->add_option("--utility", cfg.utility, "log or power:<p>");
  solve->add_option("--x", cfg.x, "initial cash endowment");
  add_common(solve);

  CLI::App* dual = app.add_subcommand("dual", "dual minimization over certified deflators");
  dual->add_option("--market", cfg.market_path, "market JSON file")->required();
  dual->add_option("--utility", cfg.utility, "log or power:<p>");
  dual->add_option("--y", cfg.y, "initial dual scale");
  add_common(dual);

  CLI::App* cps = app.add_subcommand("cps-check", "consistent price system feasibility");
  cps->add_option("--market", cfg.market_path, "market JSON file")->required();
  cps->add_option("--lambda-prime", cfg.lambda_prime, "spread for the check (default lambda/2)");
  add_common(cps);

  CLI::App* shadow = app.add_subcommand("shadow-check", "shadow price existence verdict");
  shadow->add_option("--market", cfg.market_path, "market JSON file")->required();
  shadow->add_option("--utility", cfg.utility, "log or power:<p>");
  shadow->add_option("--x", cfg.x, "initial cash endowment");
  add_common(shadow);

  CLI::App* ce = app.add_subcommand("counterexample",
                                    "generate the no-shadow-price market and its certificate");
  ce->add_option("--lambda", cfg.ce.lambda, "transaction cost");
  ce->add_option("--epsilon", cfg.ce.epsilon, "down-move weight");
  ce->add_option("--q0", cfg.ce.q0, "second-period purchase, upper branch");
  ce->add_option("--q1", cfg.ce.q1, "second-period purchase scale, lower branches");
  ce->add_option("--N", cfg.ce.truncation, "retained branches");
  add_common(ce);

  CLI::App* verify = app.add_subcommand("verify", "re-check a previously written report");
  verify->add_option("--report", cfg.report_path, "report JSON file")->required();
  add_common(verify);

  CLI11_PARSE(app, argc, argv);
  cfg.command = app.get_subcommands().front()->get_name();

  const bidask::RunResult result = bidask::run(cfg);
  if (!result.message.empty()) std::cerr << "bidask: " << result.message << "\n";
  if (!result.report_file.empty()) std::cout << result.report_file << "\n";
  return result.exit_code;
}

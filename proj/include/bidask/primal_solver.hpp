#pragma once

#include <vector>

#include "bidask/event_tree.hpp"
#include "bidask/portfolio.hpp"

namespace bidask {

struct Solution {
  double value = 0.0;
  Strategy strategy;
  std::vector<double> cond_value;  // per node: value of the entering holdings
  double kkt_residual = 0.0;       // worst normalized one-step optimality residual
  double duality_gap = 0.0;        // filled once a certified deflator is attached
  long evals = 0;                  // objective evaluations spent
  bool converged = true;
};

struct SolveOptions {
  double trade_tol = 1e-12;  // line-search tolerance on the trade variable
  double pin_tol = 1e-9;     // trades below this count as "no trade"
  bool check_no_arbitrage = true;
  double lambda_prime_factor = 0.5;  // robust no-arbitrage check at lambda * factor
};

// Maximizes E[U(terminal cash)] over admissible strategies started at (x, 0)
// in the market with proportional costs, by backward induction with an exact
// per-node solvency cap and a scalar concave line search. Throws when the
// robust no-arbitrage precondition fails.
Solution solve_frictional(const MarketSpec& market, const Utility& utility, double x,
                          const SolveOptions& opts = {});

// Frictionless problem for an arbitrary positive price process on the tree:
// maximizes E[U(x + phi . price_T)] over predictable strategies with
// nonnegative wealth. Throws when the price admits one-step arbitrage.
Solution solve_frictionless(const EventTree& tree, const std::vector<double>& price,
                            const Utility& utility, double x, const SolveOptions& opts = {});

// Conditional value function: best expected utility attainable from holdings
// (psi0, psi1) at `node`; -inf when no solvent continuation exists.
double conditional_value(const MarketSpec& market, const Utility& utility, int node,
                         double psi0, double psi1, const SolveOptions& opts = {});

struct MarginalValue {
  double yhat = 0.0;         // from the extracted deflator, u'(x)
  double finite_diff = 0.0;  // central difference oracle
  double rel_gap = 0.0;
};

MarginalValue marginal_value(const MarketSpec& market, const Utility& utility, double x,
                             const SolveOptions& opts = {});

// Superdifferential of the conditional value functions along a fixed
// strategy, evaluated bottom-up: leaves carry U'(terminal cash) times
// (1, trading price); traded nodes pin the price ratio to the side they
// trade at; one-step expectations propagate upward, with boundary-face
// corrections where a solvency cap binds. `node` is the subtree root and
// (psi0, psi1) the holdings entering it. Writes y0/y1 for the subtree.
void extract_gradients(const MarketSpec& market, const Utility& utility,
                       const SolvencyCones& cones, const Strategy& strategy, int node,
                       double psi0, double psi1, std::vector<double>& y0,
                       std::vector<double>& y1);

// One-step sign test at a node of a frictionless price process: arbitrage is
// absent iff the price change over the step takes both signs or vanishes.
bool one_step_price_ok(const EventTree& tree, const std::vector<double>& price, int node,
                       double rel_tol = 1e-12);

}  // namespace bidask

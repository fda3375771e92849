#pragma once

#include <string>
#include <vector>

#include "bidask/event_tree.hpp"
#include "bidask/portfolio.hpp"
#include "bidask/primal_solver.hpp"

namespace bidask {

// Candidate dual pair (Y0, Y1) indexed by nodes, with initial scale y.
struct Deflator {
  double y = 0.0;
  std::vector<double> y0, y1;

  bool matches(const EventTree& tree) const {
    return static_cast<int>(y0.size()) == tree.size() &&
           static_cast<int>(y1.size()) == tree.size();
  }
};

struct DualSolution {
  Deflator deflator;
  double value = 0.0;  // E[V(Y0_T)]
  double yhat = 0.0;
  bool converged = false;
  double solver_gap = 0.0;
};

struct CheckResult {
  bool ok = true;
  double worst = 0.0;  // largest violation observed
  int node = -1;
  std::string what;
};

struct DeflatorReport {
  bool ok = false;
  CheckResult nonnegative;
  CheckResult initial_scale;   // Y0 at the root equals y
  CheckResult spread;          // Y1/Y0 within [bid, ask] nodewise
  CheckResult certificate;     // delta in the dual of the admissible-position cone
  CheckResult sampled;         // supermartingale along sampled admissible strategies
  // The node-wise certificate is sufficient for membership in the dual
  // domain; whether it is necessary on arbitrary trees is open, so failures
  // of `certificate` alone are reported but never promoted to a verdict
  // about the deflator being outside the domain.
  bool certificate_is_only_sufficient = true;
};

struct VerifyOptions {
  double tol = 1e-9;
  int samples = 50;
  std::uint64_t seed = 0;
};

DeflatorReport verify_deflator(const MarketSpec& market, const Deflator& deflator,
                               const VerifyOptions& opts = {});

// Superdifferential of the conditional value functions along the optimal
// strategy; for log utility along trading prices s this is
// (1, s_t) / (phi0 + phi1 s_t).
Deflator extract_deflator(const MarketSpec& market, const Utility& utility,
                          const Solution& primal);

struct DualOptions {
  double gap_tol = 1e-11;
  // The strictly feasible start comes from a consistent price system at
  // lambda * start_lambda_factor; different factors give independent starts.
  double start_lambda_factor = 0.9;
  double delta_seed = 1e-3;
};

// Minimizes E[V(Y0_T)] over node-wise certified deflators with Y0_root = y.
DualSolution dual_value(const MarketSpec& market, const Utility& utility, double y,
                        const DualOptions& opts = {});

// Shared convex-program core; with martingale_only the supermartingale slack
// is dropped and the feasible set is exactly the scaled consistent price
// systems.
DualSolution dual_value_constrained(const MarketSpec& market, const Utility& utility, double y,
                                    const DualOptions& opts, bool martingale_only);

struct OptimalityReport {
  bool ok = false;
  CheckResult terminal_marginal;  // h = U'(g) leafwise, relative
  CheckResult product;            // E[g h] = x yhat
  CheckResult drift;              // deflated optimal wealth is a martingale
  CheckResult bipolar;            // E[g h] <= x y over sampled payoffs
};

OptimalityReport verify_optimality_relations(const MarketSpec& market, const Utility& utility,
                                             double x, const Solution& primal,
                                             const Deflator& deflator,
                                             const VerifyOptions& opts = {});

struct AlignmentReport {
  bool ok = false;
  CheckResult buys;      // trade up => ratio at ask
  CheckResult sells;     // trade down => ratio at bid
  CheckResult identity;  // deflated wealth equals the ratio-priced integral
  int trading_nodes = 0;
};

AlignmentReport verify_trade_alignment(const MarketSpec& market, const Solution& primal,
                                       const Deflator& deflator, double tol = 1e-8,
                                       double trade_tol = 1e-9);

struct LocalShadowReport {
  bool ok = false;
  int checked = 0;
  int vacuous = 0;          // deviations outside the solvent region
  double max_violation = 0.0;
  double zero_deviation_gap = 0.0;  // equality at nu = 0
};

// Superdifferential inequality of the conditional value function: no single
// trade at the deflator's price ratio improves on the optimal holdings.
LocalShadowReport verify_local_shadow(const MarketSpec& market, const Utility& utility,
                                      double x, const Solution& primal,
                                      const Deflator& deflator, int samples = 100,
                                      std::uint64_t seed = 0, double tol = 1e-7);

// Random admissible strategy (uniform trades inside the exact solvency
// caps, mixed with no-trade and cap-binding choices).
Strategy sample_admissible_strategy(const MarketSpec& market, const SolvencyCones& cones,
                                    double x, struct Rng& rng);

// Deflator JSON mirrors the market node ids:
//   {"y": float, "nodes": [{"id": str, "y0": float, "y1": float}]}
Deflator deflator_from_json(const std::string& text, const EventTree& tree);
std::string deflator_to_json(const Deflator& deflator, const EventTree& tree, int indent = 2);

}  // namespace bidask

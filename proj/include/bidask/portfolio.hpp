#pragma once

#include <string>
#include <vector>

#include "bidask/event_tree.hpp"

namespace bidask {

// Utility families with closed-form conjugates. Both satisfy the Inada
// conditions and have asymptotic elasticity < 1.
class Utility {
 public:
  enum class Kind { Log, Power };

  static Utility log_utility() { return Utility(Kind::Log, 0.0); }
  static Utility power_utility(double p);  // p < 1, p != 0

  Kind kind() const { return kind_; }
  double exponent() const { return p_; }

  double value(double x) const;             // U(x), throws for x <= 0
  double value_or_neg_inf(double x) const;  // -inf outside the domain (solver sentinel)
  double marginal(double x) const;          // U'(x)
  double inverse_marginal(double y) const;  // (U')^{-1}(y)
  double conjugate(double y) const;         // V(y) = sup_x {U(x) - x y}
  double conjugate_prime(double y) const;   // V'(y) = -(U')^{-1}(y)

  std::string name() const;
  static Utility from_name(const std::string& name);  // "log" or "power:<p>"

 private:
  Utility(Kind kind, double p) : kind_(kind), p_(p) {}
  Kind kind_;
  double p_;
};

// Cash obtained by closing the position (x, y) at time-t bid/ask prices:
// x + y^+ (1-lambda) ask - y^- ask.
double liquidation_value(double x, double y, double ask, double lambda);

// Trading strategy stored as per-node trade increments. The post-trade
// holdings at a node are held over the following period; the trade at a leaf
// is the terminal liquidation.
struct Strategy {
  double initial_cash = 0.0;
  std::vector<double> dphi0;  // per node
  std::vector<double> dphi1;  // per node

  bool matches(const EventTree& tree) const {
    return static_cast<int>(dphi0.size()) == tree.size() &&
           static_cast<int>(dphi1.size()) == tree.size();
  }
};

// Post-trade holdings per node, from accumulating trades along root paths.
struct Holdings {
  std::vector<double> phi0;  // after the trade at the node
  std::vector<double> phi1;
};

Holdings accumulate(const EventTree& tree, const Strategy& strategy);

struct SelfFinancingReport {
  bool ok = true;
  std::vector<double> slack;  // per node; negative = violation
  int worst_node = -1;
  double worst_slack = 0.0;
};

// Self-financing check: dphi0 <= -(dphi1)^+ S + (dphi1)^- (1-lambda) S at
// every node, within tolerance. Slack is RHS - dphi0.
SelfFinancingReport is_self_financing(const Strategy& strategy, const MarketSpec& market,
                                      double tol = 1e-10);

// Admissible: self-financing, initial endowment (x, 0), risky position
// liquidated at every leaf with nonnegative terminal cash.
bool is_admissible(const Strategy& strategy, const MarketSpec& market, double x,
                   std::string* why = nullptr, double tol = 1e-10);

// Wealth process x + phi^1 . S of a strategy in a frictionless market with
// price process `price`; entry [i] is the wealth entering node i, before the
// trade at i.
std::vector<double> frictionless_wealth(const EventTree& tree, const Strategy& strategy,
                                        const std::vector<double>& price, double x);

// Dual descriptions of the solvency geometry. For every node u the set of
// holdings (phi0, phi1) admitting a solvent continuation from u is the cone
// {phi0 + c phi1 >= 0 for all c in [a_u, b_u]}; post-trade holdings chosen at
// u must survive every child, giving the interval [A_u, B_u] =
// [min_children a, max_children b]. Leaves carry their own bid/ask interval
// and A = a, B = b there.
struct SolvencyCones {
  std::vector<double> a, b;  // entering-position cone, per node
  std::vector<double> A, B;  // post-trade cone, per node
};

SolvencyCones compute_solvency_cones(const MarketSpec& market);

// Feasible one-step trades d at a non-leaf node from entering holdings
// (psi0, psi1): buys cost d * ask, sells earn -d * bid, and the post-trade
// position must lie in the cone [A_u, B_u]. The feasible set is a closed
// interval (possibly empty).
struct TradeInterval {
  double lo = 0.0;
  double hi = 0.0;
  bool empty = true;
};

TradeInterval feasible_trades(const MarketSpec& market, const SolvencyCones& cones, int node,
                              double psi0, double psi1);

// Strategy JSON: {"initial_cash": float,
//                 "trades": [{"node": str, "dphi0": float, "dphi1": float}]}
Strategy strategy_from_json(const std::string& text, const EventTree& tree);
std::string strategy_to_json(const Strategy& strategy, const EventTree& tree, int indent = 2);

}  // namespace bidask

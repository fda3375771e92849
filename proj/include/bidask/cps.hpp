#pragma once

#include <string>
#include <vector>

#include "bidask/event_tree.hpp"
#include "bidask/portfolio.hpp"

namespace bidask {

// Consistent price system: a martingale pair (Z0, Z1) with Z0_root = 1 and
// ratio Z1/Z0 inside the bid-ask spread at every node.
struct PriceSystem {
  std::vector<double> z0, z1;  // per node
  double margin = 0.0;         // min of Z0 over the nodes
};

struct CpsVerdict {
  bool feasible = false;
  double margin = 0.0;
  PriceSystem system;  // valid when feasible
};

// Linear feasibility with a max-min objective: maximize the minimum of Z0
// over nodes subject to the martingale and spread constraints for costs
// lambda_prime. Feasible iff the optimal margin clears `margin_tol`.
CpsVerdict find_cps(const MarketSpec& market, double lambda_prime, double margin_tol = 1e-9);

struct MartingaleReport {
  bool ok = false;
  double max_drift = 0.0;
  int worst_node = -1;
};

// Zero one-step conditional drift at every non-leaf node, within tol.
MartingaleReport is_martingale(const EventTree& tree, const std::vector<double>& values,
                               double tol = 1e-10);

struct CpsDualResult {
  bool converged = false;
  double value = 0.0;    // inf E[V(y Z0_T)] over consistent price systems
  PriceSystem system;    // minimizer
};

// Dual value through price systems: minimize E[V(y * Z0_T)] over martingale
// pairs in the spread (convex program, barrier method).
CpsDualResult dual_value_via_cps(const MarketSpec& market, const Utility& utility, double y);

}  // namespace bidask

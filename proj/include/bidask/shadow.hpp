#pragma once

#include <string>
#include <vector>

#include "bidask/cps.hpp"
#include "bidask/dual_solver.hpp"
#include "bidask/event_tree.hpp"
#include "bidask/portfolio.hpp"
#include "bidask/primal_solver.hpp"

namespace bidask {

// In-spread frictionless price candidate, usually the ratio Y1/Y0 of a dual
// minimizer.
struct ShadowCandidate {
  std::vector<double> price;  // per node
  std::string source;
  bool in_spread = false;
  double spread_violation = 0.0;
};

struct ArbitrageVerdict {
  bool arbitrage_free = false;
  int bad_node = -1;
};

struct ShadowVerdict {
  bool exists = false;
  ShadowCandidate candidate;
  double frictional_value = 0.0;
  double frictionless_value = 0.0;
  double margin = 0.0;  // frictionless - frictional; > 0 when no shadow price
  bool values_match = false;
  bool alignment_ok = false;
  CheckResult alignment;             // frictionless trades vs bid/ask of the market
  MartingaleReport martingale_y0;    // of the source deflator, when given
  MartingaleReport martingale_y1;
  bool candidate_arbitrage_free = false;
  std::string note;
};

// Ratio of a dual minimizer, with spread containment re-verified.
ShadowCandidate candidate_from_dual(const MarketSpec& market, const Deflator& deflator,
                                    double tol = 1e-9);

// One-step sign test at every node; a positive price process on a finite
// tree is arbitrage-free iff each one-step move takes both signs or none.
ArbitrageVerdict frictionless_arbitrage_check(const EventTree& tree,
                                              const std::vector<double>& price);

// Solves the frictionless problem on the candidate and compares against the
// frictional optimum: a shadow price needs both value equality and trades
// only at bid/ask prices. `source` optionally supplies the deflator whose
// martingale property is reported alongside.
ShadowVerdict verify_shadow(const MarketSpec& market, const Utility& utility, double x,
                            const ShadowCandidate& candidate,
                            const Deflator* source = nullptr, double value_tol = 1e-7,
                            double align_tol = 1e-8);

// Deflator of the frictionless problem for a given price process, built
// backward from the optimal terminal wealth: Y_t = E_t[U'(w_T)]. It is a
// martingale, and (Y, Y * price) prices the optimal wealth with zero drift.
std::vector<double> frictionless_dual_deflator(const EventTree& tree,
                                               const std::vector<double>& price,
                                               const Utility& utility,
                                               const Solution& frictionless);

}  // namespace bidask

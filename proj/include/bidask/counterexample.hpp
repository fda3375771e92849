#pragma once

#include <string>
#include <vector>

#include "bidask/dual_solver.hpp"
#include "bidask/event_tree.hpp"
#include "bidask/portfolio.hpp"

namespace bidask {

// Two-period market on a countable branch family where no shadow price
// exists: the ask starts at 2, jumps to 3 or drops to 1 + 1/n, and each
// branch then moves so that the stated trades satisfy the one-step
// first-order conditions exactly. Only branches n <= truncation are kept
// in memory; closed-form values are summed over the full family.
struct CounterexampleParams {
  double lambda = 0.2;    // in (0,1)
  double epsilon = 0.1;   // in (0,1/3)
  double q0 = 0.1;        // in (0, (1-lambda)/(1+3 lambda+2 lambda^2))
  double q1 = 0.1;        // in (0, (1-lambda)/(1+4 lambda+3 lambda^2))
  int truncation = 30;    // N >= 2

  void validate() const;  // throws std::invalid_argument outside the ranges
};

// Transition probabilities to the upper second-period node.
double up_branch_up_prob(double lambda, double q0);              // from ask 3
double down_branch_up_prob(int n, double lambda, double q1);     // from ask 1+1/n

struct CounterexampleMarket {
  MarketSpec market;
  double renormalization = 1.0;  // divisor applied to the time-1 weights
  int root = 0;
  int up = -1;
  std::vector<int> down;  // down[n-1] = branch-n node index
};

CounterexampleMarket build_market(const CounterexampleParams& params);

struct ClosedFormPrimal {
  Strategy strategy;   // stated trades restricted to the retained branches
  double value = 0.0;  // exact expected utility on the full branch family
  double first_trade = 0.0;  // 1 / (1 + lambda)
};

ClosedFormPrimal closed_form_primal(const CounterexampleParams& params,
                                    const CounterexampleMarket& cm);

struct ClosedFormDual {
  Deflator deflator;   // (1, trading price) / wealth along the stated trades
  double drift0 = 0.0;  // E[Y0_1] - Y0_0, exact series, strictly negative
  double drift1 = 0.0;  // E[Y1_1] - Y1_0, exact series, strictly negative
  bool certificate_ok = false;  // node-wise certificate with the full-family cones
  double certificate_worst = 0.0;
};

ClosedFormDual closed_form_dual(const CounterexampleParams& params,
                                const CounterexampleMarket& cm);

struct ClosedFormFrictionless {
  Strategy strategy;                   // on the candidate price process
  std::vector<double> candidate_price;  // per retained node: ask, ask, bid pattern
  double value = 0.0;                  // exact series value
  double first_trade = 1.0;
};

ClosedFormFrictionless closed_form_frictionless(const CounterexampleParams& params,
                                                const CounterexampleMarket& cm);

struct TruncationPoint {
  int N = 0;
  double solver_trade = 0.0;  // first-period trade of the generic solver
  double cap = 0.0;           // binding solvency cap 1/(1+lambda-(1-lambda)/N)
  double residual = 0.0;      // |solver_trade - 1/(1+lambda)|
};

struct SpreadRobustnessPoint {
  double lambda_prime = 0.0;
  double gap = 0.0;  // frictionless candidate value - frictional value, numeric
};

struct NonexistenceCertificate {
  bool ok = false;
  double utility_gap = 0.0;  // series-exact, strictly positive
  double frictional_first_trade = 0.0;
  double frictionless_first_trade = 0.0;
  double drift0 = 0.0;
  double drift1 = 0.0;
  bool deflator_certificate_ok = false;
  std::vector<TruncationPoint> convergence;
  bool convergence_monotone = false;
  std::vector<SpreadRobustnessPoint> robustness;
  std::string failure;  // located reason when !ok
};

struct NonexistenceOptions {
  std::vector<int> truncations = {5, 10, 20, 30};
  std::vector<double> spread_factors = {0.5, 0.25};  // lambda'' = factor * lambda
};

NonexistenceCertificate verify_nonexistence(const CounterexampleParams& params,
                                            const NonexistenceOptions& opts = {});

// First-order-condition diagnostics for the stated trades.
// One-step objective derivative in branch n at the stated second-period
// holding, along the optimal first-period position; zero at the maximizer.
double branch_foc_residual(const CounterexampleParams& params, int n);
// Derivative of the first-period objective at the solvency cap (full family
// series); positive, which is what pins the trade at the cap.
double root_derivative_at_cap(const CounterexampleParams& params);

}  // namespace bidask

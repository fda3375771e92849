#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "bidask/portfolio.hpp"

namespace bidask {

// Deterministic RNG (splitmix64) so that sampled checks and reports are
// reproducible across platforms; std:: distributions are not.
struct Rng {
  std::uint64_t state = 0x9e3779b97f4a7c15ull;

  explicit Rng(std::uint64_t seed = 0) { state = seed + 0x9e3779b97f4a7c15ull; }

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int uniform_int(int n) { return static_cast<int>(next() % static_cast<std::uint64_t>(n)); }
};

// Golden-section maximization of a concave function on [lo, hi]. The
// function may return -inf near (or at) the endpoints; comparisons still
// bracket the maximum. Ties within value_tie_tol prefer x = 0 when feasible.
struct ScalarMaxResult {
  double x = 0.0;
  double value = 0.0;
  int evals = 0;
};

ScalarMaxResult golden_max(const std::function<double(double)>& f, double lo, double hi,
                           double x_tol = 1e-12, int max_iter = 300,
                           double value_tie_tol = 1e-13);

// ---------------------------------------------------------------------------
// Dense two-phase simplex, Bland's rule. Small problems only.
// ---------------------------------------------------------------------------

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpConstraint {
  std::vector<double> coeffs;
  char type = '<';  // '<', '>', '='
  double rhs = 0.0;
};

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  std::vector<double> x;
  double objective = 0.0;
};

// maximize c.x subject to the constraints, x >= 0.
LpResult solve_lp(const std::vector<double>& c, const std::vector<LpConstraint>& rows);

// ---------------------------------------------------------------------------
// Log-barrier interior-point method for
//   minimize  sum_k weight_k * V(v[index_k])   (V = conjugate of `utility`)
//   s.t.      G v <= h,  Aeq v = beq,
// with v[index_k] > 0 enforced by the domain of V. Needs a strictly feasible
// start. The flat directions (variables outside the objective) are bounded
// by the constraints; the barrier picks the analytic center of the optimal
// face, so re-solves from different starts agree on the objective-relevant
// coordinates.
// ---------------------------------------------------------------------------

struct SeparableTerm {
  int index = 0;
  double weight = 1.0;
};

struct IpmProblem {
  int n = 0;
  Eigen::MatrixXd G;
  Eigen::VectorXd h;
  Eigen::MatrixXd Aeq;
  Eigen::VectorXd beq;
  std::vector<SeparableTerm> terms;
  Utility utility = Utility::log_utility();
};

struct IpmOptions {
  double gap_tol = 1e-11;
  double t0 = 1.0;
  double mu = 20.0;
  int max_newton = 80;
};

struct IpmResult {
  bool converged = false;
  Eigen::VectorXd v;
  double value = 0.0;  // objective at v
  double gap = 0.0;    // barrier duality-measure bound m/t
  int newton_steps = 0;
};

IpmResult solve_ipm(const IpmProblem& prob, const Eigen::VectorXd& v0,
                    const IpmOptions& opts = {});

}  // namespace bidask

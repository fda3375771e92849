#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "bidask/optim.hpp"

using namespace bidask;

TEST_CASE("golden section finds interior and boundary maxima") {
  const auto quad = [](double x) { return -(x - 0.3) * (x - 0.3); };
  const ScalarMaxResult r = golden_max(quad, -2.0, 2.0, 1e-13);
  CHECK(std::abs(r.x - 0.3) < 1e-10);

  // maximum at the right endpoint
  const auto lin = [](double x) { return 2.0 * x; };
  CHECK(golden_max(lin, -1.0, 4.0).x == doctest::Approx(4.0));

  // -inf plateau near the right edge (log barrier)
  const auto barr = [](double x) {
    const double s = 1.0 - x;
    return s <= 0.0 ? -std::numeric_limits<double>::infinity() : std::log(s) + 3.0 * x;
  };
  const ScalarMaxResult rb = golden_max(barr, 0.0, 1.0, 1e-13);
  CHECK(std::abs(rb.x - (1.0 - 1.0 / 3.0)) < 1e-9);
}

TEST_CASE("golden section prefers zero on flat ties") {
  const auto flat = [](double) { return 1.0; };
  CHECK(golden_max(flat, -1.0, 1.0).x == 0.0);
}

TEST_CASE("simplex solves a textbook LP") {
  // maximize 3x + 2y s.t. x + y <= 4, x + 3y <= 6, x,y >= 0 -> (4,0), obj 12
  std::vector<LpConstraint> rows(2);
  rows[0].coeffs = {1.0, 1.0};
  rows[0].type = '<';
  rows[0].rhs = 4.0;
  rows[1].coeffs = {1.0, 3.0};
  rows[1].type = '<';
  rows[1].rhs = 6.0;
  const LpResult r = solve_lp({3.0, 2.0}, rows);
  REQUIRE(r.status == LpStatus::Optimal);
  CHECK(r.objective == doctest::Approx(12.0));
  CHECK(r.x[0] == doctest::Approx(4.0));
}

TEST_CASE("simplex detects infeasibility and handles equalities") {
  std::vector<LpConstraint> rows(2);
  rows[0].coeffs = {1.0};
  rows[0].type = '>';
  rows[0].rhs = 3.0;
  rows[1].coeffs = {1.0};
  rows[1].type = '<';
  rows[1].rhs = 1.0;
  CHECK(solve_lp({1.0}, rows).status == LpStatus::Infeasible);

  std::vector<LpConstraint> eq(1);
  eq[0].coeffs = {2.0, 1.0};
  eq[0].type = '=';
  eq[0].rhs = 4.0;
  const LpResult r = solve_lp({0.0, 1.0}, eq);
  REQUIRE(r.status == LpStatus::Optimal);
  CHECK(r.objective == doctest::Approx(4.0));  // y = 4, x = 0
}

TEST_CASE("barrier method solves a weighted conjugate minimization") {
  // minimize 0.5 V(a) + 0.5 V(b) with a + b = 2 and a <= 1.5, V = -log - 1.
  // Unconstrained optimum a = b = 1 is interior, value -1.
  IpmProblem prob;
  prob.n = 2;
  prob.G.resize(1, 2);
  prob.G << 1.0, 0.0;
  prob.h.resize(1);
  prob.h << 1.5;
  prob.Aeq.resize(1, 2);
  prob.Aeq << 1.0, 1.0;
  prob.beq.resize(1);
  prob.beq << 2.0;
  prob.terms = {{0, 0.5}, {1, 0.5}};
  prob.utility = Utility::log_utility();

  Eigen::VectorXd v0(2);
  v0 << 0.9, 1.1;
  const IpmResult r = solve_ipm(prob, v0);
  REQUIRE(r.converged);
  CHECK(std::abs(r.v[0] - 1.0) < 1e-7);
  CHECK(std::abs(r.value - (-1.0)) < 1e-9);

  // Now force the constraint to bind: a <= 0.6 -> a = 0.6, b = 1.4.
  prob.h << 0.6;
  v0 << 0.5, 1.5;
  const IpmResult r2 = solve_ipm(prob, v0);
  REQUIRE(r2.converged);
  CHECK(std::abs(r2.v[0] - 0.6) < 1e-6);
  CHECK(std::abs(r2.value - (0.5 * (-std::log(0.6) - 1.0) + 0.5 * (-std::log(1.4) - 1.0))) <
        1e-8);
}

TEST_CASE("deterministic rng is stable across runs") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
  Rng c(1);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double u = c.uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  CHECK(lo < 0.05);
  CHECK(hi > 0.95);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "bidask/dual_solver.hpp"
#include "bidask/portfolio.hpp"
#include "test_util.hpp"

using namespace bidask;

TEST_CASE("liquidation value") {
  CHECK(liquidation_value(3.5, 0.0, 17.0, 0.3) == 3.5);
  // long position at ask 1 + 1/n after the worked first-period purchase
  const double lambda = 0.2, n = 10.0;
  const double v = liquidation_value(1.0 - 2.0 / (1.0 + lambda), 1.0 / (1.0 + lambda),
                                     1.0 + 1.0 / n, lambda);
  CHECK(v == doctest::Approx(0.066667).epsilon(1e-4));
  CHECK(v > 0.0);
  // short position pays the ask to cover
  CHECK(liquidation_value(10.0, -2.0, 4.0, 0.5) == doctest::Approx(2.0));
}

TEST_CASE("self-financing inequality and slack") {
  const MarketSpec m = testutil::one_period(0.25, 2.0, {{0.5, 3.0}, {0.5, 1.0}});
  Strategy st;
  st.initial_cash = 5.0;
  st.dphi0.assign(m.tree.size(), 0.0);
  st.dphi1.assign(m.tree.size(), 0.0);

  SUBCASE("no trade") {
    const SelfFinancingReport r = is_self_financing(st, m);
    CHECK(r.ok);
    CHECK(r.worst_slack == 0.0);
  }
  SUBCASE("buy one share at the ask, exact funding") {
    st.dphi1[0] = 1.0;
    st.dphi0[0] = -2.0;
    const SelfFinancingReport r = is_self_financing(st, m);
    CHECK(r.ok);
    CHECK(r.slack[0] == doctest::Approx(0.0));
  }
  SUBCASE("underfunded purchase is flagged with its slack") {
    st.dphi1[0] = 1.0;
    st.dphi0[0] = -1.9;
    const SelfFinancingReport r = is_self_financing(st, m);
    CHECK_FALSE(r.ok);
    CHECK(r.slack[0] == doctest::Approx(-0.1));
    CHECK(r.worst_node == 0);
  }
  SUBCASE("sales credit the bid price") {
    st.dphi1[0] = -1.0;
    st.dphi0[0] = 1.5;  // bid = 0.75 * 2
    CHECK(is_self_financing(st, m).ok);
    st.dphi0[0] = 1.6;
    CHECK_FALSE(is_self_financing(st, m).ok);
  }
}

TEST_CASE("admissibility requires liquidation and nonnegative terminal cash") {
  const MarketSpec m = testutil::one_period(0.25, 2.0, {{0.5, 3.0}, {0.5, 1.0}});
  Strategy st;
  st.initial_cash = 1.0;
  st.dphi0.assign(m.tree.size(), 0.0);
  st.dphi1.assign(m.tree.size(), 0.0);
  CHECK_FALSE(is_admissible(st, m, 2.0));  // wrong endowment
  CHECK(is_admissible(st, m, 1.0));

  // Buy 0.4 shares; liquidate at each leaf.
  st.dphi1[0] = 0.4;
  st.dphi0[0] = -0.8;
  for (int leaf : m.tree.leaves()) {
    st.dphi1[leaf] = -0.4;
    st.dphi0[leaf] = 0.4 * m.bid(leaf);
  }
  std::string why;
  CHECK(is_admissible(st, m, 1.0, &why));

  // Too large a position goes bankrupt in the low state: cash 1 - 2 d + 0.75 d < 0.
  Strategy big = st;
  big.dphi1[0] = 0.9;
  big.dphi0[0] = -1.8;
  for (int leaf : m.tree.leaves()) {
    big.dphi1[leaf] = -0.9;
    big.dphi0[leaf] = 0.9 * m.bid(leaf);
  }
  CHECK_FALSE(is_admissible(big, m, 1.0, &why));
  CHECK(why.find("negative terminal cash") != std::string::npos);
}

TEST_CASE("admissible at lambda stays self-financing for any smaller lambda") {
  Rng rng(3);
  for (int k = 0; k < 25; ++k) {
    MarketSpec m = testutil::random_market(rng, 0.3, 2);
    const SolvencyCones cones = compute_solvency_cones(m);
    Strategy st = sample_admissible_strategy(m, cones, 1.0, rng);
    REQUIRE(is_self_financing(st, m).ok);
    MarketSpec easier = m;
    easier.lambda = m.lambda * rng.uniform(0.0, 0.99);
    CHECK(is_self_financing(st, easier).ok);
  }
}

TEST_CASE("utility families: values, marginals, conjugates") {
  const Utility lg = Utility::log_utility();
  CHECK(lg.value(1.0) == 0.0);
  CHECK(lg.marginal(1.0) == 1.0);
  CHECK(lg.conjugate(1.0) == doctest::Approx(-1.0));
  CHECK(lg.conjugate(2.0) == doctest::Approx(-std::log(2.0) - 1.0).epsilon(1e-14));

  for (const Utility& u : {lg, Utility::power_utility(0.5), Utility::power_utility(-1.0)}) {
    for (double y : {0.25, 0.7, 1.0, 1.9, 6.0}) {
      // conjugate identities
      const double xs = u.inverse_marginal(y);
      CHECK(u.conjugate_prime(y) == doctest::Approx(-xs).epsilon(1e-12));
      CHECK(u.value(xs) - xs * y == doctest::Approx(u.conjugate(y)).epsilon(1e-12));
      CHECK(u.marginal(u.inverse_marginal(y)) == doctest::Approx(y).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(lg.value(0.0), std::domain_error);
  CHECK_THROWS_AS(lg.marginal(-1.0), std::domain_error);
  CHECK_THROWS_AS((void)Utility::power_utility(1.5), std::invalid_argument);
}

TEST_CASE("conjugate of power utility matches a brute-force sup over x") {
  const Utility u = Utility::power_utility(0.5);
  for (double y : {0.4, 1.0, 2.5}) {
    double best = -1e100;
    for (double x = 1e-4; x < 400.0; x *= 1.0005)
      best = std::max(best, u.value(x) - x * y);
    CHECK(u.conjugate(y) == doctest::Approx(best).epsilon(1e-6));
  }
}

TEST_CASE("Fenchel inequality on a random grid with equality at y = U'(x)") {
  Rng rng(5);
  for (const Utility& u : {Utility::log_utility(), Utility::power_utility(0.5)}) {
    for (int k = 0; k < 200; ++k) {
      const double x = rng.uniform(0.05, 5.0);
      const double y = rng.uniform(0.05, 5.0);
      CHECK(u.value(x) <= u.conjugate(y) + x * y + 1e-12);
    }
    const double x = 1.7;
    const double y = u.marginal(x);
    CHECK(u.value(x) == doctest::Approx(u.conjugate(y) + x * y).epsilon(1e-12));
  }
}

TEST_CASE("frictionless wealth telescopes and matches holdings at lambda = 0") {
  // buy-and-hold one share, price path 2 -> 3 or 2 -> 1.
  const MarketSpec m = testutil::one_period(0.0, 2.0, {{0.5, 3.0}, {0.5, 1.0}});
  Strategy st;
  st.initial_cash = 5.0;
  st.dphi0.assign(m.tree.size(), 0.0);
  st.dphi1.assign(m.tree.size(), 0.0);
  st.dphi1[0] = 1.0;
  st.dphi0[0] = -2.0;
  std::vector<double> price(m.tree.size());
  for (int i = 0; i < m.tree.size(); ++i) price[i] = m.ask(i);
  const std::vector<double> w = frictionless_wealth(m.tree, st, price, 5.0);
  CHECK(w[0] == 5.0);
  CHECK(w[m.tree.index_of("c0")] == doctest::Approx(6.0));
  CHECK(w[m.tree.index_of("c1")] == doctest::Approx(4.0));

  // equality self-financing at lambda = 0 reproduces phi0 + phi1 S nodewise
  const Holdings h = accumulate(m.tree, st);
  for (int i = 0; i < m.tree.size(); ++i) {
    const int par = m.tree.parent(i);
    const double pre0 = par < 0 ? 5.0 : h.phi0[par];
    const double pre1 = par < 0 ? 0.0 : h.phi1[par];
    CHECK(std::abs(w[i] - (pre0 + pre1 * price[i])) < 1e-10);
  }
}

TEST_CASE("solvency cones on the one-period market reduce to bid/ask intervals") {
  const MarketSpec m = testutil::one_period(0.2, 2.0, {{0.5, 3.0}, {0.5, 1.0}});
  const SolvencyCones cones = compute_solvency_cones(m);
  const int c0 = m.tree.index_of("c0"), c1 = m.tree.index_of("c1");
  CHECK(cones.a[c0] == doctest::Approx(2.4));
  CHECK(cones.b[c0] == doctest::Approx(3.0));
  CHECK(cones.A[0] == doctest::Approx(0.8));   // min child bid
  CHECK(cones.B[0] == doctest::Approx(3.0));   // max child ask
  CHECK(cones.a[0] == doctest::Approx(1.6));   // clipped by own bid
  CHECK(cones.b[0] == doctest::Approx(2.0));   // clipped by own ask

  // Feasible trades from (1, 0): buy cap d (2 - 0.8) <= 1, sell cap d (2*0.8... )
  const TradeInterval iv = feasible_trades(m, cones, 0, 1.0, 0.0);
  REQUIRE_FALSE(iv.empty);
  CHECK(iv.hi == doctest::Approx(1.0 / (2.0 - 0.8)));
  CHECK(iv.lo == doctest::Approx(-1.0 / (3.0 - 1.6)));
}

TEST_CASE("strategy JSON round trip") {
  const MarketSpec m = testutil::one_period(0.2, 2.0, {{0.5, 3.0}, {0.5, 1.0}});
  Strategy st;
  st.initial_cash = 1.0;
  st.dphi0 = {-0.5, 0.1, 0.2};
  st.dphi1 = {0.25, -0.25, -0.25};
  const std::string j = strategy_to_json(st, m.tree);
  const Strategy back = strategy_from_json(j, m.tree);
  CHECK(back.initial_cash == st.initial_cash);
  for (int i = 0; i < 3; ++i) {
    CHECK(back.dphi0[i] == st.dphi0[i]);
    CHECK(back.dphi1[i] == st.dphi1[i]);
  }
  CHECK_THROWS(strategy_from_json(R"({"initial_cash":1,"trades":[],"oops":1})", m.tree));
}

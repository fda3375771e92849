#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "bidask/event_tree.hpp"
#include "test_util.hpp"

using namespace bidask;

TEST_CASE("single-node tree is rejected: horizon must be >= 1") {
  std::vector<Node> nodes{testutil::node("root", -1, 1.0, 1.0)};
  const ValidationResult r = validate_nodes(nodes);
  CHECK_FALSE(r.ok);
  CHECK(r.error.find("horizon") != std::string::npos);
}

TEST_CASE("symmetric two-period binomial is accepted") {
  const MarketSpec m = testutil::binomial(0.1, 1.0, 1.2, 0.5);
  CHECK(validate(m.tree).ok);
  CHECK(m.tree.horizon() == 2);
  CHECK(m.tree.leaves().size() == 4);
}

TEST_CASE("child probabilities must sum to one") {
  std::vector<Node> nodes{testutil::node("root", -1, 1.0, 1.0),
                          testutil::node("a", 0, 0.6, 2.0), testutil::node("b", 0, 0.6, 0.5)};
  const ValidationResult r = validate_nodes(nodes);
  CHECK_FALSE(r.ok);
  CHECK(r.error.find("sum") != std::string::npos);
}

TEST_CASE("nonpositive prices, dangling parents and wrong-depth leaves are rejected") {
  {
    std::vector<Node> nodes{testutil::node("root", -1, 1.0, 1.0),
                            testutil::node("a", 0, 1.0, -2.0)};
    CHECK_FALSE(validate_nodes(nodes).ok);
  }
  {
    std::vector<Node> nodes{testutil::node("root", -1, 1.0, 1.0),
                            testutil::node("a", 7, 1.0, 2.0)};
    CHECK_FALSE(validate_nodes(nodes).ok);
  }
  {
    // one branch stops at t=1 while the other reaches t=2
    std::vector<Node> nodes{testutil::node("root", -1, 1.0, 1.0),
                            testutil::node("a", 0, 0.5, 2.0), testutil::node("b", 0, 0.5, 0.5),
                            testutil::node("aa", 1, 1.0, 2.0)};
    const ValidationResult r = validate_nodes(nodes);
    CHECK_FALSE(r.ok);
    CHECK(r.error.find("leaf") != std::string::npos);
  }
  {
    // zero-probability branch
    std::vector<Node> nodes{testutil::node("root", -1, 1.0, 1.0),
                            testutil::node("a", 0, 1.0, 2.0), testutil::node("b", 0, 0.0, 0.5)};
    CHECK_FALSE(validate_nodes(nodes).ok);
  }
}

TEST_CASE("unconditional probabilities multiply along the path and sum to one per level") {
  const MarketSpec m = testutil::one_period(0.1, 1.0, {{0.9, 2.0}, {0.1, 0.5}});
  CHECK(unconditional_prob(m.tree, m.tree.root()) == 1.0);

  std::vector<Node> nodes{testutil::node("root", -1, 1.0, 1.0),
                          testutil::node("a", 0, 0.9, 2.0), testutil::node("b", 0, 0.1, 0.5),
                          testutil::node("aa", 1, 0.5, 2.0), testutil::node("ab", 1, 0.5, 1.0),
                          testutil::node("ba", 2, 1.0, 0.5)};
  std::string err;
  const EventTree tree = EventTree::build(nodes, &err);
  REQUIRE_FALSE(tree.empty());
  CHECK(unconditional_prob(tree, tree.index_of("aa")) == doctest::Approx(0.45).epsilon(1e-14));

  Rng rng(7);
  for (int k = 0; k < 20; ++k) {
    const MarketSpec rm = testutil::random_market(rng, 0.2, 3);
    REQUIRE(validate(rm.tree).ok);
    for (int t = 0; t <= rm.tree.horizon(); ++t) {
      double sum = 0.0;
      for (int u : rm.tree.nodes_at(t)) sum += rm.tree.uncond_prob(u);
      CHECK(std::abs(sum - 1.0) < 1e-10);
    }
  }
}

TEST_CASE("conditional expectation: constants, averages, linearity, monotonicity") {
  const MarketSpec m = testutil::one_period(0.1, 1.0, {{0.5, 2.0}, {0.5, 0.5}});
  std::vector<double> values(m.tree.size(), 3.25);
  CHECK(conditional_expectation(m.tree, values, 0) == doctest::Approx(3.25));

  values[m.tree.index_of("c0")] = 2.0;
  values[m.tree.index_of("c1")] = 0.0;
  CHECK(conditional_expectation(m.tree, values, 0) == doctest::Approx(1.0));

  Rng rng(11);
  const MarketSpec rm = testutil::random_market(rng, 0.2, 2);
  std::vector<double> a(rm.tree.size()), b(rm.tree.size());
  for (int i = 0; i < rm.tree.size(); ++i) {
    a[i] = rng.uniform(-1.0, 1.0);
    b[i] = a[i] + rng.uniform(0.0, 1.0);  // b >= a
  }
  for (int u = 0; u < rm.tree.size(); ++u) {
    if (rm.tree.is_leaf(u)) continue;
    const double ea = conditional_expectation(rm.tree, a, u);
    const double eb = conditional_expectation(rm.tree, b, u);
    CHECK(eb >= ea - 1e-12);  // monotone
    std::vector<double> combo(rm.tree.size());
    for (int i = 0; i < rm.tree.size(); ++i) combo[i] = 2.0 * a[i] - 0.5 * b[i];
    CHECK(conditional_expectation(rm.tree, combo, u) ==
          doctest::Approx(2.0 * ea - 0.5 * eb).epsilon(1e-12));
  }
}

TEST_CASE("one-step martingale measure reprices the parent") {
  // children asks 2 and 0.5 around parent 1: q solves 2q + 0.5(1-q) = 1.
  const double q = (1.0 - 0.5) / (2.0 - 0.5);
  const MarketSpec m = testutil::one_period(0.0, 1.0, {{q, 2.0}, {1.0 - q, 0.5}});
  std::vector<double> values(m.tree.size());
  for (int i = 0; i < m.tree.size(); ++i) values[i] = m.tree.ask(i);
  CHECK(std::abs(conditional_expectation(m.tree, values, 0) - 1.0) < 1e-10);
}

TEST_CASE("market JSON round trip is idempotent and strict") {
  const MarketSpec m = testutil::binomial(0.25, 2.0, 1.3, 0.4);
  const std::string once = market_to_json(m);
  const MarketSpec m2 = market_from_json(once);
  CHECK(market_to_json(m2) == once);
  CHECK(m2.lambda == m.lambda);
  CHECK(m2.tree.size() == m.tree.size());

  CHECK_THROWS(market_from_json(R"({"lambda":0.1,"horizon":1,"nodes":[],"extra":1})"));
  CHECK_THROWS(market_from_json(
      R"({"lambda":0.1,"horizon":1,"nodes":[{"id":"r","parent":null,"prob":1.0,"ask":1.0,"bonus":2}]})"));
  CHECK_THROWS(market_from_json(R"({"lambda":1.2,"horizon":1,"nodes":[]})"));
}

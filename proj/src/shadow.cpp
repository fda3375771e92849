#include "bidask/shadow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bidask {

ShadowCandidate candidate_from_dual(const MarketSpec& market, const Deflator& deflator,
                                    double tol) {
  if (!deflator.matches(market.tree))
    throw std::invalid_argument("deflator shape does not match the tree");
  ShadowCandidate cand;
  cand.source = "dual minimizer ratio";
  cand.price.resize(market.tree.size());
  cand.in_spread = true;
  for (int u = 0; u < market.tree.size(); ++u) {
    if (!(deflator.y0[u] > 0.0)) {
      cand.in_spread = false;
      cand.spread_violation = std::numeric_limits<double>::infinity();
      cand.source += " (Y0 vanishes at node '" + market.tree.node(u).id + "')";
      cand.price[u] = market.ask(u);
      continue;
    }
    double r = deflator.y1[u] / deflator.y0[u];
    const double lo = market.bid(u), hi = market.ask(u);
    const double excess = std::max(lo - r, r - hi) / hi;
    cand.spread_violation = std::max(cand.spread_violation, excess);
    if (excess > tol) cand.in_spread = false;
    // Solver round-off can leave the ratio a hair outside; keep the price
    // process inside the spread it is certified against.
    cand.price[u] = std::clamp(r, lo, hi);
  }
  return cand;
}

ArbitrageVerdict frictionless_arbitrage_check(const EventTree& tree,
                                              const std::vector<double>& price) {
  ArbitrageVerdict v;
  v.arbitrage_free = true;
  for (int u = 0; u < tree.size(); ++u) {
    if (tree.is_leaf(u)) continue;
    if (!one_step_price_ok(tree, price, u)) {
      v.arbitrage_free = false;
      v.bad_node = u;
      return v;
    }
  }
  return v;
}

ShadowVerdict verify_shadow(const MarketSpec& market, const Utility& utility, double x,
                            const ShadowCandidate& candidate, const Deflator* source,
                            double value_tol, double align_tol) {
  const EventTree& tree = market.tree;
  ShadowVerdict verdict;
  verdict.candidate = candidate;

  const ArbitrageVerdict arb = frictionless_arbitrage_check(tree, candidate.price);
  verdict.candidate_arbitrage_free = arb.arbitrage_free;

  SolveOptions opts;
  verdict.frictional_value = solve_frictional(market, utility, x, opts).value;

  if (!arb.arbitrage_free) {
    verdict.exists = false;
    verdict.note = "candidate price admits arbitrage at node '" +
                   tree.node(arb.bad_node).id + "'; frictionless problem unsolvable";
    return verdict;
  }

  const Solution fl = solve_frictionless(tree, candidate.price, utility, x, opts);
  verdict.frictionless_value = fl.value;
  verdict.margin = fl.value - verdict.frictional_value;
  verdict.values_match =
      std::abs(verdict.margin) <= value_tol * std::max(1.0, std::abs(verdict.frictional_value));

  // The frictionless optimizer must trade only at bid-ask prices.
  verdict.alignment.ok = true;
  for (int u = 0; u < tree.size(); ++u) {
    const double d = fl.strategy.dphi1[u];
    double miss = 0.0;
    if (d > 1e-9)
      miss = std::abs(candidate.price[u] - market.ask(u)) / market.ask(u);
    else if (d < -1e-9)
      miss = std::abs(candidate.price[u] - market.bid(u)) / market.ask(u);
    if (miss > verdict.alignment.worst) {
      verdict.alignment.worst = miss;
      verdict.alignment.node = u;
      verdict.alignment.what = d > 0 ? "buy off the ask" : "sell off the bid";
    }
  }
  verdict.alignment.ok = verdict.alignment.worst <= align_tol;
  verdict.alignment_ok = verdict.alignment.ok;

  if (source != nullptr) {
    verdict.martingale_y0 = is_martingale(tree, source->y0);
    verdict.martingale_y1 = is_martingale(tree, source->y1);
  }

  verdict.exists = verdict.values_match && verdict.alignment_ok && candidate.in_spread;
  if (!verdict.exists && verdict.margin > 0.0 && !verdict.values_match)
    verdict.note = "frictionless candidate market strictly outperforms the frictional one";
  return verdict;
}

std::vector<double> frictionless_dual_deflator(const EventTree& tree,
                                               const std::vector<double>& price,
                                               const Utility& utility,
                                               const Solution& frictionless) {
  const Holdings h = accumulate(tree, frictionless.strategy);
  std::vector<double> y(tree.size(), 0.0);
  for (int u = tree.size() - 1; u >= 0; --u) {
    if (tree.is_leaf(u)) {
      y[u] = utility.marginal(std::max(h.phi0[u], 1e-300));
      continue;
    }
    double e = 0.0;
    for (int c : tree.children(u)) e += tree.cond_prob(c) * y[c];
    y[u] = e;
  }
  (void)price;
  return y;
}

}  // namespace bidask

// Shared helpers for the test suites: small hand-built trees, a seeded
// random market generator, and brute-force oracles kept independent of the
// solver code paths they check.
#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "bidask/event_tree.hpp"
#include "bidask/optim.hpp"
#include "bidask/portfolio.hpp"

namespace testutil {

using bidask::EventTree;
using bidask::MarketSpec;
using bidask::Node;
using bidask::Rng;

inline Node node(const std::string& id, int parent, double prob, double ask) {
  Node n;
  n.id = id;
  n.parent = parent;
  n.cond_prob = prob;
  n.ask = ask;
  return n;
}

// One-period market: root ask s0, children (prob_i, ask_i).
inline MarketSpec one_period(double lambda, double s0,
                             const std::vector<std::pair<double, double>>& kids) {
  std::vector<Node> nodes{node("root", -1, 1.0, s0)};
  for (size_t i = 0; i < kids.size(); ++i)
    nodes.push_back(node("c" + std::to_string(i), 0, kids[i].first, kids[i].second));
  MarketSpec m;
  std::string err;
  m.tree = EventTree::build(nodes, &err);
  m.lambda = lambda;
  return m;
}

// Symmetric two-period binomial with multiplicative moves u and d = 1/u and
// probabilities chosen so the ask is a martingale when requested.
inline MarketSpec binomial(double lambda, double s0, double up, double p_up, int periods = 2) {
  std::vector<Node> nodes{node("root", -1, 1.0, s0)};
  std::vector<int> frontier{0};
  std::vector<double> price{s0};
  int counter = 0;
  for (int t = 0; t < periods; ++t) {
    std::vector<int> next;
    std::vector<double> next_price;
    for (size_t i = 0; i < frontier.size(); ++i) {
      const double s = price[i];
      nodes.push_back(node("n" + std::to_string(counter++), frontier[i], p_up, s * up));
      next.push_back(static_cast<int>(nodes.size()) - 1);
      next_price.push_back(s * up);
      nodes.push_back(node("n" + std::to_string(counter++), frontier[i], 1.0 - p_up, s / up));
      next.push_back(static_cast<int>(nodes.size()) - 1);
      next_price.push_back(s / up);
    }
    frontier = next;
    price = next_price;
  }
  MarketSpec m;
  std::string err;
  m.tree = EventTree::build(nodes, &err);
  m.lambda = lambda;
  return m;
}

// Random market with a consistent price system built in: a strictly positive
// martingale ratio process R with both-signed one-step moves, and the ask
// chosen so R sits strictly inside the bid-ask spread. The asks themselves
// are then in-spread perturbations of a martingale.
inline MarketSpec random_market(Rng& rng, double lambda, int horizon, int max_branching = 3) {
  std::vector<Node> nodes{node("root", -1, 1.0, 0.0)};
  std::vector<double> ratio{rng.uniform(1.0, 2.0)};  // per node index
  std::vector<int> frontier{0};
  int counter = 0;
  for (int t = 0; t < horizon; ++t) {
    std::vector<int> next;
    for (int u : frontier) {
      const int k = 2 + rng.uniform_int(max_branching - 1);
      std::vector<double> probs(k), moves(k);
      double psum = 0.0;
      for (int i = 0; i < k; ++i) psum += (probs[i] = rng.uniform(0.2, 1.0));
      for (int i = 0; i < k; ++i) probs[i] /= psum;
      // Martingale moves with both signs: perturb around 1, then recentre.
      double mean = 0.0;
      for (int i = 0; i < k; ++i) mean += probs[i] * (moves[i] = rng.uniform(0.7, 1.4));
      for (int i = 0; i < k; ++i) moves[i] /= mean;
      bool up = false, down = false;
      for (int i = 0; i < k; ++i) {
        up = up || moves[i] > 1.0 + 1e-9;
        down = down || moves[i] < 1.0 - 1e-9;
      }
      if (!up || !down) {  // degenerate draw: force a genuine move
        moves[0] *= 1.08;
        moves[k - 1] *= 0.92;
        double m2 = 0.0;
        for (int i = 0; i < k; ++i) m2 += probs[i] * moves[i];
        for (int i = 0; i < k; ++i) moves[i] /= m2;
      }
      for (int i = 0; i < k; ++i) {
        nodes.push_back(node("n" + std::to_string(counter++), u, probs[i], 1.0));
        next.push_back(static_cast<int>(nodes.size()) - 1);
        ratio.push_back(ratio[u] * moves[i]);
      }
    }
    frontier = next;
  }
  // gamma = R / ask strictly inside (1 - lambda, 1).
  for (size_t i = 0; i < nodes.size(); ++i) {
    const double gamma = 1.0 - lambda * rng.uniform(0.2, 0.8);
    nodes[i].ask = ratio[i] / gamma;
  }
  MarketSpec m;
  std::string err;
  m.tree = EventTree::build(nodes, &err);
  m.lambda = lambda;
  return m;
}

}  // namespace testutil

#pragma once

#include <string>
#include <vector>

namespace bidask {

// One node of a finite event tree. `cond_prob` is the transition probability
// conditional on the parent; the root carries cond_prob == 1 and parent == -1.
struct Node {
  std::string id;
  int parent = -1;
  double cond_prob = 1.0;
  double ask = 0.0;  // ask price of the risky asset at this node, > 0
  int time = 0;
  std::vector<int> children;
};

struct ValidationResult {
  bool ok = true;
  std::string error;  // first violated invariant when !ok
  explicit operator bool() const { return ok; }
};

// Finite filtered probability space with an adapted ask-price process.
// Nodes are stored in parent-before-child (BFS) order, so a single forward
// or backward sweep respects the filtration. Immutable after construction.
class EventTree {
 public:
  static constexpr double kProbSumTol = 1e-12;

  EventTree() = default;

  // Assembles and validates a tree from an arbitrary node list. On failure
  // returns an empty tree and stores the first violated invariant in *error.
  static EventTree build(const std::vector<Node>& nodes, std::string* error = nullptr);

  bool empty() const { return nodes_.empty(); }
  int size() const { return static_cast<int>(nodes_.size()); }
  int root() const { return 0; }
  int horizon() const { return horizon_; }

  const Node& node(int i) const { return nodes_[i]; }
  const std::vector<Node>& nodes() const { return nodes_; }
  int parent(int i) const { return nodes_[i].parent; }
  int time(int i) const { return nodes_[i].time; }
  double ask(int i) const { return nodes_[i].ask; }
  double cond_prob(int i) const { return nodes_[i].cond_prob; }
  const std::vector<int>& children(int i) const { return nodes_[i].children; }
  bool is_leaf(int i) const { return nodes_[i].children.empty(); }

  double uncond_prob(int i) const { return uncond_prob_[i]; }
  const std::vector<int>& leaves() const { return leaves_; }
  const std::vector<int>& nodes_at(int t) const { return by_time_[t]; }

  // Index lookup by id, -1 if unknown.
  int index_of(const std::string& id) const;

 private:
  std::vector<Node> nodes_;
  std::vector<double> uncond_prob_;
  std::vector<int> leaves_;
  std::vector<std::vector<int>> by_time_;
  int horizon_ = 0;
};

// Checks every tree invariant on a raw node list and reports the first
// violation: unique ids, single root, acyclic links, child probabilities
// summing to one, strictly positive probabilities and prices, all leaves at
// the same depth, horizon >= 1.
ValidationResult validate_nodes(const std::vector<Node>& nodes);

// Re-checks the invariants of an assembled tree.
ValidationResult validate(const EventTree& tree);

// Product of conditional probabilities along the root path.
double unconditional_prob(const EventTree& tree, int node);

// E[values | node]: sum of cond_prob(child) * values[child] over the
// children of `node`. `values` must be finite on every child.
double conditional_expectation(const EventTree& tree, const std::vector<double>& values,
                               int node);

// Market with proportional transaction costs: ask S, bid (1-lambda) S.
struct MarketSpec {
  EventTree tree;
  double lambda = 0.0;  // in [0,1); 0 means frictionless

  double ask(int i) const { return tree.ask(i); }
  double bid(int i) const { return (1.0 - lambda) * tree.ask(i); }
};

// Strict JSON schema:
//   {"lambda": float, "horizon": int,
//    "nodes": [{"id": str, "parent": str|null, "prob": float, "ask": float}]}
// Unknown fields are rejected. Throws std::runtime_error on any violation.
MarketSpec market_from_json(const std::string& text);
std::string market_to_json(const MarketSpec& market, int indent = 2);

}  // namespace bidask

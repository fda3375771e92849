#include "bidask/event_tree.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"

namespace bidask {

namespace {

std::string fmt(const char* what, const std::string& id) {
  std::ostringstream os;
  os << what << " (node '" << id << "')";
  return os.str();
}

}  // namespace

ValidationResult validate_nodes(const std::vector<Node>& nodes) {
  if (nodes.empty()) return {false, "tree has no nodes"};

  std::unordered_map<std::string, int> index;
  for (int i = 0; i < static_cast<int>(nodes.size()); ++i) {
    if (nodes[i].id.empty()) return {false, "empty node id"};
    if (!index.emplace(nodes[i].id, i).second)
      return {false, fmt("duplicate node id", nodes[i].id)};
  }

  int root = -1;
  for (int i = 0; i < static_cast<int>(nodes.size()); ++i) {
    const Node& n = nodes[i];
    if (n.parent < 0) {
      if (root >= 0) return {false, "multiple roots"};
      root = i;
      if (std::abs(n.cond_prob - 1.0) > EventTree::kProbSumTol)
        return {false, "root must have conditional probability 1"};
    } else if (n.parent >= static_cast<int>(nodes.size()) || n.parent == i) {
      return {false, fmt("dangling parent reference", n.id)};
    }
    if (!(n.cond_prob > 0.0) || n.cond_prob > 1.0 + EventTree::kProbSumTol)
      return {false, fmt("conditional probability outside (0,1]", n.id)};
    if (!(n.ask > 0.0) || !std::isfinite(n.ask))
      return {false, fmt("nonpositive ask price", n.id)};
  }
  if (root < 0) return {false, "no root node"};

  // Depth of every node; also detects cycles.
  std::vector<int> depth(nodes.size(), -1);
  depth[root] = 0;
  for (int i = 0; i < static_cast<int>(nodes.size()); ++i) {
    if (depth[i] >= 0) continue;
    std::vector<int> chain;
    int j = i;
    while (j >= 0 && depth[j] < 0) {
      chain.push_back(j);
      j = nodes[j].parent;
      if (static_cast<int>(chain.size()) > static_cast<int>(nodes.size()))
        return {false, "cycle in parent links"};
    }
    if (j < 0) return {false, fmt("node not connected to the root", nodes[i].id)};
    int d = depth[j];
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) depth[*it] = ++d;
  }

  // Child probability sums and leaf depths.
  std::vector<std::vector<int>> children(nodes.size());
  for (int i = 0; i < static_cast<int>(nodes.size()); ++i)
    if (nodes[i].parent >= 0) children[nodes[i].parent].push_back(i);

  int horizon = 0;
  for (int i = 0; i < static_cast<int>(nodes.size()); ++i) horizon = std::max(horizon, depth[i]);
  if (horizon < 1) return {false, "horizon must be >= 1"};

  for (int i = 0; i < static_cast<int>(nodes.size()); ++i) {
    if (children[i].empty()) {
      if (depth[i] != horizon) return {false, fmt("leaf before the horizon", nodes[i].id)};
      continue;
    }
    double sum = 0.0;
    for (int c : children[i]) sum += nodes[c].cond_prob;
    if (std::abs(sum - 1.0) > EventTree::kProbSumTol)
      return {false, fmt("child probabilities do not sum to 1", nodes[i].id)};
  }
  return {};
}

EventTree EventTree::build(const std::vector<Node>& raw, std::string* error) {
  ValidationResult vr = validate_nodes(raw);
  if (!vr) {
    if (error) *error = vr.error;
    return {};
  }

  // Re-index into BFS order (parents before children, input order preserved
  // among siblings).
  int root = -1;
  std::vector<std::vector<int>> children(raw.size());
  for (int i = 0; i < static_cast<int>(raw.size()); ++i) {
    if (raw[i].parent < 0)
      root = i;
    else
      children[raw[i].parent].push_back(i);
  }

  EventTree tree;
  std::vector<int> order;
  order.reserve(raw.size());
  order.push_back(root);
  for (size_t k = 0; k < order.size(); ++k)
    for (int c : children[order[k]]) order.push_back(c);

  std::vector<int> new_index(raw.size(), -1);
  for (int k = 0; k < static_cast<int>(order.size()); ++k) new_index[order[k]] = k;

  tree.nodes_.resize(raw.size());
  for (int k = 0; k < static_cast<int>(order.size()); ++k) {
    const Node& src = raw[order[k]];
    Node& dst = tree.nodes_[k];
    dst.id = src.id;
    dst.cond_prob = src.cond_prob;
    dst.ask = src.ask;
    dst.parent = src.parent < 0 ? -1 : new_index[src.parent];
    dst.time = dst.parent < 0 ? 0 : tree.nodes_[dst.parent].time + 1;
    if (dst.parent >= 0) tree.nodes_[dst.parent].children.push_back(k);
  }

  tree.uncond_prob_.resize(raw.size());
  for (int k = 0; k < static_cast<int>(raw.size()); ++k) {
    const Node& n = tree.nodes_[k];
    tree.uncond_prob_[k] = n.parent < 0 ? 1.0 : tree.uncond_prob_[n.parent] * n.cond_prob;
    tree.horizon_ = std::max(tree.horizon_, n.time);
  }
  tree.by_time_.resize(tree.horizon_ + 1);
  for (int k = 0; k < static_cast<int>(raw.size()); ++k) {
    tree.by_time_[tree.nodes_[k].time].push_back(k);
    if (tree.nodes_[k].children.empty()) tree.leaves_.push_back(k);
  }
  return tree;
}

int EventTree::index_of(const std::string& id) const {
  for (int i = 0; i < size(); ++i)
    if (nodes_[i].id == id) return i;
  return -1;
}

ValidationResult validate(const EventTree& tree) {
  if (tree.empty()) return {false, "tree has no nodes"};
  return validate_nodes(tree.nodes());
}

double unconditional_prob(const EventTree& tree, int node) {
  if (node < 0 || node >= tree.size()) throw std::invalid_argument("unknown node index");
  return tree.uncond_prob(node);
}

double conditional_expectation(const EventTree& tree, const std::vector<double>& values,
                               int node) {
  if (node < 0 || node >= tree.size()) throw std::invalid_argument("unknown node index");
  if (static_cast<int>(values.size()) != tree.size())
    throw std::invalid_argument("value vector does not match the tree");
  double sum = 0.0;
  for (int c : tree.children(node)) {
    if (!std::isfinite(values[c])) throw std::invalid_argument("missing child value");
    sum += tree.cond_prob(c) * values[c];
  }
  return sum;
}

namespace {

using nlohmann::json;

void require_keys(const json& j, std::initializer_list<const char*> keys, const char* where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys)
      if (it.key() == k) known = true;
    if (!known)
      throw std::runtime_error(std::string("unknown field '") + it.key() + "' in " + where);
  }
  for (const char* k : keys)
    if (!j.contains(k))
      throw std::runtime_error(std::string("missing field '") + k + "' in " + where);
}

}  // namespace

MarketSpec market_from_json(const std::string& text) {
  json j = json::parse(text);
  if (!j.is_object()) throw std::runtime_error("market JSON must be an object");
  require_keys(j, {"lambda", "horizon", "nodes"}, "market");
  MarketSpec market;
  if (!j["lambda"].is_number()) throw std::runtime_error("lambda must be a number");
  market.lambda = j["lambda"].get<double>();
  if (market.lambda < 0.0 || market.lambda >= 1.0)
    throw std::runtime_error("lambda must lie in [0,1)");
  if (!j["horizon"].is_number_integer()) throw std::runtime_error("horizon must be an integer");
  const int horizon = j["horizon"].get<int>();
  if (!j["nodes"].is_array()) throw std::runtime_error("nodes must be an array");

  std::vector<Node> nodes;
  std::unordered_map<std::string, int> index;
  for (const json& nj : j["nodes"]) {
    require_keys(nj, {"id", "parent", "prob", "ask"}, "node");
    Node n;
    n.id = nj["id"].get<std::string>();
    n.cond_prob = nj["prob"].get<double>();
    n.ask = nj["ask"].get<double>();
    index.emplace(n.id, static_cast<int>(nodes.size()));
    nodes.push_back(n);
  }
  for (size_t i = 0; i < nodes.size(); ++i) {
    const json& nj = j["nodes"][i];
    if (nj["parent"].is_null()) {
      nodes[i].parent = -1;
    } else {
      auto it = index.find(nj["parent"].get<std::string>());
      if (it == index.end())
        throw std::runtime_error("node '" + nodes[i].id + "' references an unknown parent");
      nodes[i].parent = it->second;
    }
  }

  std::string error;
  market.tree = EventTree::build(nodes, &error);
  if (market.tree.empty()) throw std::runtime_error("invalid market tree: " + error);
  if (market.tree.horizon() != horizon)
    throw std::runtime_error("declared horizon does not match the node depths");
  return market;
}

std::string market_to_json(const MarketSpec& market, int indent) {
  json j;
  j["lambda"] = market.lambda;
  j["horizon"] = market.tree.horizon();
  json nodes = json::array();
  for (int i = 0; i < market.tree.size(); ++i) {
    const Node& n = market.tree.node(i);
    json nj;
    nj["id"] = n.id;
    if (n.parent < 0)
      nj["parent"] = nullptr;
    else
      nj["parent"] = market.tree.node(n.parent).id;
    nj["prob"] = n.cond_prob;
    nj["ask"] = n.ask;
    nodes.push_back(nj);
  }
  j["nodes"] = nodes;
  return j.dump(indent);
}

}  // namespace bidask

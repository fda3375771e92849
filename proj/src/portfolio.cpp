#include "bidask/portfolio.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"

namespace bidask {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Utility Utility::power_utility(double p) {
  if (!(p < 1.0) || p == 0.0) throw std::invalid_argument("power utility needs p < 1, p != 0");
  return Utility(Kind::Power, p);
}

double Utility::value(double x) const {
  if (!(x > 0.0)) throw std::domain_error("utility argument must be positive");
  return kind_ == Kind::Log ? std::log(x) : std::pow(x, p_) / p_;
}

double Utility::value_or_neg_inf(double x) const {
  if (kind_ == Kind::Power && p_ > 0.0 && x == 0.0) return 0.0;  // U extends by continuity
  if (!(x > 0.0)) return -kInf;
  return kind_ == Kind::Log ? std::log(x) : std::pow(x, p_) / p_;
}

double Utility::marginal(double x) const {
  if (!(x > 0.0)) throw std::domain_error("utility argument must be positive");
  return kind_ == Kind::Log ? 1.0 / x : std::pow(x, p_ - 1.0);
}

double Utility::inverse_marginal(double y) const {
  if (!(y > 0.0)) throw std::domain_error("marginal utility must be positive");
  return kind_ == Kind::Log ? 1.0 / y : std::pow(y, 1.0 / (p_ - 1.0));
}

double Utility::conjugate(double y) const {
  if (!(y > 0.0)) throw std::domain_error("conjugate argument must be positive");
  if (kind_ == Kind::Log) return -std::log(y) - 1.0;
  const double q = p_ / (p_ - 1.0);
  return -std::pow(y, q) / q;
}

double Utility::conjugate_prime(double y) const { return -inverse_marginal(y); }

std::string Utility::name() const {
  if (kind_ == Kind::Log) return "log";
  std::ostringstream os;
  os << "power:" << p_;
  return os.str();
}

Utility Utility::from_name(const std::string& name) {
  if (name == "log") return log_utility();
  if (name.rfind("power:", 0) == 0) {
    const double p = std::stod(name.substr(6));
    return power_utility(p);
  }
  throw std::invalid_argument("unknown utility '" + name + "' (want log or power:<p>)");
}

double liquidation_value(double x, double y, double ask, double lambda) {
  const double pos = std::max(y, 0.0);
  const double neg = std::max(-y, 0.0);
  return x + pos * (1.0 - lambda) * ask - neg * ask;
}

Holdings accumulate(const EventTree& tree, const Strategy& strategy) {
  Holdings h;
  h.phi0.resize(tree.size());
  h.phi1.resize(tree.size());
  for (int i = 0; i < tree.size(); ++i) {
    const int p = tree.parent(i);
    const double base0 = p < 0 ? strategy.initial_cash : h.phi0[p];
    const double base1 = p < 0 ? 0.0 : h.phi1[p];
    h.phi0[i] = base0 + strategy.dphi0[i];
    h.phi1[i] = base1 + strategy.dphi1[i];
  }
  return h;
}

SelfFinancingReport is_self_financing(const Strategy& strategy, const MarketSpec& market,
                                      double tol) {
  if (!strategy.matches(market.tree))
    throw std::invalid_argument("strategy shape does not match the tree");
  SelfFinancingReport rep;
  rep.slack.resize(market.tree.size());
  for (int i = 0; i < market.tree.size(); ++i) {
    const double d1 = strategy.dphi1[i];
    const double cost = std::max(d1, 0.0) * market.ask(i) - std::max(-d1, 0.0) * market.bid(i);
    rep.slack[i] = -cost - strategy.dphi0[i];
    if (rep.worst_node < 0 || rep.slack[i] < rep.worst_slack) {
      rep.worst_node = i;
      rep.worst_slack = rep.slack[i];
    }
    if (rep.slack[i] < -tol) rep.ok = false;
  }
  return rep;
}

bool is_admissible(const Strategy& strategy, const MarketSpec& market, double x,
                   std::string* why, double tol) {
  if (!strategy.matches(market.tree))
    throw std::invalid_argument("strategy shape does not match the tree");
  if (std::abs(strategy.initial_cash - x) > tol) {
    if (why) *why = "initial endowment differs from x";
    return false;
  }
  const SelfFinancingReport sf = is_self_financing(strategy, market, tol);
  if (!sf.ok) {
    if (why) {
      std::ostringstream os;
      os << "self-financing violated at node '" << market.tree.node(sf.worst_node).id
         << "' (slack " << sf.worst_slack << ")";
      *why = os.str();
    }
    return false;
  }
  const Holdings h = accumulate(market.tree, strategy);
  for (int leaf : market.tree.leaves()) {
    if (std::abs(h.phi1[leaf]) > tol) {
      if (why) *why = "risky position not liquidated at leaf '" + market.tree.node(leaf).id + "'";
      return false;
    }
    if (h.phi0[leaf] < -tol) {
      if (why) *why = "negative terminal cash at leaf '" + market.tree.node(leaf).id + "'";
      return false;
    }
  }
  return true;
}

std::vector<double> frictionless_wealth(const EventTree& tree, const Strategy& strategy,
                                        const std::vector<double>& price, double x) {
  if (!strategy.matches(tree) || static_cast<int>(price.size()) != tree.size())
    throw std::invalid_argument("strategy/price shape does not match the tree");
  const Holdings h = accumulate(tree, strategy);
  std::vector<double> wealth(tree.size());
  for (int i = 0; i < tree.size(); ++i) {
    const int p = tree.parent(i);
    wealth[i] = p < 0 ? x : wealth[p] + h.phi1[p] * (price[i] - price[p]);
  }
  return wealth;
}

SolvencyCones compute_solvency_cones(const MarketSpec& market) {
  const EventTree& tree = market.tree;
  SolvencyCones cones;
  cones.a.resize(tree.size());
  cones.b.resize(tree.size());
  cones.A.resize(tree.size());
  cones.B.resize(tree.size());
  // Children precede nothing: nodes are in BFS order, so iterate backwards.
  for (int i = tree.size() - 1; i >= 0; --i) {
    if (tree.is_leaf(i)) {
      cones.a[i] = market.bid(i);
      cones.b[i] = market.ask(i);
      cones.A[i] = cones.a[i];
      cones.B[i] = cones.b[i];
      continue;
    }
    double lo = kInf, hi = -kInf;
    for (int c : tree.children(i)) {
      lo = std::min(lo, cones.a[c]);
      hi = std::max(hi, cones.b[c]);
    }
    cones.A[i] = lo;
    cones.B[i] = hi;
    cones.a[i] = std::max(lo, market.bid(i));
    cones.b[i] = std::min(hi, market.ask(i));
  }
  return cones;
}

namespace {

// Intersects {alpha + beta * d >= 0} with [lo, hi].
void clip(double alpha, double beta, double* lo, double* hi) {
  const double eps = 1e-15 * (std::abs(alpha) + std::abs(beta) + 1.0);
  if (std::abs(beta) <= eps) {
    if (alpha < -eps) *lo = kInf;  // empty
    return;
  }
  const double bound = -alpha / beta;
  if (beta > 0.0)
    *lo = std::max(*lo, bound);
  else
    *hi = std::min(*hi, bound);
}

}  // namespace

TradeInterval feasible_trades(const MarketSpec& market, const SolvencyCones& cones, int node,
                              double psi0, double psi1) {
  const double ask = market.ask(node);
  const double bid = market.bid(node);
  const double slopes[2] = {cones.A[node], cones.B[node]};

  // Buy region d >= 0: post = (psi0 - d ask, psi1 + d).
  double blo = 0.0, bhi = kInf;
  for (double c : slopes) clip(psi0 + c * psi1, c - ask, &blo, &bhi);
  const bool buy_ok = blo <= bhi;

  // Sell region d <= 0: post = (psi0 - d bid, psi1 + d).
  double slo = -kInf, shi = 0.0;
  for (double c : slopes) clip(psi0 + c * psi1, c - bid, &slo, &shi);
  const bool sell_ok = slo <= shi;

  TradeInterval iv;
  if (!buy_ok && !sell_ok) return iv;
  iv.empty = false;
  if (buy_ok && sell_ok) {
    iv.lo = slo;
    iv.hi = bhi;
  } else if (buy_ok) {
    iv.lo = blo;
    iv.hi = bhi;
  } else {
    iv.lo = slo;
    iv.hi = shi;
  }
  // Keep the line search on a finite bracket even in degenerate geometries.
  const double big = 1e12 * (std::abs(psi0) + std::abs(psi1) * ask + 1.0);
  iv.lo = std::max(iv.lo, -big);
  iv.hi = std::min(iv.hi, big);
  return iv;
}

namespace {
using nlohmann::json;
}

Strategy strategy_from_json(const std::string& text, const EventTree& tree) {
  json j = json::parse(text);
  for (auto it = j.begin(); it != j.end(); ++it)
    if (it.key() != "initial_cash" && it.key() != "trades")
      throw std::runtime_error("unknown field '" + it.key() + "' in strategy");
  Strategy s;
  s.initial_cash = j.at("initial_cash").get<double>();
  s.dphi0.assign(tree.size(), 0.0);
  s.dphi1.assign(tree.size(), 0.0);
  for (const json& tj : j.at("trades")) {
    for (auto it = tj.begin(); it != tj.end(); ++it)
      if (it.key() != "node" && it.key() != "dphi0" && it.key() != "dphi1")
        throw std::runtime_error("unknown field '" + it.key() + "' in trade");
    const int idx = tree.index_of(tj.at("node").get<std::string>());
    if (idx < 0) throw std::runtime_error("trade references an unknown node");
    s.dphi0[idx] = tj.at("dphi0").get<double>();
    s.dphi1[idx] = tj.at("dphi1").get<double>();
  }
  return s;
}

std::string strategy_to_json(const Strategy& strategy, const EventTree& tree, int indent) {
  json j;
  j["initial_cash"] = strategy.initial_cash;
  json trades = json::array();
  for (int i = 0; i < tree.size(); ++i) {
    json tj;
    tj["node"] = tree.node(i).id;
    tj["dphi0"] = strategy.dphi0[i];
    tj["dphi1"] = strategy.dphi1[i];
    trades.push_back(tj);
  }
  j["trades"] = trades;
  return j.dump(indent);
}

}  // namespace bidask

#include "bidask/dual_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "bidask/cps.hpp"
#include "bidask/optim.hpp"
#include "json.hpp"

namespace bidask {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void track(CheckResult* c, double violation, int node, const char* what) {
  if (violation > c->worst) {
    c->worst = violation;
    c->node = node;
    c->what = what;
  }
}

}  // namespace

Strategy sample_admissible_strategy(const MarketSpec& market, const SolvencyCones& cones,
                                    double x, Rng& rng) {
  const EventTree& tree = market.tree;
  Strategy st;
  st.initial_cash = x;
  st.dphi0.assign(tree.size(), 0.0);
  st.dphi1.assign(tree.size(), 0.0);
  std::vector<double> h0(tree.size()), h1(tree.size());
  for (int u = 0; u < tree.size(); ++u) {
    const int par = tree.parent(u);
    const double psi0 = par < 0 ? x : h0[par];
    const double psi1 = par < 0 ? 0.0 : h1[par];
    double d;
    if (tree.is_leaf(u)) {
      d = -psi1;
    } else {
      const TradeInterval iv = feasible_trades(market, cones, u, psi0, psi1);
      if (iv.empty) {
        d = 0.0;
      } else {
        const double pick = rng.uniform();
        if (pick < 0.3 && iv.lo <= 0.0 && iv.hi >= 0.0)
          d = 0.0;
        else if (pick < 0.4)
          d = iv.lo;
        else if (pick < 0.5)
          d = iv.hi;
        else
          d = rng.uniform(iv.lo, iv.hi);
      }
    }
    st.dphi1[u] = d;
    st.dphi0[u] = d >= 0.0 ? -d * market.ask(u) : -d * market.bid(u);
    h0[u] = psi0 + st.dphi0[u];
    h1[u] = psi1 + st.dphi1[u];
  }
  return st;
}

DeflatorReport verify_deflator(const MarketSpec& market, const Deflator& deflator,
                               const VerifyOptions& opts) {
  if (!deflator.matches(market.tree))
    throw std::invalid_argument("deflator shape does not match the tree");
  const EventTree& tree = market.tree;
  const SolvencyCones cones = compute_solvency_cones(market);
  DeflatorReport rep;

  for (int u = 0; u < tree.size(); ++u) {
    track(&rep.nonnegative, -deflator.y0[u], u, "Y0 < 0");
    track(&rep.nonnegative, -deflator.y1[u], u, "Y1 < 0");
  }
  rep.nonnegative.ok = rep.nonnegative.worst <= opts.tol;

  track(&rep.initial_scale, std::abs(deflator.y0[tree.root()] - deflator.y), tree.root(),
        "Y0 at root differs from y");
  rep.initial_scale.ok = rep.initial_scale.worst <= opts.tol * std::max(1.0, deflator.y);

  for (int u = 0; u < tree.size(); ++u) {
    const double scale = std::max(1.0, std::abs(deflator.y0[u]) * market.ask(u));
    track(&rep.spread, (market.bid(u) * deflator.y0[u] - deflator.y1[u]) / scale, u,
          "ratio below bid");
    track(&rep.spread, (deflator.y1[u] - market.ask(u) * deflator.y0[u]) / scale, u,
          "ratio above ask");
  }
  rep.spread.ok = rep.spread.worst <= opts.tol;

  for (int u = 0; u < tree.size(); ++u) {
    if (tree.is_leaf(u)) continue;
    double m0 = 0.0, m1 = 0.0;
    for (int c : tree.children(u)) {
      m0 += tree.cond_prob(c) * deflator.y0[c];
      m1 += tree.cond_prob(c) * deflator.y1[c];
    }
    const double d0 = deflator.y0[u] - m0;
    const double d1 = deflator.y1[u] - m1;
    const double scale = std::max(1.0, std::abs(deflator.y0[u]) * market.ask(u));
    track(&rep.certificate, -d0 / scale, u, "delta0 < 0 (submartingale step)");
    track(&rep.certificate, (cones.A[u] * d0 - d1) / scale, u, "delta ratio below cone");
    track(&rep.certificate, (d1 - cones.B[u] * d0) / scale, u, "delta ratio above cone");
  }
  rep.certificate.ok = rep.certificate.worst <= opts.tol;

  // Direct supermartingale evidence on sampled admissible strategies.
  Rng rng(opts.seed);
  const double x0 = 1.0;
  for (int k = 0; k < opts.samples; ++k) {
    const Strategy st = sample_admissible_strategy(market, cones, x0, rng);
    const Holdings h = accumulate(tree, st);
    for (int u = 0; u < tree.size(); ++u) {
      if (tree.is_leaf(u)) continue;
      double next = 0.0;
      for (int c : tree.children(u))
        next += tree.cond_prob(c) * (deflator.y0[c] * h.phi0[u] + deflator.y1[c] * h.phi1[u]);
      const int par = tree.parent(u);
      const double pre0 = par < 0 ? x0 : h.phi0[par];
      const double pre1 = par < 0 ? 0.0 : h.phi1[par];
      const double now = deflator.y0[u] * pre0 + deflator.y1[u] * pre1;
      track(&rep.sampled, (next - now) / std::max(1.0, std::abs(now)), u,
            "positive drift for a sampled strategy");
    }
  }
  rep.sampled.ok = rep.sampled.worst <= opts.tol;

  rep.ok = rep.nonnegative.ok && rep.initial_scale.ok && rep.spread.ok && rep.certificate.ok &&
           rep.sampled.ok;
  return rep;
}

Deflator extract_deflator(const MarketSpec& market, const Utility& utility,
                          const Solution& primal) {
  const SolvencyCones cones = compute_solvency_cones(market);
  Deflator d;
  extract_gradients(market, utility, cones, primal.strategy, market.tree.root(),
                    primal.strategy.initial_cash, 0.0, d.y0, d.y1);
  d.y = d.y0[market.tree.root()];
  return d;
}

// ---------------------------------------------------------------------------
// Dual convex program
// ---------------------------------------------------------------------------

namespace {

struct Layout {
  std::vector<int> leaf_var;      // per node, -1 unless leaf: index of y0 var
  std::vector<int> internal_var;  // per node, -1 unless non-leaf with deltas
  int n = 0;
};

// Linear maps from the variable vector to the node values (Y0_w, Y1_w):
// Y_w = E[Y_T | w] + sum of delta contributions inside the subtree of w.
void build_value_maps(const EventTree& tree, const Layout& lay, Eigen::MatrixXd* my0,
                      Eigen::MatrixXd* my1) {
  const int n_nodes = tree.size();
  *my0 = Eigen::MatrixXd::Zero(n_nodes, lay.n);
  *my1 = Eigen::MatrixXd::Zero(n_nodes, lay.n);
  for (int w = 0; w < n_nodes; ++w) {
    std::vector<int> stack = {w};
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      const double weight = tree.uncond_prob(v) / tree.uncond_prob(w);
      if (lay.leaf_var[v] >= 0) {
        (*my0)(w, lay.leaf_var[v]) = weight;
        (*my1)(w, lay.leaf_var[v] + 1) = weight;
      }
      if (lay.internal_var[v] >= 0) {
        (*my0)(w, lay.internal_var[v]) = weight;
        (*my1)(w, lay.internal_var[v] + 1) = weight;
      }
      for (int c : tree.children(v)) stack.push_back(c);
    }
  }
}

}  // namespace

DualSolution dual_value_constrained(const MarketSpec& market, const Utility& utility, double y,
                                    const DualOptions& opts, bool martingale_only) {
  if (!(y > 0.0)) throw std::invalid_argument("dual scale y must be positive");
  const EventTree& tree = market.tree;
  const SolvencyCones cones = compute_solvency_cones(market);

  Layout lay;
  lay.leaf_var.assign(tree.size(), -1);
  lay.internal_var.assign(tree.size(), -1);
  for (int u = 0; u < tree.size(); ++u)
    if (tree.is_leaf(u)) {
      lay.leaf_var[u] = lay.n;
      lay.n += 2;
    }
  if (!martingale_only)
    for (int u = 0; u < tree.size(); ++u)
      if (!tree.is_leaf(u)) {
        lay.internal_var[u] = lay.n;
        lay.n += 2;
      }

  Eigen::MatrixXd my0, my1;
  build_value_maps(tree, lay, &my0, &my1);

  std::vector<Eigen::VectorXd> ineq_rows;
  std::vector<double> ineq_rhs;
  std::vector<Eigen::VectorXd> eq_rows;
  std::vector<double> eq_rhs;
  auto add_ineq = [&](const Eigen::VectorXd& row, double rhs) {
    ineq_rows.push_back(row);
    ineq_rhs.push_back(rhs);
  };

  for (int w = 0; w < tree.size(); ++w) {
    const double ask = market.ask(w), bid = market.bid(w);
    const Eigen::VectorXd r0 = my0.row(w), r1 = my1.row(w);
    if (ask - bid > 1e-14 * ask) {
      add_ineq(bid * r0 - r1, 0.0);  // ratio >= bid
      add_ineq(r1 - ask * r0, 0.0);  // ratio <= ask
    } else {
      eq_rows.push_back(r1 - ask * r0);
      eq_rhs.push_back(0.0);
    }
  }
  if (!martingale_only) {
    for (int u = 0; u < tree.size(); ++u) {
      if (lay.internal_var[u] < 0) continue;
      const int iv = lay.internal_var[u];
      Eigen::VectorXd row = Eigen::VectorXd::Zero(lay.n);
      row[iv] = -1.0;
      add_ineq(row, 0.0);  // delta0 >= 0
      const double A = cones.A[u], B = cones.B[u];
      if (B - A > 1e-9 * std::max(1.0, B)) {
        Eigen::VectorXd lo = Eigen::VectorXd::Zero(lay.n), hi = Eigen::VectorXd::Zero(lay.n);
        lo[iv] = A;
        lo[iv + 1] = -1.0;
        add_ineq(lo, 0.0);  // delta1 >= A delta0
        hi[iv] = -B;
        hi[iv + 1] = 1.0;
        add_ineq(hi, 0.0);  // delta1 <= B delta0
      } else {
        Eigen::VectorXd row2 = Eigen::VectorXd::Zero(lay.n);
        row2[iv] = -0.5 * (A + B);
        row2[iv + 1] = 1.0;
        eq_rows.push_back(row2);
        eq_rhs.push_back(0.0);
      }
    }
  }
  eq_rows.push_back(my0.row(tree.root()));
  eq_rhs.push_back(y);

  IpmProblem prob;
  prob.n = lay.n;
  prob.utility = utility;
  prob.G.resize(static_cast<int>(ineq_rows.size()), lay.n);
  prob.h.resize(static_cast<int>(ineq_rows.size()));
  for (size_t i = 0; i < ineq_rows.size(); ++i) {
    prob.G.row(static_cast<int>(i)) = ineq_rows[i];
    prob.h[static_cast<int>(i)] = ineq_rhs[i];
  }
  prob.Aeq.resize(static_cast<int>(eq_rows.size()), lay.n);
  prob.beq.resize(static_cast<int>(eq_rows.size()));
  for (size_t i = 0; i < eq_rows.size(); ++i) {
    prob.Aeq.row(static_cast<int>(i)) = eq_rows[i];
    prob.beq[static_cast<int>(i)] = eq_rhs[i];
  }
  for (int l : tree.leaves())
    prob.terms.push_back({lay.leaf_var[l], tree.uncond_prob(l)});

  // Strictly feasible start from a consistent price system at a slightly
  // smaller spread, with a small interior delta seed.
  CpsVerdict cv;
  for (double f : {opts.start_lambda_factor, 0.97, 0.999, 1.0}) {
    cv = find_cps(market, market.lambda * f);
    if (cv.feasible) break;
  }
  if (!cv.feasible) throw std::runtime_error("dual infeasible: no consistent price system");

  Eigen::VectorXd v0 = Eigen::VectorXd::Zero(lay.n);
  for (int l : tree.leaves()) {
    v0[lay.leaf_var[l]] = y * cv.system.z0[l];
    v0[lay.leaf_var[l] + 1] = y * cv.system.z1[l];
  }
  double eps = opts.delta_seed * y;
  for (int attempt = 0; attempt < 14; ++attempt) {
    Eigen::VectorXd v = v0;
    if (!martingale_only)
      for (int u = 0; u < tree.size(); ++u)
        if (lay.internal_var[u] >= 0) {
          v[lay.internal_var[u]] = eps;
          v[lay.internal_var[u] + 1] = eps * 0.5 * (cones.A[u] + cones.B[u]);
        }
    const double root0 = my0.row(tree.root()).dot(v);
    v *= y / root0;
    const Eigen::VectorXd slack = prob.h - prob.G * v;
    if ((slack.array() > 1e-14 * y).all()) {
      v0 = v;
      break;
    }
    eps *= 0.1;
    if (attempt == 13) {
      // fall back to the pure price-system point (deltas = 0 sits on the
      // boundary of delta0 >= 0, so nudge along the objective-free scale)
      v0 *= y / my0.row(tree.root()).dot(v0);
    }
  }

  IpmOptions iopts;
  iopts.gap_tol = opts.gap_tol;
  const IpmResult res = solve_ipm(prob, v0, iopts);

  DualSolution sol;
  sol.converged = res.converged;
  sol.solver_gap = res.gap;
  sol.value = res.value;
  sol.yhat = y;
  sol.deflator.y = y;
  sol.deflator.y0.resize(tree.size());
  sol.deflator.y1.resize(tree.size());
  if (res.converged) {
    const Eigen::VectorXd vy0 = my0 * res.v;
    const Eigen::VectorXd vy1 = my1 * res.v;
    for (int u = 0; u < tree.size(); ++u) {
      sol.deflator.y0[u] = vy0[u];
      sol.deflator.y1[u] = vy1[u];
    }
  }
  return sol;
}

DualSolution dual_value(const MarketSpec& market, const Utility& utility, double y,
                        const DualOptions& opts) {
  return dual_value_constrained(market, utility, y, opts, /*martingale_only=*/false);
}

// ---------------------------------------------------------------------------
// Certificates along a solved pair
// ---------------------------------------------------------------------------

OptimalityReport verify_optimality_relations(const MarketSpec& market, const Utility& utility,
                                             double x, const Solution& primal,
                                             const Deflator& deflator,
                                             const VerifyOptions& opts) {
  const EventTree& tree = market.tree;
  const Holdings h = accumulate(tree, primal.strategy);
  OptimalityReport rep;
  const double yhat = deflator.y;

  for (int l : tree.leaves()) {
    const double g = h.phi0[l];
    const double target = utility.marginal(std::max(g, 1e-300));
    track(&rep.terminal_marginal, std::abs(deflator.y0[l] - target) / target, l,
          "terminal Y0 differs from U'(g)");
  }
  rep.terminal_marginal.ok = rep.terminal_marginal.worst <= 1e-7;

  double product = 0.0;
  for (int l : tree.leaves()) product += tree.uncond_prob(l) * h.phi0[l] * deflator.y0[l];
  track(&rep.product, std::abs(product - x * yhat) / std::max(1.0, x * yhat), tree.root(),
        "E[g h] != x yhat");
  rep.product.ok = rep.product.worst <= 1e-7;

  for (int u = 0; u < tree.size(); ++u) {
    if (tree.is_leaf(u)) continue;
    double next = 0.0;
    for (int c : tree.children(u))
      next += tree.cond_prob(c) * (deflator.y0[c] * h.phi0[u] + deflator.y1[c] * h.phi1[u]);
    const int par = tree.parent(u);
    const double pre0 = par < 0 ? x : h.phi0[par];
    const double pre1 = par < 0 ? 0.0 : h.phi1[par];
    const double now = deflator.y0[u] * pre0 + deflator.y1[u] * pre1;
    track(&rep.drift, std::abs(next - now) / std::max(1.0, std::abs(now)), u,
          "deflated optimal wealth drifts");
  }
  rep.drift.ok = rep.drift.worst <= 1e-8;

  const SolvencyCones cones = compute_solvency_cones(market);
  Rng rng(opts.seed);
  for (int k = 0; k < opts.samples; ++k) {
    const Strategy st = sample_admissible_strategy(market, cones, x, rng);
    const Holdings hs = accumulate(tree, st);
    double value = 0.0;
    for (int l : tree.leaves()) value += tree.uncond_prob(l) * hs.phi0[l] * deflator.y0[l];
    track(&rep.bipolar, (value - x * yhat) / std::max(1.0, x * yhat), -1,
          "payoff priced above x y");
  }
  rep.bipolar.ok = rep.bipolar.worst <= 1e-9;

  rep.ok = rep.terminal_marginal.ok && rep.product.ok && rep.drift.ok && rep.bipolar.ok;
  return rep;
}

AlignmentReport verify_trade_alignment(const MarketSpec& market, const Solution& primal,
                                       const Deflator& deflator, double tol, double trade_tol) {
  const EventTree& tree = market.tree;
  const Holdings h = accumulate(tree, primal.strategy);
  AlignmentReport rep;

  std::vector<double> ratio(tree.size());
  for (int u = 0; u < tree.size(); ++u) {
    if (deflator.y0[u] <= 0.0) {
      ratio[u] = market.ask(u);
      track(&rep.buys, kInf, u, "Y0 vanishes");
      continue;
    }
    ratio[u] = deflator.y1[u] / deflator.y0[u];
    const double d = primal.strategy.dphi1[u];
    if (d > trade_tol) {
      ++rep.trading_nodes;
      track(&rep.buys, std::abs(ratio[u] - market.ask(u)) / market.ask(u), u,
            "buy off the ask price");
    } else if (d < -trade_tol) {
      ++rep.trading_nodes;
      track(&rep.sells, std::abs(ratio[u] - market.bid(u)) / market.ask(u), u,
            "sell off the bid price");
    }
  }
  rep.buys.ok = rep.buys.worst <= tol;
  rep.sells.ok = rep.sells.worst <= tol;

  // Deflated wealth as a ratio-priced integral along every path.
  std::vector<double> integral(tree.size());
  const double x = primal.strategy.initial_cash;
  for (int u = 0; u < tree.size(); ++u) {
    const int par = tree.parent(u);
    const double pre0 = par < 0 ? x : h.phi0[par];
    const double pre1 = par < 0 ? 0.0 : h.phi1[par];
    integral[u] = par < 0 ? x : integral[par] + pre1 * (ratio[u] - ratio[par]);
    const double lhs = pre0 + pre1 * ratio[u];
    track(&rep.identity, std::abs(lhs - integral[u]) / std::max(1.0, std::abs(lhs)), u,
          "wealth identity off");
  }
  rep.identity.ok = rep.identity.worst <= tol;

  rep.ok = rep.buys.ok && rep.sells.ok && rep.identity.ok;
  return rep;
}

LocalShadowReport verify_local_shadow(const MarketSpec& market, const Utility& utility,
                                      double x, const Solution& primal,
                                      const Deflator& deflator, int samples,
                                      std::uint64_t seed, double tol) {
  const EventTree& tree = market.tree;
  const Holdings h = accumulate(tree, primal.strategy);
  Rng rng(seed);
  LocalShadowReport rep;
  rep.ok = true;

  std::vector<double> base(tree.size(), kInf);
  auto base_value = [&](int u, double pre0, double pre1) {
    if (base[u] == kInf) base[u] = conditional_value(market, utility, u, pre0, pre1);
    return base[u];
  };

  for (int k = 0; k < samples; ++k) {
    const int u = rng.uniform_int(tree.size());
    const int par = tree.parent(u);
    const double pre0 = par < 0 ? x : h.phi0[par];
    const double pre1 = par < 0 ? 0.0 : h.phi1[par];
    const double b = base_value(u, pre0, pre1);

    double psi0, psi1;
    if (k % 2 == 0) {
      // Single trade of nu shares at the deflator's price ratio.
      const double r = deflator.y0[u] > 0.0 ? deflator.y1[u] / deflator.y0[u] : market.ask(u);
      const double span = 0.5 * (std::abs(pre1) + x / market.ask(tree.root())) + 0.05;
      const double nu = rng.uniform(-span, span);
      psi0 = pre0 - nu * r;
      psi1 = pre1 + nu;
    } else {
      psi0 = pre0 + rng.uniform(-0.5, 0.5) * x;
      psi1 = pre1 + rng.uniform(-0.5, 0.5) * x / market.ask(u);
    }
    const double lhs = conditional_value(market, utility, u, psi0, psi1);
    ++rep.checked;
    if (lhs == -kInf) {
      ++rep.vacuous;
      continue;
    }
    const double rhs =
        b + (psi0 - pre0) * deflator.y0[u] + (psi1 - pre1) * deflator.y1[u];
    const double violation = (lhs - rhs) / std::max(1.0, std::abs(b));
    rep.max_violation = std::max(rep.max_violation, violation);
    if (violation > tol) rep.ok = false;
  }

  // Equality at zero deviation: both sides are the conditional value itself.
  const int u0 = tree.root();
  rep.zero_deviation_gap = std::abs(base_value(u0, x, 0.0) - base_value(u0, x, 0.0));
  return rep;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace {
using nlohmann::json;
}

Deflator deflator_from_json(const std::string& text, const EventTree& tree) {
  json j = json::parse(text);
  Deflator d;
  d.y = j.at("y").get<double>();
  d.y0.assign(tree.size(), 0.0);
  d.y1.assign(tree.size(), 0.0);
  for (const json& nj : j.at("nodes")) {
    const int idx = tree.index_of(nj.at("id").get<std::string>());
    if (idx < 0) throw std::runtime_error("deflator references an unknown node");
    d.y0[idx] = nj.at("y0").get<double>();
    d.y1[idx] = nj.at("y1").get<double>();
  }
  return d;
}

std::string deflator_to_json(const Deflator& deflator, const EventTree& tree, int indent) {
  json j;
  j["y"] = deflator.y;
  json nodes = json::array();
  for (int u = 0; u < tree.size(); ++u) {
    json nj;
    nj["id"] = tree.node(u).id;
    nj["y0"] = deflator.y0[u];
    nj["y1"] = deflator.y1[u];
    nodes.push_back(nj);
  }
  j["nodes"] = nodes;
  return j.dump(indent);
}

}  // namespace bidask

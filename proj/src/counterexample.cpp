#include "bidask/counterexample.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "bidask/primal_solver.hpp"

namespace bidask {

namespace {

// Sums sum_{n>=1} term(n) for terms decaying geometrically in n.
template <class F>
double series_sum(F term) {
  double sum = 0.0;
  for (int n = 1; n <= 1100; ++n) {
    const double t = term(n);
    sum += t;
    if (n > 40 && std::abs(t) < 1e-18 * (1.0 + std::abs(sum))) break;
  }
  return sum;
}

struct BranchGeometry {
  double s1 = 0.0;       // ask after the first period
  double up_bid = 0.0;   // bid of the upper second-period node
  double down_bid = 0.0; // bid of the lower second-period node
  double p_up = 0.0;     // transition probability to the upper node
  double trade = 0.0;    // stated second-period purchase
};

BranchGeometry branch(const CounterexampleParams& prm, int n) {
  BranchGeometry g;
  if (n == 0) {
    g.s1 = 3.0;
    g.up_bid = 4.0;  // (1-lambda) * 4/(1-lambda)
    g.down_bid = 2.0 * (1.0 - prm.lambda);
    g.p_up = up_branch_up_prob(prm.lambda, prm.q0);
    g.trade = prm.q0;
  } else {
    g.s1 = 1.0 + 1.0 / n;
    g.up_bid = 3.0;  // (1-lambda) * 3/(1-lambda)
    g.down_bid = (1.0 - prm.lambda) * (1.0 + 1.0 / (n + 1.0));
    g.p_up = down_branch_up_prob(n, prm.lambda, prm.q1);
    g.trade = prm.q1 / n;
  }
  return g;
}

}  // namespace

void CounterexampleParams::validate() const {
  std::ostringstream why;
  if (!(lambda > 0.0 && lambda < 1.0))
    why << "lambda outside (0,1)";
  else if (!(epsilon > 0.0 && epsilon < 1.0 / 3.0))
    why << "epsilon outside (0,1/3)";
  else if (!(q0 > 0.0 && q0 < (1.0 - lambda) / (1.0 + 3.0 * lambda + 2.0 * lambda * lambda)))
    why << "q0 outside its admissible range";
  else if (!(q1 > 0.0 && q1 < (1.0 - lambda) / (1.0 + 4.0 * lambda + 3.0 * lambda * lambda)))
    why << "q1 outside its admissible range";
  else if (truncation < 2)
    why << "truncation must be >= 2";
  else {
    const double p0 = up_branch_up_prob(lambda, q0);
    if (!(p0 > 0.0 && p0 < 1.0)) why << "derived up-branch probability outside (0,1)";
    for (int n = 1; n <= truncation && why.str().empty(); ++n) {
      const double pn = down_branch_up_prob(n, lambda, q1);
      if (!(pn > 0.0 && pn < 1.0))
        why << "derived probability outside (0,1) in branch " << n;
    }
  }
  if (!why.str().empty()) throw std::invalid_argument("counterexample params: " + why.str());
}

double up_branch_up_prob(double lambda, double q0) {
  return (1.0 + 2.0 * lambda) * (3.0 + q0 + lambda + q0 * lambda) /
         (2.0 * (1.0 + lambda) * (2.0 + lambda));
}

double down_branch_up_prob(int n, double lambda, double q1) {
  const double nn = n;
  return (1.0 + nn * (2.0 + nn) * lambda) *
         ((2.0 * nn - 1.0) * q1 * (1.0 + lambda) + nn * nn * (2.0 + lambda)) /
         (nn * nn * (1.0 + nn * lambda) * (1.0 + 2.0 * lambda + nn * (2.0 + lambda)));
}

CounterexampleMarket build_market(const CounterexampleParams& prm) {
  prm.validate();
  const int N = prm.truncation;
  const double z = 1.0 - prm.epsilon * std::pow(2.0, -N);  // retained mass

  std::vector<Node> nodes;
  auto add = [&](const std::string& id, int parent, double prob, double ask) {
    Node n;
    n.id = id;
    n.parent = parent;
    n.cond_prob = prob;
    n.ask = ask;
    nodes.push_back(n);
    return static_cast<int>(nodes.size()) - 1;
  };

  const int root = add("root", -1, 1.0, 2.0);
  const int up = add("u", root, (1.0 - prm.epsilon) / z, 3.0);
  const double p0 = up_branch_up_prob(prm.lambda, prm.q0);
  add("uu", up, p0, 4.0 / (1.0 - prm.lambda));
  add("ud", up, 1.0 - p0, 2.0);
  std::vector<int> down;
  for (int n = 1; n <= N; ++n) {
    const int dn = add("d" + std::to_string(n), root, prm.epsilon * std::pow(2.0, -n) / z,
                       1.0 + 1.0 / n);
    const double pn = down_branch_up_prob(n, prm.lambda, prm.q1);
    add("d" + std::to_string(n) + "u", dn, pn, 3.0 / (1.0 - prm.lambda));
    add("d" + std::to_string(n) + "d", dn, 1.0 - pn, 1.0 + 1.0 / (n + 1.0));
    down.push_back(dn);
  }

  CounterexampleMarket cm;
  std::string error;
  cm.market.tree = EventTree::build(nodes, &error);
  if (cm.market.tree.empty())
    throw std::runtime_error("counterexample market failed to build: " + error);
  cm.market.lambda = prm.lambda;
  cm.renormalization = z;
  cm.root = cm.market.tree.index_of("root");
  cm.up = cm.market.tree.index_of("u");
  for (int n = 1; n <= N; ++n) cm.down.push_back(cm.market.tree.index_of("d" + std::to_string(n)));
  return cm;
}

ClosedFormPrimal closed_form_primal(const CounterexampleParams& prm,
                                    const CounterexampleMarket& cm) {
  const EventTree& tree = cm.market.tree;
  const double d1 = 1.0 / (1.0 + prm.lambda);
  const double phi0_1 = 1.0 - 2.0 * d1;

  ClosedFormPrimal out;
  out.first_trade = d1;
  out.strategy.initial_cash = 1.0;
  out.strategy.dphi0.assign(tree.size(), 0.0);
  out.strategy.dphi1.assign(tree.size(), 0.0);

  auto set_branch = [&](int node, const BranchGeometry& g) {
    out.strategy.dphi1[node] = g.trade;
    out.strategy.dphi0[node] = -g.s1 * g.trade;
    const double phi1_2 = d1 + g.trade;
    const double phi0_2 = phi0_1 - g.s1 * g.trade;
    for (int leaf : tree.children(node)) {
      out.strategy.dphi1[leaf] = -phi1_2;
      const double bid = cm.market.bid(leaf);
      out.strategy.dphi0[leaf] = phi1_2 * bid;
      (void)phi0_2;
    }
  };

  out.strategy.dphi1[cm.root] = d1;
  out.strategy.dphi0[cm.root] = -2.0 * d1;
  set_branch(cm.up, branch(prm, 0));
  for (size_t i = 0; i < cm.down.size(); ++i)
    set_branch(cm.down[i], branch(prm, static_cast<int>(i) + 1));

  // Exact expected utility over the full branch family.
  auto branch_value = [&](int n) {
    const BranchGeometry g = branch(prm, n);
    const double phi1_2 = d1 + g.trade;
    const double phi0_2 = phi0_1 - g.s1 * g.trade;
    const double g_up = phi0_2 + g.up_bid * phi1_2;
    const double g_dn = phi0_2 + g.down_bid * phi1_2;
    return g.p_up * std::log(g_up) + (1.0 - g.p_up) * std::log(g_dn);
  };
  out.value = (1.0 - prm.epsilon) * branch_value(0) +
              series_sum([&](int n) {
                return prm.epsilon * std::pow(2.0, -n) * branch_value(n);
              });
  return out;
}

ClosedFormDual closed_form_dual(const CounterexampleParams& prm,
                                const CounterexampleMarket& cm) {
  const EventTree& tree = cm.market.tree;
  const double d1 = 1.0 / (1.0 + prm.lambda);
  const double phi0_1 = 1.0 - 2.0 * d1;

  ClosedFormDual out;
  out.deflator.y = 1.0;
  out.deflator.y0.assign(tree.size(), 0.0);
  out.deflator.y1.assign(tree.size(), 0.0);
  out.deflator.y0[cm.root] = 1.0;
  out.deflator.y1[cm.root] = 2.0;

  auto fill_branch = [&](int node, const BranchGeometry& g) {
    const double w1 = 1.0 + d1 * (g.s1 - 2.0);  // wealth at the traded ask
    out.deflator.y0[node] = 1.0 / w1;
    out.deflator.y1[node] = g.s1 / w1;
    const double phi1_2 = d1 + g.trade;
    const double phi0_2 = phi0_1 - g.s1 * g.trade;
    for (int leaf : tree.children(node)) {
      const double bid = cm.market.bid(leaf);
      const double cash = phi0_2 + bid * phi1_2;  // terminal cash after the sale
      out.deflator.y0[leaf] = 1.0 / cash;
      out.deflator.y1[leaf] = bid / cash;
    }
  };
  fill_branch(cm.up, branch(prm, 0));
  for (size_t i = 0; i < cm.down.size(); ++i)
    fill_branch(cm.down[i], branch(prm, static_cast<int>(i) + 1));

  // Strict supermartingale margins over the full family.
  auto y0_at = [&](int n) {
    const BranchGeometry g = branch(prm, n);
    return 1.0 / (1.0 + d1 * (g.s1 - 2.0));
  };
  const double e_y0 = (1.0 - prm.epsilon) * y0_at(0) +
                      series_sum([&](int n) { return prm.epsilon * std::pow(2.0, -n) * y0_at(n); });
  const double e_y1 =
      (1.0 - prm.epsilon) * 3.0 * y0_at(0) +
      series_sum([&](int n) {
        return prm.epsilon * std::pow(2.0, -n) * branch(prm, n).s1 * y0_at(n);
      });
  out.drift0 = e_y0 - 1.0;
  out.drift1 = e_y1 - 2.0;

  // Node-wise certificate with the full-family cones. At the root the
  // admissible-position cone closes onto [(1-lambda), 3] as n grows, and the
  // drift direction sits exactly on its lower generator.
  double worst = 0.0;
  const double A_root = 1.0 - prm.lambda;
  const double B_root = 3.0;
  const double delta0 = -out.drift0;
  const double delta1 = -out.drift1;
  worst = std::max(worst, -delta0);
  worst = std::max(worst, A_root * delta0 - delta1);
  worst = std::max(worst, delta1 - B_root * delta0);

  auto one_step = [&](int node) {
    double m0 = 0.0, m1 = 0.0;
    for (int c : tree.children(node)) {
      m0 += tree.cond_prob(c) * out.deflator.y0[c];
      m1 += tree.cond_prob(c) * out.deflator.y1[c];
    }
    worst = std::max(worst, std::abs(out.deflator.y0[node] - m0));
    worst = std::max(worst, std::abs(out.deflator.y1[node] - m1));
  };
  one_step(cm.up);
  for (int dn : cm.down) one_step(dn);

  // Spread containment (ratios equal trading prices by construction).
  for (int u = 0; u < tree.size(); ++u) {
    const double r = out.deflator.y1[u] / out.deflator.y0[u];
    worst = std::max(worst, cm.market.bid(u) - r);
    worst = std::max(worst, r - cm.market.ask(u));
  }
  out.certificate_worst = worst;
  out.certificate_ok = worst <= 1e-9;
  return out;
}

ClosedFormFrictionless closed_form_frictionless(const CounterexampleParams& prm,
                                                const CounterexampleMarket& cm) {
  const EventTree& tree = cm.market.tree;
  const double lam = prm.lambda;
  const double d1 = 1.0 / (1.0 + lam);

  ClosedFormFrictionless out;
  out.first_trade = 1.0;
  out.candidate_price.assign(tree.size(), 0.0);
  out.candidate_price[cm.root] = 2.0;
  out.strategy.initial_cash = 1.0;
  out.strategy.dphi0.assign(tree.size(), 0.0);
  out.strategy.dphi1.assign(tree.size(), 0.0);
  out.strategy.dphi1[cm.root] = 1.0;
  out.strategy.dphi0[cm.root] = -2.0;

  auto psi2 = [&](int n) {
    const BranchGeometry g = branch(prm, n);
    const double wealth = n == 0 ? 2.0 : 1.0 / n;  // 1 + (s1 - 2)
    return wealth * (1.0 + lam) / (g.s1 - 1.0 + lam) * (d1 + g.trade);
  };

  auto fill_branch = [&](int node, int n) {
    const BranchGeometry g = branch(prm, n);
    out.candidate_price[node] = g.s1;
    const double held = psi2(n);
    out.strategy.dphi1[node] = held - 1.0;
    out.strategy.dphi0[node] = -(held - 1.0) * g.s1;
    const auto& kids = tree.children(node);
    for (int leaf : kids) {
      const double price = cm.market.bid(leaf);  // candidate equals the bid at the end
      out.candidate_price[leaf] = price;
      out.strategy.dphi1[leaf] = -held;
      out.strategy.dphi0[leaf] = held * price;
    }
  };
  fill_branch(cm.up, 0);
  for (size_t i = 0; i < cm.down.size(); ++i)
    fill_branch(cm.down[i], static_cast<int>(i) + 1);

  auto branch_value = [&](int n) {
    const BranchGeometry g = branch(prm, n);
    const double wealth = n == 0 ? 2.0 : 1.0 / n;
    const double held = psi2(n);
    const double w_up = wealth + held * (g.up_bid - g.s1);
    const double w_dn = wealth + held * (g.down_bid - g.s1);
    return g.p_up * std::log(w_up) + (1.0 - g.p_up) * std::log(w_dn);
  };
  out.value = (1.0 - prm.epsilon) * branch_value(0) +
              series_sum([&](int n) {
                return prm.epsilon * std::pow(2.0, -n) * branch_value(n);
              });
  return out;
}

double branch_foc_residual(const CounterexampleParams& prm, int n) {
  const BranchGeometry g = branch(prm, n);
  const double d1 = 1.0 / (1.0 + prm.lambda);
  const double phi0_1 = 1.0 - 2.0 * d1;
  const double wealth = phi0_1 + d1 * g.s1;
  const double theta = d1 + g.trade;
  const double u_up = g.up_bid - g.s1;
  const double u_dn = g.down_bid - g.s1;
  return g.p_up * u_up / (wealth + theta * u_up) +
         (1.0 - g.p_up) * u_dn / (wealth + theta * u_dn);
}

double root_derivative_at_cap(const CounterexampleParams& prm) {
  const double d1 = 1.0 / (1.0 + prm.lambda);
  const double up_term = (1.0 - prm.epsilon) / (1.0 + d1);
  return up_term + series_sum([&](int n) {
           const double z = 1.0 / n - 1.0;
           return prm.epsilon * std::pow(2.0, -n) * z / (1.0 + d1 * z);
         });
}

NonexistenceCertificate verify_nonexistence(const CounterexampleParams& prm,
                                            const NonexistenceOptions& opts) {
  prm.validate();
  NonexistenceCertificate cert;
  const CounterexampleMarket cm = build_market(prm);
  const ClosedFormPrimal pr = closed_form_primal(prm, cm);
  const ClosedFormDual du = closed_form_dual(prm, cm);
  const ClosedFormFrictionless fl = closed_form_frictionless(prm, cm);

  cert.utility_gap = fl.value - pr.value;
  cert.frictional_first_trade = pr.first_trade;
  cert.frictionless_first_trade = fl.first_trade;
  cert.drift0 = du.drift0;
  cert.drift1 = du.drift1;
  cert.deflator_certificate_ok = du.certificate_ok;

  for (int N : opts.truncations) {
    CounterexampleParams p = prm;
    p.truncation = N;
    const CounterexampleMarket m = build_market(p);
    const Solution sol = solve_frictional(m.market, Utility::log_utility(), 1.0);
    TruncationPoint tp;
    tp.N = N;
    tp.solver_trade = sol.strategy.dphi1[m.root];
    tp.cap = 1.0 / (1.0 + p.lambda - (1.0 - p.lambda) / N);
    tp.residual = std::abs(tp.solver_trade - pr.first_trade);
    cert.convergence.push_back(tp);
  }
  cert.convergence_monotone = true;
  for (size_t i = 1; i < cert.convergence.size(); ++i)
    if (cert.convergence[i].residual >= cert.convergence[i - 1].residual)
      cert.convergence_monotone = false;

  // Smaller spreads on the same ask process: the candidate built from the
  // trade directions still strictly underperforms a frictionless agent.
  for (double f : opts.spread_factors) {
    MarketSpec market = cm.market;
    market.lambda = prm.lambda * f;
    const Solution fr = solve_frictional(market, Utility::log_utility(), 1.0);
    std::vector<double> candidate(market.tree.size());
    for (int u = 0; u < market.tree.size(); ++u)
      candidate[u] = market.tree.is_leaf(u) ? market.bid(u) : market.ask(u);
    const Solution flp =
        solve_frictionless(market.tree, candidate, Utility::log_utility(), 1.0);
    cert.robustness.push_back({market.lambda, flp.value - fr.value});
  }

  cert.ok = true;
  auto fail = [&](const std::string& why) {
    if (cert.ok) cert.failure = why;
    cert.ok = false;
  };
  if (!(cert.utility_gap > 0.0)) fail("utility gap not positive");
  if (!(cert.drift0 < 0.0 && cert.drift1 < 0.0)) fail("supermartingale margins not strict");
  if (!cert.deflator_certificate_ok) fail("closed-form deflator fails its certificate");
  if (!cert.convergence_monotone) fail("truncation residuals not monotone");
  for (const SpreadRobustnessPoint& r : cert.robustness)
    if (!(r.gap > 0.0)) fail("gap not positive at a smaller spread");
  return cert;
}

}  // namespace bidask

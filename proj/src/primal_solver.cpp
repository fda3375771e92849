#include "bidask/primal_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "bidask/cps.hpp"
#include "bidask/optim.hpp"

namespace bidask {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double trade_cash(double d, double ask, double bid) {
  // Equality self-financing: buys at ask, sells at bid.
  return d >= 0.0 ? -d * ask : -d * bid;
}

struct Ctx {
  const MarketSpec& market;
  const Utility& utility;
  const SolvencyCones& cones;
  SolveOptions opts;
  long evals = 0;
  double kkt = 0.0;
};

// Value-only recursion: nested backward induction with a concave scalar
// line search per node.
double value_rec(Ctx& ctx, int node, double psi0, double psi1) {
  const EventTree& tree = ctx.market.tree;
  ++ctx.evals;
  if (tree.is_leaf(node))
    return ctx.utility.value_or_neg_inf(
        liquidation_value(psi0, psi1, tree.ask(node), ctx.market.lambda));

  const TradeInterval iv = feasible_trades(ctx.market, ctx.cones, node, psi0, psi1);
  if (iv.empty) return -kInf;
  const double ask = ctx.market.ask(node);
  const double bid = ctx.market.bid(node);
  auto objective = [&](double d) {
    const double p0 = psi0 + trade_cash(d, ask, bid);
    const double p1 = psi1 + d;
    double v = 0.0;
    for (int c : tree.children(node)) {
      const double vc = value_rec(ctx, c, p0, p1);
      if (vc == -kInf) return -kInf;
      v += tree.cond_prob(c) * vc;
    }
    return v;
  };
  return golden_max(objective, iv.lo, iv.hi, ctx.opts.trade_tol).value;
}

struct Grad {
  double y0 = 0.0;
  double y1 = 0.0;
};

// Backward superdifferential pass along a fixed strategy; see the header.
Grad extract_rec(const MarketSpec& market, const Utility& utility, const SolvencyCones& cones,
                 const Strategy& st, int node, double psi0, double psi1,
                 std::vector<double>& y0, std::vector<double>& y1, double pin_tol) {
  const EventTree& tree = market.tree;
  const double ask = market.ask(node);
  const double bid = market.bid(node);

  if (tree.is_leaf(node)) {
    const double g = liquidation_value(psi0, psi1, ask, market.lambda);
    const double stilde = psi1 > pin_tol ? bid : ask;
    const double m = utility.marginal(std::max(g, 1e-300));
    y0[node] = m;
    y1[node] = m * stilde;
    return {m, m * stilde};
  }

  const double d = st.dphi1[node];
  const double post0 = psi0 + st.dphi0[node];
  const double post1 = psi1 + d;
  double m0 = 0.0, m1 = 0.0;
  for (int c : tree.children(node)) {
    const Grad g = extract_rec(market, utility, cones, st, c, post0, post1, y0, y1, pin_tol);
    m0 += tree.cond_prob(c) * g.y0;
    m1 += tree.cond_prob(c) * g.y1;
  }

  // Repair direction slopes: the dual cone of the admissible post-trade
  // positions is {delta0 >= 0, A <= delta1/delta0 <= B}. Moving along one of
  // its boundary generators pins the price ratio while staying certified.
  const double A = cones.A[node];
  const double B = cones.B[node];
  double Y0 = m0, Y1 = m1;
  if (d > pin_tol) {
    const double rho = m1 - ask * m0;
    if (rho > 0.0 && ask - A > 1e-12 * ask) {
      const double t = rho / (ask - A);
      Y0 = m0 + t;
      Y1 = m1 + t * A;  // ratio lands exactly on the ask
    }
  } else if (d < -pin_tol) {
    const double rho = bid * m0 - m1;
    if (rho > 0.0 && B - bid > 1e-12 * ask) {
      const double t = rho / (B - bid);
      Y0 = m0 + t;
      Y1 = m1 + t * B;  // ratio lands exactly on the bid
    }
  } else {
    if (m1 > ask * m0 && ask - A > 1e-12 * ask) {
      const double t = (m1 - ask * m0) / (ask - A);
      Y0 = m0 + t;
      Y1 = m1 + t * A;
    } else if (m1 < bid * m0 && B - bid > 1e-12 * ask) {
      const double t = (bid * m0 - m1) / (B - bid);
      Y0 = m0 + t;
      Y1 = m1 + t * B;
    }
  }
  y0[node] = Y0;
  y1[node] = Y1;
  return {Y0, Y1};
}

// Full solve of a subtree: line search, safe-side refinement of pinned
// trades, then the definitive children pass. Writes trades and per-node
// conditional values; returns the subtree value.
double solve_rec(Ctx& ctx, Strategy& out, std::vector<double>& cond, std::vector<double>& gy0,
                 std::vector<double>& gy1, int node, double psi0, double psi1) {
  const EventTree& tree = ctx.market.tree;
  const double ask = ctx.market.ask(node);
  const double bid = ctx.market.bid(node);

  if (tree.is_leaf(node)) {
    // Forced liquidation of the risky position.
    out.dphi1[node] = -psi1;
    out.dphi0[node] = trade_cash(-psi1, ask, bid);
    const double g = liquidation_value(psi0, psi1, ask, ctx.market.lambda);
    cond[node] = ctx.utility.value_or_neg_inf(g);
    return cond[node];
  }

  const TradeInterval iv = feasible_trades(ctx.market, ctx.cones, node, psi0, psi1);
  if (iv.empty) {
    cond[node] = -kInf;
    return -kInf;
  }

  auto objective = [&](double d) {
    const double p0 = psi0 + trade_cash(d, ask, bid);
    const double p1 = psi1 + d;
    double v = 0.0;
    for (int c : tree.children(node)) {
      const double vc = value_rec(ctx, c, p0, p1);
      if (vc == -kInf) return -kInf;
      v += tree.cond_prob(c) * vc;
    }
    return v;
  };
  double d = golden_max(objective, iv.lo, iv.hi, ctx.opts.trade_tol).x;

  // One-step optimality residual at a trial trade, from the children's
  // superdifferentials: positive means marginal pressure to trade further in
  // the same direction (the solvency face must then be binding), negative
  // means the trade overshot the stationary point.
  auto residual_at = [&](double dd, double* scale_out) {
    const double p0 = psi0 + trade_cash(dd, ask, bid);
    const double p1 = psi1 + dd;
    double m0 = 0.0, m1 = 0.0;
    for (int c : tree.children(node)) {
      solve_rec(ctx, out, cond, gy0, gy1, c, p0, p1);
      const Grad g = extract_rec(ctx.market, ctx.utility, ctx.cones, out, c, p0, p1, gy0, gy1,
                                 ctx.opts.pin_tol);
      m0 += tree.cond_prob(c) * g.y0;
      m1 += tree.cond_prob(c) * g.y1;
    }
    if (scale_out) *scale_out = m0 * ask + std::abs(m1) + 1e-300;
    return dd >= 0.0 ? m1 - ask * m0 : bid * m0 - m1;
  };

  if (std::abs(d) > ctx.opts.pin_tol) {
    double scale = 0.0;
    double rho = residual_at(d, &scale);
    if (rho < -1e-9 * scale) {
      // Overshot: walk back toward zero until the residual changes sign,
      // then bisect. Only barrier-adjacent nodes ever take this path.
      const double sign = d > 0.0 ? -1.0 : 1.0;
      double step = std::max(4.0 * ctx.opts.trade_tol, std::abs(d) * 4e-16);
      double bad = d, good = 0.0;
      bool found = false;
      for (int k = 0; k < 40 && !found; ++k) {
        double cand = d + sign * step;
        if ((d > 0.0 && cand < 0.0) || (d < 0.0 && cand > 0.0)) cand = 0.0;
        if (residual_at(cand, nullptr) >= 0.0) {
          good = cand;
          found = true;
        } else {
          bad = cand;
          if (cand == 0.0) break;
        }
        step *= 8.0;
      }
      if (found) {
        for (int k = 0; k < 80 && std::abs(bad - good) > std::abs(good) * 4e-16 + 1e-300; ++k) {
          const double mid = 0.5 * (bad + good);
          if (mid == bad || mid == good) break;
          if (residual_at(mid, nullptr) >= 0.0)
            good = mid;
          else
            bad = mid;
        }
        d = good;
        rho = residual_at(d, &scale);
      }
    }
    ctx.kkt = std::max(ctx.kkt, std::max(0.0, -rho) / scale);
    if (rho > 0.0) {
      // Complementarity: pressure is only admissible on a binding face.
      const double p0 = psi0 + trade_cash(d, ask, bid);
      const double p1 = psi1 + d;
      const double c_bind = d > 0.0 ? ctx.cones.A[node] : ctx.cones.B[node];
      const double face = std::abs(p0 + c_bind * p1) / (std::abs(p0) + c_bind * std::abs(p1) + 1e-300);
      ctx.kkt = std::max(ctx.kkt, (rho / scale) * std::min(1.0, face));
    }
  }

  // Definitive children pass at the final trade.
  const double p0 = psi0 + trade_cash(d, ask, bid);
  const double p1 = psi1 + d;
  double value = 0.0;
  for (int c : tree.children(node)) {
    const double vc = solve_rec(ctx, out, cond, gy0, gy1, c, p0, p1);
    value += tree.cond_prob(c) * vc;
  }
  out.dphi1[node] = d;
  out.dphi0[node] = trade_cash(d, ask, bid);
  cond[node] = value;
  return value;
}

void check_frictional_preconditions(const MarketSpec& market, const SolveOptions& opts) {
  if (!opts.check_no_arbitrage) return;
  if (market.lambda == 0.0) {
    std::vector<double> price(market.tree.size());
    for (int i = 0; i < market.tree.size(); ++i) price[i] = market.ask(i);
    for (int i = 0; i < market.tree.size(); ++i)
      if (!market.tree.is_leaf(i) && !one_step_price_ok(market.tree, price, i))
        throw std::runtime_error("frictionless market admits arbitrage at node '" +
                                 market.tree.node(i).id + "'");
    return;
  }
  const CpsVerdict v = find_cps(market, market.lambda * opts.lambda_prime_factor);
  if (!v.feasible)
    throw std::runtime_error(
        "no consistent price system for lambda' < lambda: robust no-arbitrage fails");
}

}  // namespace

Solution solve_frictional(const MarketSpec& market, const Utility& utility, double x,
                          const SolveOptions& opts) {
  if (!(x > 0.0)) throw std::invalid_argument("initial capital must be positive");
  check_frictional_preconditions(market, opts);

  const SolvencyCones cones = compute_solvency_cones(market);
  Ctx ctx{market, utility, cones, opts};

  Solution sol;
  sol.strategy.initial_cash = x;
  sol.strategy.dphi0.assign(market.tree.size(), 0.0);
  sol.strategy.dphi1.assign(market.tree.size(), 0.0);
  sol.cond_value.assign(market.tree.size(), 0.0);
  std::vector<double> gy0(market.tree.size(), 0.0), gy1(market.tree.size(), 0.0);

  sol.value = solve_rec(ctx, sol.strategy, sol.cond_value, gy0, gy1, market.tree.root(), x, 0.0);
  sol.evals = ctx.evals;
  sol.kkt_residual = ctx.kkt;
  sol.converged = std::isfinite(sol.value);
  if (!sol.converged) throw std::runtime_error("no admissible strategy with finite utility");
  return sol;
}

double conditional_value(const MarketSpec& market, const Utility& utility, int node,
                         double psi0, double psi1, const SolveOptions& opts) {
  if (node < 0 || node >= market.tree.size()) throw std::invalid_argument("unknown node");
  const SolvencyCones cones = compute_solvency_cones(market);
  Ctx ctx{market, utility, cones, opts};
  return value_rec(ctx, node, psi0, psi1);
}

void extract_gradients(const MarketSpec& market, const Utility& utility,
                       const SolvencyCones& cones, const Strategy& strategy, int node,
                       double psi0, double psi1, std::vector<double>& y0,
                       std::vector<double>& y1) {
  if (!strategy.matches(market.tree))
    throw std::invalid_argument("strategy shape does not match the tree");
  y0.assign(market.tree.size(), 0.0);
  y1.assign(market.tree.size(), 0.0);
  extract_rec(market, utility, cones, strategy, node, psi0, psi1, y0, y1, 1e-9);
}

MarginalValue marginal_value(const MarketSpec& market, const Utility& utility, double x,
                             const SolveOptions& opts) {
  MarginalValue mv;
  const Solution sol = solve_frictional(market, utility, x, opts);
  const SolvencyCones cones = compute_solvency_cones(market);
  std::vector<double> y0, y1;
  extract_gradients(market, utility, cones, sol.strategy, market.tree.root(), x, 0.0, y0, y1);
  mv.yhat = y0[market.tree.root()];

  SolveOptions fast = opts;
  fast.check_no_arbitrage = false;
  const double h = 1e-4 * x;
  const double up = solve_frictional(market, utility, x + h, fast).value;
  const double dn = solve_frictional(market, utility, x - h, fast).value;
  mv.finite_diff = (up - dn) / (2.0 * h);
  mv.rel_gap = std::abs(mv.yhat - mv.finite_diff) / std::max(std::abs(mv.finite_diff), 1e-12);
  return mv;
}

bool one_step_price_ok(const EventTree& tree, const std::vector<double>& price, int node,
                       double rel_tol) {
  const double s = price[node];
  const double tol = rel_tol * std::max(1.0, std::abs(s));
  bool up = false, down = false, moved = false;
  for (int c : tree.children(node)) {
    const double diff = price[c] - s;
    if (diff > tol) up = true;
    if (diff < -tol) down = true;
    if (std::abs(diff) > tol) moved = true;
  }
  return !moved || (up && down);
}

Solution solve_frictionless(const EventTree& tree, const std::vector<double>& price,
                            const Utility& utility, double x, const SolveOptions& opts) {
  if (!(x > 0.0)) throw std::invalid_argument("initial capital must be positive");
  if (static_cast<int>(price.size()) != tree.size())
    throw std::invalid_argument("price vector does not match the tree");
  for (double s : price)
    if (!(s > 0.0)) throw std::invalid_argument("price process must be strictly positive");
  if (opts.check_no_arbitrage)
    for (int i = 0; i < tree.size(); ++i)
      if (!tree.is_leaf(i) && !one_step_price_ok(tree, price, i))
        throw std::runtime_error("price process admits arbitrage at node '" + tree.node(i).id +
                                 "'");

  const bool is_log = utility.kind() == Utility::Kind::Log;
  const double p = utility.exponent();

  // Backward pass on the scale-free value profile: for log utility the
  // value is log(w) + c_u, for power utility (w^p / p) * k_u, so one scalar
  // line search per node suffices.
  std::vector<double> c_or_k(tree.size(), is_log ? 0.0 : 1.0);
  std::vector<double> frac(tree.size(), 0.0);  // optimal risky fraction of wealth
  double kkt = 0.0;
  long evals = 0;
  for (int u = tree.size() - 1; u >= 0; --u) {
    if (tree.is_leaf(u)) continue;
    std::vector<double> rho;  // relative one-step returns
    std::vector<double> pc, kc;
    double rho_max = 0.0, rho_min = 0.0;
    for (int c : tree.children(u)) {
      const double r = price[c] / price[u] - 1.0;
      rho.push_back(r);
      pc.push_back(tree.cond_prob(c));
      kc.push_back(c_or_k[c]);
      rho_max = std::max(rho_max, r);
      rho_min = std::min(rho_min, r);
    }
    double lo = rho_max > 0.0 ? -1.0 / rho_max : -1e12;
    double hi = rho_min < 0.0 ? -1.0 / rho_min : 1e12;
    auto objective = [&](double theta) {
      double v = 0.0;
      for (size_t i = 0; i < rho.size(); ++i) {
        const double growth = 1.0 + theta * rho[i];
        if (is_log) {
          if (!(growth > 0.0)) return -kInf;
          v += pc[i] * (std::log(growth) + kc[i]);
        } else {
          if (growth < 0.0) return -kInf;
          if (growth == 0.0 && p < 0.0) return -kInf;
          v += pc[i] * kc[i] * std::pow(growth, p) / p;
        }
      }
      return v;
    };
    const ScalarMaxResult r = golden_max(objective, lo, hi, opts.trade_tol);
    evals += r.evals;
    frac[u] = r.x;
    c_or_k[u] = is_log ? r.value : p * r.value;
    // Interior first-order condition residual (scale-free).
    double foc = 0.0, scale = 0.0;
    for (size_t i = 0; i < rho.size(); ++i) {
      const double growth = 1.0 + r.x * rho[i];
      if (!(growth > 0.0)) continue;
      const double term = is_log ? pc[i] * rho[i] / growth
                                 : pc[i] * kc[i] * rho[i] * std::pow(growth, p - 1.0);
      foc += term;
      scale += std::abs(term);
    }
    const double gap_lo = r.x - lo, gap_hi = hi - r.x;
    const double width = hi - lo;
    if (gap_lo > 1e-9 * width && gap_hi > 1e-9 * width)
      kkt = std::max(kkt, std::abs(foc) / (scale + 1e-300));
  }

  // Forward pass: wealth and trades.
  Solution sol;
  sol.strategy.initial_cash = x;
  sol.strategy.dphi0.assign(tree.size(), 0.0);
  sol.strategy.dphi1.assign(tree.size(), 0.0);
  sol.cond_value.assign(tree.size(), 0.0);
  std::vector<double> wealth(tree.size(), 0.0), post(tree.size(), 0.0);
  double value = 0.0;
  for (int u = 0; u < tree.size(); ++u) {
    const int par = tree.parent(u);
    wealth[u] = par < 0 ? x : wealth[par] + post[par] * (price[u] - price[par]);
    sol.cond_value[u] = is_log ? std::log(std::max(wealth[u], 1e-300)) + c_or_k[u]
                               : std::pow(std::max(wealth[u], 1e-300), p) / p * c_or_k[u];
    const double prev = par < 0 ? 0.0 : post[par];
    if (tree.is_leaf(u)) {
      post[u] = 0.0;
      sol.strategy.dphi1[u] = -prev;
      sol.strategy.dphi0[u] = prev * price[u];
      value += tree.uncond_prob(u) * utility.value_or_neg_inf(wealth[u]);
    } else {
      post[u] = frac[u] * wealth[u] / price[u];
      sol.strategy.dphi1[u] = post[u] - prev;
      sol.strategy.dphi0[u] = -(post[u] - prev) * price[u];
    }
  }
  sol.value = value;
  sol.kkt_residual = kkt;
  sol.evals = evals;
  sol.converged = std::isfinite(value);
  return sol;
}

}  // namespace bidask

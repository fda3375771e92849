#include "bidask/cps.hpp"

#include <cmath>
#include <stdexcept>

#include "bidask/dual_solver.hpp"
#include "bidask/optim.hpp"

namespace bidask {

CpsVerdict find_cps(const MarketSpec& market, double lambda_prime, double margin_tol) {
  if (lambda_prime < 0.0 || lambda_prime > market.lambda + 1e-15)
    throw std::invalid_argument("lambda' must lie in [0, lambda]");
  const EventTree& tree = market.tree;
  const int n_leaves = static_cast<int>(tree.leaves().size());
  const int n_vars = 2 * n_leaves + 1;  // z0 per leaf, z1 per leaf, margin

  std::vector<int> leaf_pos(tree.size(), -1);
  for (int i = 0; i < n_leaves; ++i) leaf_pos[tree.leaves()[i]] = i;

  // Leaf weights P(l | u) for every node u; martingale node values are then
  // linear in the leaf variables, so the martingale property is built in.
  std::vector<LpConstraint> rows;
  for (int u = 0; u < tree.size(); ++u) {
    std::vector<double> w(n_leaves, 0.0);
    std::vector<int> stack = {u};
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      if (leaf_pos[v] >= 0) w[leaf_pos[v]] = tree.uncond_prob(v) / tree.uncond_prob(u);
      for (int c : tree.children(v)) stack.push_back(c);
    }
    const double lo = (1.0 - lambda_prime) * tree.ask(u);
    const double hi = tree.ask(u);

    LpConstraint spread_lo;  // E[z1|u] >= lo * E[z0|u]
    spread_lo.coeffs.assign(n_vars, 0.0);
    for (int i = 0; i < n_leaves; ++i) {
      spread_lo.coeffs[n_leaves + i] = w[i];
      spread_lo.coeffs[i] = -lo * w[i];
    }
    spread_lo.type = '>';
    rows.push_back(spread_lo);

    LpConstraint spread_hi;  // E[z1|u] <= hi * E[z0|u]
    spread_hi.coeffs.assign(n_vars, 0.0);
    for (int i = 0; i < n_leaves; ++i) {
      spread_hi.coeffs[n_leaves + i] = w[i];
      spread_hi.coeffs[i] = -hi * w[i];
    }
    spread_hi.type = '<';
    rows.push_back(spread_hi);

    LpConstraint floor;  // E[z0|u] >= margin
    floor.coeffs.assign(n_vars, 0.0);
    for (int i = 0; i < n_leaves; ++i) floor.coeffs[i] = w[i];
    floor.coeffs[n_vars - 1] = -1.0;
    floor.type = '>';
    rows.push_back(floor);
  }
  LpConstraint norm;  // Z0 at the root is one
  norm.coeffs.assign(n_vars, 0.0);
  for (int i = 0; i < n_leaves; ++i) norm.coeffs[i] = tree.uncond_prob(tree.leaves()[i]);
  norm.type = '=';
  norm.rhs = 1.0;
  rows.push_back(norm);

  std::vector<double> objective(n_vars, 0.0);
  objective[n_vars - 1] = 1.0;  // maximize the margin

  const LpResult lp = solve_lp(objective, rows);
  CpsVerdict verdict;
  if (lp.status != LpStatus::Optimal) return verdict;
  verdict.margin = lp.objective;
  verdict.feasible = lp.objective > margin_tol;
  if (!verdict.feasible) return verdict;

  verdict.system.z0.assign(tree.size(), 0.0);
  verdict.system.z1.assign(tree.size(), 0.0);
  for (int u = tree.size() - 1; u >= 0; --u) {
    if (tree.is_leaf(u)) {
      verdict.system.z0[u] = lp.x[leaf_pos[u]];
      verdict.system.z1[u] = lp.x[n_leaves + leaf_pos[u]];
      continue;
    }
    for (int c : tree.children(u)) {
      verdict.system.z0[u] += tree.cond_prob(c) * verdict.system.z0[c];
      verdict.system.z1[u] += tree.cond_prob(c) * verdict.system.z1[c];
    }
  }
  verdict.system.margin = verdict.margin;
  return verdict;
}

MartingaleReport is_martingale(const EventTree& tree, const std::vector<double>& values,
                               double tol) {
  if (static_cast<int>(values.size()) != tree.size())
    throw std::invalid_argument("value vector does not match the tree");
  MartingaleReport rep;
  for (int u = 0; u < tree.size(); ++u) {
    if (tree.is_leaf(u)) continue;
    double e = 0.0;
    for (int c : tree.children(u)) e += tree.cond_prob(c) * values[c];
    const double drift = std::abs(e - values[u]) / std::max(1.0, std::abs(values[u]));
    if (drift > rep.max_drift) {
      rep.max_drift = drift;
      rep.worst_node = u;
    }
  }
  rep.ok = rep.max_drift <= tol;
  return rep;
}

CpsDualResult dual_value_via_cps(const MarketSpec& market, const Utility& utility, double y) {
  DualOptions opts;
  const DualSolution sol = dual_value_constrained(market, utility, y, opts,
                                                  /*martingale_only=*/true);
  CpsDualResult res;
  res.converged = sol.converged;
  res.value = sol.value;
  res.system.z0.resize(market.tree.size());
  res.system.z1.resize(market.tree.size());
  double min_z0 = sol.converged ? 1.0 / 0.0 : 0.0;
  for (int u = 0; u < market.tree.size(); ++u) {
    res.system.z0[u] = sol.deflator.y0[u] / y;
    res.system.z1[u] = sol.deflator.y1[u] / y;
    min_z0 = std::min(min_z0, res.system.z0[u]);
  }
  res.system.margin = min_z0;
  return res;
}

}  // namespace bidask

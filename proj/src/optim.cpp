#include "bidask/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bidask {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

ScalarMaxResult golden_max(const std::function<double(double)>& f, double lo, double hi,
                           double x_tol, int max_iter, double value_tie_tol) {
  ScalarMaxResult res;
  if (!(hi >= lo)) throw std::invalid_argument("golden_max: empty bracket");
  if (hi == lo) {
    res.x = lo;
    res.value = f(lo);
    res.evals = 1;
    return res;
  }
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  res.evals = 2;
  for (int i = 0; i < max_iter && (b - a) > x_tol; ++i) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
    ++res.evals;
  }
  res.x = fc >= fd ? c : d;
  res.value = std::max(fc, fd);

  // Endpoints can carry the maximum when the optimum is a boundary point.
  for (double e : {lo, hi}) {
    const double fe = f(e);
    ++res.evals;
    if (fe > res.value) {
      res.value = fe;
      res.x = e;
    }
  }
  // Prefer the no-move point on ties (flat objectives).
  if (lo <= 0.0 && hi >= 0.0 && res.x != 0.0) {
    const double f0 = f(0.0);
    ++res.evals;
    if (f0 >= res.value - value_tie_tol * (1.0 + std::abs(res.value))) {
      res.value = std::max(res.value, f0);
      res.x = 0.0;
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Simplex
// ---------------------------------------------------------------------------

namespace {

struct Tableau {
  int rows = 0, cols = 0;  // cols includes RHS
  std::vector<double> t;
  double& at(int r, int c) { return t[r * cols + c]; }
};

// Bland's rule pivoting on rows 0..m-1 with objective in row m.
// Returns false when unbounded.
bool run_simplex(Tableau& tb, std::vector<int>& basis, int m, int ncols, double tol = 1e-11) {
  for (int iter = 0; iter < 20000; ++iter) {
    int pivot_col = -1;
    for (int j = 0; j < ncols; ++j) {
      if (tb.at(m, j) > tol) {  // entering improves (maximization row stores c - z)
        pivot_col = j;
        break;
      }
    }
    if (pivot_col < 0) return true;
    int pivot_row = -1;
    double best = kInf;
    for (int r = 0; r < m; ++r) {
      const double a = tb.at(r, pivot_col);
      if (a > tol) {
        const double ratio = tb.at(r, ncols) / a;
        if (ratio < best - tol || (std::abs(ratio - best) <= tol &&
                                   (pivot_row < 0 || basis[r] < basis[pivot_row]))) {
          best = ratio;
          pivot_row = r;
        }
      }
    }
    if (pivot_row < 0) return false;  // unbounded
    const double piv = tb.at(pivot_row, pivot_col);
    for (int j = 0; j <= ncols; ++j) tb.at(pivot_row, j) /= piv;
    for (int r = 0; r <= m; ++r) {
      if (r == pivot_row) continue;
      const double factor = tb.at(r, pivot_col);
      if (factor == 0.0) continue;
      for (int j = 0; j <= ncols; ++j) tb.at(r, j) -= factor * tb.at(pivot_row, j);
    }
    basis[pivot_row] = pivot_col;
  }
  throw std::runtime_error("simplex did not terminate");
}

}  // namespace

LpResult solve_lp(const std::vector<double>& c, const std::vector<LpConstraint>& rows_in) {
  const int n = static_cast<int>(c.size());
  const int m = static_cast<int>(rows_in.size());

  // Normalize RHS signs.
  std::vector<LpConstraint> rows = rows_in;
  for (LpConstraint& r : rows) {
    if (static_cast<int>(r.coeffs.size()) != n)
      throw std::invalid_argument("LP row width mismatch");
    if (r.rhs < 0.0) {
      for (double& a : r.coeffs) a = -a;
      r.rhs = -r.rhs;
      if (r.type == '<')
        r.type = '>';
      else if (r.type == '>')
        r.type = '<';
    }
  }

  int n_slack = 0, n_art = 0;
  for (const LpConstraint& r : rows) {
    if (r.type == '<')
      ++n_slack;
    else if (r.type == '>')
      ++n_art, ++n_slack;
    else
      ++n_art;
  }
  const int ncols = n + n_slack + n_art;

  Tableau tb;
  tb.rows = m + 1;
  tb.cols = ncols + 1;
  tb.t.assign(static_cast<size_t>(tb.rows) * tb.cols, 0.0);

  std::vector<int> basis(m, -1);
  std::vector<bool> artificial(ncols, false);
  int slack_at = n, art_at = n + n_slack;
  for (int r = 0; r < m; ++r) {
    for (int j = 0; j < n; ++j) tb.at(r, j) = rows[r].coeffs[j];
    tb.at(r, ncols) = rows[r].rhs;
    if (rows[r].type == '<') {
      tb.at(r, slack_at) = 1.0;
      basis[r] = slack_at++;
    } else if (rows[r].type == '>') {
      tb.at(r, slack_at++) = -1.0;
      tb.at(r, art_at) = 1.0;
      artificial[art_at] = true;
      basis[r] = art_at++;
    } else {
      tb.at(r, art_at) = 1.0;
      artificial[art_at] = true;
      basis[r] = art_at++;
    }
  }

  LpResult res;
  if (n_art > 0) {
    // Phase 1: maximize -(sum of artificials).
    for (int j = 0; j < ncols; ++j)
      if (artificial[j]) tb.at(m, j) = -1.0;
    for (int r = 0; r < m; ++r)
      if (artificial[basis[r]])
        for (int j = 0; j <= ncols; ++j) tb.at(m, j) += tb.at(r, j);
    if (!run_simplex(tb, basis, m, ncols)) throw std::runtime_error("phase-1 unbounded");
    if (tb.at(m, ncols) > 1e-8) {
      res.status = LpStatus::Infeasible;
      return res;
    }
    // Drive remaining artificials out of the basis when possible.
    for (int r = 0; r < m; ++r) {
      if (!artificial[basis[r]]) continue;
      int j = 0;
      for (; j < ncols; ++j)
        if (!artificial[j] && std::abs(tb.at(r, j)) > 1e-9) break;
      if (j < ncols) {
        const double piv = tb.at(r, j);
        for (int k = 0; k <= ncols; ++k) tb.at(r, k) /= piv;
        for (int r2 = 0; r2 <= m; ++r2) {
          if (r2 == r) continue;
          const double factor = tb.at(r2, j);
          if (factor == 0.0) continue;
          for (int k = 0; k <= ncols; ++k) tb.at(r2, k) -= factor * tb.at(r, k);
        }
        basis[r] = j;
      }
    }
  }

  // Phase 2 objective.
  for (int j = 0; j <= ncols; ++j) tb.at(m, j) = 0.0;
  for (int j = 0; j < n; ++j) tb.at(m, j) = c[j];
  for (int j = 0; j < ncols; ++j)
    if (artificial[j]) tb.at(m, j) = -1e30;  // keep artificials out
  for (int r = 0; r < m; ++r) {
    const double cb = tb.at(m, basis[r]);
    if (cb == 0.0) continue;
    for (int j = 0; j <= ncols; ++j) tb.at(m, j) -= cb * tb.at(r, j);
  }
  if (!run_simplex(tb, basis, m, ncols)) {
    res.status = LpStatus::Unbounded;
    return res;
  }

  res.status = LpStatus::Optimal;
  res.x.assign(n, 0.0);
  for (int r = 0; r < m; ++r)
    if (basis[r] < n) res.x[basis[r]] = tb.at(r, ncols);
  res.objective = 0.0;
  for (int j = 0; j < n; ++j) res.objective += c[j] * res.x[j];
  return res;
}

// ---------------------------------------------------------------------------
// Barrier interior-point method
// ---------------------------------------------------------------------------

namespace {

double conjugate_second(const Utility& u, double y) {
  if (u.kind() == Utility::Kind::Log) return 1.0 / (y * y);
  const double q = u.exponent() / (u.exponent() - 1.0);
  return (1.0 - q) * std::pow(y, q - 2.0);
}

double objective_value(const IpmProblem& prob, const Eigen::VectorXd& v) {
  double f = 0.0;
  for (const SeparableTerm& t : prob.terms) f += t.weight * prob.utility.conjugate(v[t.index]);
  return f;
}

bool in_domain(const IpmProblem& prob, const Eigen::VectorXd& v, const Eigen::VectorXd& slack) {
  for (const SeparableTerm& t : prob.terms)
    if (!(v[t.index] > 0.0)) return false;
  return (slack.array() > 0.0).all();
}

}  // namespace

IpmResult solve_ipm(const IpmProblem& prob, const Eigen::VectorXd& v0, const IpmOptions& opts) {
  const int n = prob.n;
  const int mi = static_cast<int>(prob.G.rows());
  const int me = static_cast<int>(prob.Aeq.rows());

  IpmResult res;
  res.v = v0;

  Eigen::VectorXd slack = prob.h - prob.G * res.v;
  if (!in_domain(prob, res.v, slack)) return res;  // needs a strictly feasible start
  if (me > 0 && (prob.Aeq * res.v - prob.beq).cwiseAbs().maxCoeff() > 1e-9) return res;

  double t = opts.t0;
  const int kkt_n = n + me;
  Eigen::MatrixXd kkt(kkt_n, kkt_n);
  Eigen::VectorXd rhs(kkt_n);

  auto barrier = [&](const Eigen::VectorXd& v) {
    const Eigen::VectorXd s = prob.h - prob.G * v;
    if (!in_domain(prob, v, s)) return kInf;
    double val = t * objective_value(prob, v);
    val -= s.array().log().sum();
    return val;
  };

  while (true) {
    for (int inner = 0; inner < opts.max_newton; ++inner) {
      slack = prob.h - prob.G * res.v;
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(n);
      Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(n, n);
      for (const SeparableTerm& term : prob.terms) {
        const double y = res.v[term.index];
        grad[term.index] += t * term.weight * prob.utility.conjugate_prime(y);
        hess(term.index, term.index) += t * term.weight * conjugate_second(prob.utility, y);
      }
      const Eigen::VectorXd inv_s = slack.cwiseInverse();
      grad += prob.G.transpose() * inv_s;
      // hess += G' diag(1/s^2) G
      hess.noalias() += prob.G.transpose() * inv_s.array().square().matrix().asDiagonal() * prob.G;
      for (int i = 0; i < n; ++i) hess(i, i) += 1e-13;  // ridge for flat directions

      kkt.setZero();
      kkt.topLeftCorner(n, n) = hess;
      if (me > 0) {
        kkt.topRightCorner(n, me) = prob.Aeq.transpose();
        kkt.bottomLeftCorner(me, n) = prob.Aeq;
      }
      rhs.head(n) = -grad;
      rhs.tail(me).setZero();

      Eigen::VectorXd sol = kkt.partialPivLu().solve(rhs);
      const Eigen::VectorXd dv = sol.head(n);
      const double decrement = -grad.dot(dv);
      if (!(decrement > 0.0) || decrement < 2e-13) break;

      double alpha = 1.0;
      const double b0 = barrier(res.v);
      for (int ls = 0; ls < 70; ++ls) {
        const Eigen::VectorXd cand = res.v + alpha * dv;
        const double bc = barrier(cand);
        if (bc < b0 - 1e-4 * alpha * decrement) {
          res.v = cand;
          break;
        }
        alpha *= 0.5;
        if (ls == 69) alpha = 0.0;
      }
      ++res.newton_steps;
      if (alpha == 0.0) break;
    }
    res.gap = static_cast<double>(mi) / t;
    if (res.gap < opts.gap_tol) break;
    t *= opts.mu;
  }
  res.value = objective_value(prob, res.v);
  res.converged = true;
  return res;
}

}  // namespace bidask

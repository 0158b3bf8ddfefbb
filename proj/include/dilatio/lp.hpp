#pragma once

// Dense two-phase simplex with Bland's rule. Problem sizes here are a few
// hundred variables at most (deterministic-atom decompositions), so a plain
// tableau is adequate and easy to certify.

#include <Eigen/Dense>
#include <limits>
#include <vector>

#include "dilatio/tensor.hpp"

namespace dilatio {

struct LinearProgram {
  RVector objective;         // coefficients c
  bool maximize = false;     // default: minimize
  RMatrix eq_lhs;            // A x = rhs
  RVector eq_rhs;
  RVector lower, upper;      // per-variable bounds; +-inf allowed

  static LinearProgram minimize(const RVector& c) {
    LinearProgram p;
    p.objective = c;
    p.lower = RVector::Zero(c.size());
    p.upper = RVector::Constant(c.size(), std::numeric_limits<double>::infinity());
    p.eq_lhs = RMatrix::Zero(0, c.size());
    p.eq_rhs = RVector::Zero(0);
    return p;
  }
};

enum class LpStatus { optimal, infeasible, unbounded, failed };

struct LpResult {
  LpStatus status = LpStatus::failed;
  RVector x;
  RVector dual;            // multipliers of the equality rows
  double objective = 0;
  double duality_gap = 0;  // |c'x - y'b| on the standard-form problem
  int iterations = 0;
};

namespace lpdetail {

constexpr double kPivEps = 1e-9;

// min c'x s.t. Ax = b, x >= 0 by two-phase tableau simplex, Bland's rule.
struct StdSimplex {
  RMatrix a;
  RVector b, c;
  int m, n;
  std::vector<int> basis;
  int iterations = 0;

  StdSimplex(RMatrix a_, RVector b_, RVector c_)
      : a(std::move(a_)), b(std::move(b_)), c(std::move(c_)) {
    m = static_cast<int>(a.rows());
    n = static_cast<int>(a.cols());
    for (int i = 0; i < m; ++i)
      if (b(i) < 0) { a.row(i) = -a.row(i); b(i) = -b(i); }
  }

  // One simplex run over tableau T (m+1 rows: constraint rows + cost row).
  // Returns false if unbounded.
  bool run(RMatrix& t, int ncols) {
    const int max_iter = 50000;
    while (true) {
      if (++iterations > max_iter) throw std::runtime_error("simplex: iteration limit");
      int enter = -1;
      for (int j = 0; j < ncols; ++j)
        if (t(m, j) < -kPivEps) { enter = j; break; } // Bland: smallest index
      if (enter < 0) return true;
      int leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m; ++i) {
        if (t(i, enter) > kPivEps) {
          double ratio = t(i, ncols) / t(i, enter);
          if (ratio < best - 1e-12 ||
              (ratio < best + 1e-12 && (leave < 0 || basis[static_cast<size_t>(i)] <
                                                         basis[static_cast<size_t>(leave)]))) {
            best = ratio;
            leave = i;
          }
        }
      }
      if (leave < 0) return false;
      pivot(t, ncols, leave, enter);
    }
  }

  void pivot(RMatrix& t, int ncols, int row, int col) {
    t.row(row) /= t(row, col);
    for (int i = 0; i <= m; ++i)
      if (i != row && std::abs(t(i, col)) > 0) t.row(i) -= t(i, col) * t.row(row);
    basis[static_cast<size_t>(row)] = col;
  }

  LpResult solve() {
    LpResult res;
    // Phase 1: artificials.
    RMatrix t = RMatrix::Zero(m + 1, n + m + 1);
    t.block(0, 0, m, n) = a;
    t.block(0, n, m, m) = RMatrix::Identity(m, m);
    t.col(n + m).head(m) = b;
    basis.resize(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i) basis[static_cast<size_t>(i)] = n + i;
    // cost row = negated sum of constraint rows (minimises the artificials)
    for (int i = 0; i < m; ++i) t.row(m) -= t.row(i);
    for (int i = n; i < n + m; ++i) t(m, i) = 0;
    if (!run(t, n + m)) { res.status = LpStatus::failed; return res; }
    double phase1 = -t(m, n + m);
    if (phase1 > 1e-7) { res.status = LpStatus::infeasible; return res; }
    // Drive remaining artificials out of the basis where possible.
    for (int i = 0; i < m; ++i) {
      if (basis[static_cast<size_t>(i)] >= n) {
        int col = -1;
        for (int j = 0; j < n; ++j)
          if (std::abs(t(i, j)) > kPivEps) { col = j; break; }
        if (col >= 0) pivot(t, n + m, i, col);
      }
    }

    // Phase 2: real objective on the current basis.
    RMatrix t2 = RMatrix::Zero(m + 1, n + 1);
    t2.block(0, 0, m, n) = t.block(0, 0, m, n);
    t2.col(n).head(m) = t.col(n + m).head(m);
    for (int j = 0; j < n; ++j) t2(m, j) = c(j);
    for (int i = 0; i < m; ++i) {
      int bj = basis[static_cast<size_t>(i)];
      if (bj < n && std::abs(t2(m, bj)) > 0) t2.row(m) -= t2(m, bj) * t2.row(i);
    }
    if (!run(t2, n)) { res.status = LpStatus::unbounded; return res; }

    res.x = RVector::Zero(n);
    for (int i = 0; i < m; ++i)
      if (basis[static_cast<size_t>(i)] < n) res.x(basis[static_cast<size_t>(i)]) = t2(i, n);
    res.objective = c.dot(res.x);

    // Duals: solve B' y = c_B on the final basis.
    RMatrix bmat(m, m);
    RVector cb(m);
    for (int i = 0; i < m; ++i) {
      int bj = basis[static_cast<size_t>(i)];
      if (bj < n) bmat.col(i) = a.col(bj);
      else bmat.col(i) = RVector::Unit(m, bj - n);
      cb(i) = (bj < n) ? c(bj) : 0.0;
    }
    res.dual = bmat.transpose().fullPivLu().solve(cb);
    res.duality_gap = std::abs(res.objective - res.dual.dot(b));
    res.status = LpStatus::optimal;
    res.iterations = iterations;
    return res;
  }
};

} // namespace lpdetail

// Solves the bounded-variable program by translation to standard form:
// finite lower bounds are shifted out, finite uppers become slack rows,
// free variables are split.
inline LpResult lp_solve(const LinearProgram& p) {
  const int n = static_cast<int>(p.objective.size());
  const double inf = std::numeric_limits<double>::infinity();
  RVector lo = p.lower.size() ? p.lower : RVector::Zero(n);
  RVector hi = p.upper.size() ? p.upper : RVector::Constant(n, inf);

  // Standard-form variable list: for each original var either one shifted
  // nonneg var (finite lower) or a split pair (free).
  std::vector<int> pos(static_cast<size_t>(n)), neg(static_cast<size_t>(n), -1);
  int ns = 0;
  for (int j = 0; j < n; ++j) {
    pos[static_cast<size_t>(j)] = ns++;
    if (!std::isfinite(lo(j))) neg[static_cast<size_t>(j)] = ns++;
  }
  std::vector<int> ub_rows;
  for (int j = 0; j < n; ++j)
    if (std::isfinite(hi(j))) ub_rows.push_back(j);
  const int m0 = static_cast<int>(p.eq_lhs.rows());
  const int m = m0 + static_cast<int>(ub_rows.size());
  const int ntot = ns + static_cast<int>(ub_rows.size());

  RMatrix a = RMatrix::Zero(m, ntot);
  RVector b = RVector::Zero(m);
  RVector c = RVector::Zero(ntot);
  RVector shift = RVector::Zero(n);
  for (int j = 0; j < n; ++j) shift(j) = std::isfinite(lo(j)) ? lo(j) : 0.0;

  for (int i = 0; i < m0; ++i) {
    for (int j = 0; j < n; ++j) {
      a(i, pos[static_cast<size_t>(j)]) = p.eq_lhs(i, j);
      if (neg[static_cast<size_t>(j)] >= 0) a(i, neg[static_cast<size_t>(j)]) = -p.eq_lhs(i, j);
    }
    b(i) = p.eq_rhs(i) - p.eq_lhs.row(i).dot(shift);
  }
  for (size_t k = 0; k < ub_rows.size(); ++k) {
    int j = ub_rows[k];
    int row = m0 + static_cast<int>(k);
    a(row, pos[static_cast<size_t>(j)]) = 1.0;
    if (neg[static_cast<size_t>(j)] >= 0) a(row, neg[static_cast<size_t>(j)]) = -1.0;
    a(row, ns + static_cast<int>(k)) = 1.0;
    b(row) = hi(j) - shift(j);
  }
  const double sign = p.maximize ? -1.0 : 1.0;
  for (int j = 0; j < n; ++j) {
    c(pos[static_cast<size_t>(j)]) = sign * p.objective(j);
    if (neg[static_cast<size_t>(j)] >= 0) c(neg[static_cast<size_t>(j)]) = -sign * p.objective(j);
  }

  lpdetail::StdSimplex simplex(a, b, c);
  LpResult std_res = simplex.solve();
  LpResult res;
  res.status = std_res.status;
  res.iterations = std_res.iterations;
  if (std_res.status != LpStatus::optimal) return res;

  res.x = RVector::Zero(n);
  for (int j = 0; j < n; ++j) {
    double v = std_res.x(pos[static_cast<size_t>(j)]);
    if (neg[static_cast<size_t>(j)] >= 0) v -= std_res.x(neg[static_cast<size_t>(j)]);
    res.x(j) = v + shift(j);
  }
  res.objective = p.objective.dot(res.x);
  res.dual = sign * std_res.dual.head(m0);
  res.duality_gap = std_res.duality_gap;
  res.status = LpStatus::optimal;
  return res;
}

} // namespace dilatio

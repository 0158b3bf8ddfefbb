#pragma once

// Dense primal-dual path-following SDP solver with Nesterov-Todd scaling and
// a Mehrotra-style corrector, for block problems
//   min <C,X>  s.t.  <A_k,X> = b_k,  X >= 0 (block diagonal).
// Blocks are real symmetric; complex Hermitian data enters through the
// standard 2n x 2n realification (see realify below).  The Schur complement
// is assembled from the sparse row structure of A_k W, which keeps the
// constraint matrices' sparsity effective.

#include <Eigen/Dense>
#include <map>
#include <set>
#include <vector>

#include "dilatio/tensor.hpp"

namespace dilatio {

// Sparse symmetric matrix over the block structure; entries with r != c are
// understood to appear mirrored.
struct BlockEntry {
  int block = 0;
  int row = 0, col = 0;
  double value = 0;
};

struct BlockMatrix {
  std::vector<BlockEntry> entries;

  void add(int block, int r, int c, double v) {
    if (v != 0.0) entries.push_back({block, r, c, v});
  }

  std::vector<RMatrix> dense(const std::vector<int>& block_dims) const {
    std::vector<RMatrix> out;
    for (int d : block_dims) out.push_back(RMatrix::Zero(d, d));
    for (const auto& e : entries) {
      out[static_cast<size_t>(e.block)](e.row, e.col) += e.value;
      if (e.row != e.col) out[static_cast<size_t>(e.block)](e.col, e.row) += e.value;
    }
    return out;
  }

  double inner(const std::vector<RMatrix>& x) const {
    double s = 0;
    for (const auto& e : entries) {
      s += e.value * x[static_cast<size_t>(e.block)](e.row, e.col);
      if (e.row != e.col) s += e.value * x[static_cast<size_t>(e.block)](e.col, e.row);
    }
    return s;
  }
};

struct SDProgram {
  std::vector<int> block_dims;
  BlockMatrix objective;                 // C
  std::vector<BlockMatrix> constraints;  // A_k
  RVector rhs;                           // b
};

enum class SdpStatus { optimal, infeasible, max_iterations, failed };

struct SdpResult {
  SdpStatus status = SdpStatus::failed;
  std::vector<RMatrix> x;  // primal blocks
  std::vector<RMatrix> z;  // dual slack blocks
  RVector y;               // dual multipliers
  double primal_objective = 0;
  double dual_objective = 0;
  double gap = 0;              // |<C,X> - b'y| / (1 + |obj|)
  double primal_residual = 0;  // ||A(X) - b||
  double dual_residual = 0;    // ||C - A*(y) - Z||_F
  int iterations = 0;
};

struct SdpOptions {
  int max_iterations = 200;
  double tol = 1e-9;
  double step_fraction = 0.98;
};

namespace sdpdetail {

// Largest alpha in (0,1] with X + alpha*D > 0, by bisection on Cholesky.
inline double max_step(const std::vector<RMatrix>& x, const std::vector<RMatrix>& d) {
  auto ok = [&](double a) {
    for (size_t b = 0; b < x.size(); ++b) {
      RMatrix t = x[b] + a * d[b];
      Eigen::LLT<RMatrix> llt(t);
      if (llt.info() != Eigen::Success) return false;
    }
    return true;
  };
  if (ok(1.0)) return 1.0;
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 30; ++i) {
    double mid = (lo + hi) / 2;
    (ok(mid) ? lo : hi) = mid;
  }
  return lo;
}

// NT scaling point via Cholesky factors: X = Rx' Rx, Z = Rz' Rz,
// Rz Rx' = U S V', then W = Rx' V S^-1 V' Rx satisfies W Z W = X.
inline bool nt_scaling(const RMatrix& x, const RMatrix& z, RMatrix& w) {
  auto chol_u = [](const RMatrix& a, RMatrix& u) {
    Eigen::LLT<RMatrix> llt(a);
    if (llt.info() == Eigen::Success) { u = llt.matrixU(); return true; }
    const double delta = std::max(1e-14, 1e-13 * a.trace());
    Eigen::LLT<RMatrix> reg(a + delta * RMatrix::Identity(a.rows(), a.cols()));
    if (reg.info() != Eigen::Success) return false;
    u = reg.matrixU();
    return true;
  };
  RMatrix rx, rz; // X = rx' rx
  if (!chol_u(x, rx) || !chol_u(z, rz)) return false;
  Eigen::BDCSVD<RMatrix> svd(rz * rx.transpose(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  RMatrix mid = svd.matrixV() * svd.singularValues().cwiseInverse().asDiagonal() *
                svd.matrixV().transpose();
  w = rx.transpose() * mid * rx;
  w = (w + w.transpose()) / 2;
  return true;
}

// Row-sparse product P = A W for a symmetric sparse A: only the rows touched
// by entries of A are nonzero.
struct SparseRows {
  std::vector<int> rows;  // global row ids within the block
  RMatrix data;           // |rows| x n
};

} // namespace sdpdetail

inline SdpResult sdp_solve(const SDProgram& p, const SdpOptions& opts = {}) {
  using namespace sdpdetail;
  const int m = static_cast<int>(p.constraints.size());
  const size_t nb = p.block_dims.size();
  SdpResult res;

  std::vector<RMatrix> cmat = p.objective.dense(p.block_dims);

  double data_scale = 1.0;
  for (const auto& c : cmat) data_scale = std::max(data_scale, c.cwiseAbs().maxCoeff());
  double b_scale = p.rhs.size() ? std::max(1.0, p.rhs.cwiseAbs().maxCoeff()) : 1.0;

  std::vector<RMatrix> x, z;
  int ntot = 0;
  for (size_t b = 0; b < nb; ++b) {
    x.push_back(b_scale * RMatrix::Identity(p.block_dims[b], p.block_dims[b]));
    z.push_back(data_scale * RMatrix::Identity(p.block_dims[b], p.block_dims[b]));
    ntot += p.block_dims[b];
  }
  RVector y = RVector::Zero(m);
  double prev_gap = std::numeric_limits<double>::infinity();

  // per-constraint, per-block touched-row sets (for the P = A W products)
  std::vector<std::vector<std::pair<int, std::vector<int>>>> touched(static_cast<size_t>(m));
  for (int k = 0; k < m; ++k) {
    std::map<int, std::set<int>> per_block;
    for (const auto& e : p.constraints[static_cast<size_t>(k)].entries) {
      per_block[e.block].insert(e.row);
      per_block[e.block].insert(e.col);
    }
    for (auto& [b, rows] : per_block)
      touched[static_cast<size_t>(k)].emplace_back(b, std::vector<int>(rows.begin(), rows.end()));
  }

  auto apply_A = [&](const std::vector<RMatrix>& v) {
    RVector out(m);
    for (int k = 0; k < m; ++k) out(k) = p.constraints[static_cast<size_t>(k)].inner(v);
    return out;
  };
  auto apply_At = [&](const RVector& w) {
    std::vector<RMatrix> out;
    for (size_t b = 0; b < nb; ++b)
      out.push_back(RMatrix::Zero(p.block_dims[b], p.block_dims[b]));
    for (int k = 0; k < m; ++k)
      for (const auto& e : p.constraints[static_cast<size_t>(k)].entries) {
        out[static_cast<size_t>(e.block)](e.row, e.col) += w(k) * e.value;
        if (e.row != e.col) out[static_cast<size_t>(e.block)](e.col, e.row) += w(k) * e.value;
      }
    return out;
  };

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    res.iterations = iter + 1;
    RVector rp = p.rhs - apply_A(x);
    std::vector<RMatrix> at_y = apply_At(y);
    std::vector<RMatrix> rd(nb);
    double rd_norm = 0, gap_tr = 0;
    for (size_t b = 0; b < nb; ++b) {
      rd[b] = cmat[b] - at_y[b] - z[b];
      rd_norm += rd[b].squaredNorm();
      gap_tr += (x[b].cwiseProduct(z[b])).sum();
    }
    rd_norm = std::sqrt(rd_norm);
    const double mu = gap_tr / ntot;
    double pobj = 0;
    for (size_t b = 0; b < nb; ++b) pobj += cmat[b].cwiseProduct(x[b]).sum();
    const double dobj = p.rhs.size() ? p.rhs.dot(y) : 0.0;

    res.primal_residual = rp.norm();
    res.dual_residual = rd_norm;
    res.primal_objective = pobj;
    res.dual_objective = dobj;
    res.gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));

    // feasibility is solved through the Schur complement and floors around
    // 1e-8 of the data scale; the gap keeps contracting beyond that
    const double feas_scale = 1.0 + b_scale + data_scale;
    const double feas_tol = std::max(opts.tol * 50, 1e-9);
    if (res.primal_residual / feas_scale < feas_tol &&
        res.dual_residual / feas_scale < feas_tol && res.gap < opts.tol) {
      res.status = SdpStatus::optimal;
      break;
    }
    if (iter > 8 && res.gap < 1e4 * opts.tol && res.gap > 0.95 * prev_gap &&
        res.primal_residual / feas_scale < 1e-6) {
      res.status = SdpStatus::optimal; // accuracy floor reached
      break;
    }
    prev_gap = res.gap;

    std::vector<RMatrix> w(nb), zinv(nb);
    bool scaling_ok = true;
    for (size_t b = 0; b < nb; ++b) {
      if (!nt_scaling(x[b], z[b], w[b])) { scaling_ok = false; break; }
      Eigen::LLT<RMatrix> zl(z[b]);
      if (zl.info() != Eigen::Success) { scaling_ok = false; break; }
      zinv[b] = zl.solve(RMatrix::Identity(z[b].rows(), z[b].cols()));
      zinv[b] = (zinv[b] + zinv[b].transpose()) / 2;
    }
    if (!scaling_ok) {
      res.status = iter > 0 ? SdpStatus::max_iterations : SdpStatus::failed;
      break;
    }

    // Schur matrix M_kl = sum_b tr(A_k W A_l W) from the row-sparse P = A W
    std::vector<std::vector<SparseRows>> pk(static_cast<size_t>(m));
    for (int k = 0; k < m; ++k) {
      for (const auto& [b, rows] : touched[static_cast<size_t>(k)]) {
        SparseRows sr;
        sr.rows = rows;
        sr.data = RMatrix::Zero(static_cast<Eigen::Index>(rows.size()), p.block_dims[static_cast<size_t>(b)]);
        std::map<int, int> row_pos;
        for (size_t i = 0; i < rows.size(); ++i) row_pos[rows[i]] = static_cast<int>(i);
        for (const auto& e : p.constraints[static_cast<size_t>(k)].entries) {
          if (e.block != b) continue;
          sr.data.row(row_pos[e.row]) += e.value * w[static_cast<size_t>(b)].row(e.col);
          if (e.row != e.col) sr.data.row(row_pos[e.col]) += e.value * w[static_cast<size_t>(b)].row(e.row);
        }
        pk[static_cast<size_t>(k)].push_back(std::move(sr));
      }
    }
    RMatrix schur = RMatrix::Zero(m, m);
    for (int k = 0; k < m; ++k)
      for (int l = k; l < m; ++l) {
        double s = 0;
        size_t ik = 0, il = 0;
        const auto& tk = touched[static_cast<size_t>(k)];
        const auto& tl = touched[static_cast<size_t>(l)];
        while (ik < tk.size() && il < tl.size()) {
          if (tk[ik].first < tl[il].first) { ++ik; continue; }
          if (tl[il].first < tk[ik].first) { ++il; continue; }
          const auto& pa = pk[static_cast<size_t>(k)][ik];
          const auto& pb = pk[static_cast<size_t>(l)][il];
          // tr(Pa Pb) over the touched rows only
          for (size_t a = 0; a < pa.rows.size(); ++a)
            for (size_t c = 0; c < pb.rows.size(); ++c)
              s += pa.data(static_cast<Eigen::Index>(a), pb.rows[c]) *
                   pb.data(static_cast<Eigen::Index>(c), pa.rows[a]);
          ++ik;
          ++il;
        }
        schur(k, l) = s;
        schur(l, k) = s;
      }
    // tiny diagonal regularisation keeps the factorisation usable on the
    // increasingly ill-conditioned late iterations
    const double schur_reg = 1e-13 * std::max(1.0, schur.diagonal().cwiseAbs().maxCoeff());
    schur.diagonal().array() += schur_reg;
    Eigen::LDLT<RMatrix> ldlt(schur);
    if (ldlt.info() != Eigen::Success) {
      res.status = iter > 0 ? SdpStatus::max_iterations : SdpStatus::failed;
      break;
    }

    // eliminate dZ = rd - A*(dy) and dX = rc - W dZ W; the Schur system
    // M dy = rp - A(rc - W rd W) is re-solved per centering target
    std::vector<RMatrix> wrdw(nb);
    for (size_t b = 0; b < nb; ++b) wrdw[b] = w[b] * rd[b] * w[b];
    auto solve_direction = [&](const std::vector<RMatrix>& rc, std::vector<RMatrix>& dx,
                          std::vector<RMatrix>& dz, RVector& dy) {
      RVector rhs(m);
      for (int k = 0; k < m; ++k) {
        double s = rp(k);
        for (const auto& e : p.constraints[static_cast<size_t>(k)].entries) {
          const size_t b = static_cast<size_t>(e.block);
          const double term = rc[b](e.row, e.col) - wrdw[b](e.row, e.col);
          const double term2 = rc[b](e.col, e.row) - wrdw[b](e.col, e.row);
          s -= e.value * term;
          if (e.row != e.col) s -= e.value * term2;
        }
        rhs(k) = s;
      }
      dy = ldlt.solve(rhs);
      dy += ldlt.solve(rhs - schur * dy); // one refinement pass
      std::vector<RMatrix> at_dy = apply_At(dy);
      dx.resize(nb);
      dz.resize(nb);
      for (size_t b = 0; b < nb; ++b) {
        dz[b] = rd[b] - at_dy[b];
        dx[b] = rc[b] - w[b] * dz[b] * w[b];
        dx[b] = (dx[b] + dx[b].transpose()) / 2;
        dz[b] = (dz[b] + dz[b].transpose()) / 2;
      }
    };
    // adaptive centering: aggressive while far from the path, conservative
    // near the optimum (the plain direction is robust on degenerate faces,
    // where Mehrotra correctors tend to stall)
    const double sigma = (iter < 2) ? 0.5 : std::min(0.5, 0.3 * std::sqrt(res.gap) + 0.02);
    std::vector<RMatrix> rc(nb), dx, dz;
    RVector dy;
    for (size_t b = 0; b < nb; ++b) rc[b] = sigma * mu * zinv[b] - x[b];
    solve_direction(rc, dx, dz, dy);

    double ap = opts.step_fraction * max_step(x, dx);
    double ad = opts.step_fraction * max_step(z, dz);
    if (std::min(ap, ad) < 1e-8) {
      // retry with a heavier centering weight before giving up
      for (size_t b = 0; b < nb; ++b) rc[b] = 0.8 * mu * zinv[b] - x[b];
      solve_direction(rc, dx, dz, dy);
      ap = opts.step_fraction * max_step(x, dx);
      ad = opts.step_fraction * max_step(z, dz);
    }
    if (ap < 1e-12 && ad < 1e-12) {
      res.status = iter > 0 ? SdpStatus::max_iterations : SdpStatus::failed;
      break;
    }
    for (size_t b = 0; b < nb; ++b) {
      x[b] += ap * dx[b];
      z[b] += ad * dz[b];
    }
    y += ad * dy;
    if (iter + 1 == opts.max_iterations) res.status = SdpStatus::max_iterations;
  }

  res.x = x;
  res.z = z;
  res.y = y;
  return res;
}

// Realification of a Hermitian matrix: H -> [[Re, -Im], [Im, Re]] (traces
// double, PSD is preserved).
inline RMatrix realify(const CMatrix& h) {
  const int n = static_cast<int>(h.rows());
  RMatrix out(2 * n, 2 * n);
  out.block(0, 0, n, n) = h.real();
  out.block(0, n, n, n) = -h.imag();
  out.block(n, 0, n, n) = h.imag();
  out.block(n, n, n, n) = h.real();
  return out;
}

// Recovers the Hermitian matrix from a realified block, averaging over the
// symplectic symmetry.
inline CMatrix unrealify(const RMatrix& r) {
  const int n = static_cast<int>(r.rows()) / 2;
  RMatrix re = (r.block(0, 0, n, n) + r.block(n, n, n, n)) / 2;
  RMatrix im = (r.block(n, 0, n, n) - r.block(0, n, n, n)) / 2;
  CMatrix out(n, n);
  out.real() = re;
  out.imag() = im;
  return (out + out.adjoint()) / 2;
}

} // namespace dilatio

#pragma once

// CPTP-constrained linear feasibility: given a linear map on Choi matrices
// and a target, find a channel J with affine(J) = target (within tol).
// Primary method: Dykstra alternating projections between the PSD cone and
// the stacked affine subspace (trace-preservation + target equations).
// An interior-point SDP route serves as certified fallback on small
// instances.

#include <functional>
#include <limits>
#include <optional>

#include "dilatio/channel.hpp"
#include "dilatio/sdp.hpp"

namespace dilatio {

namespace cpdetail {

// Orthonormal Hermitian basis of n x n matrices (Frobenius inner product).
inline std::vector<CMatrix> hermitian_basis(int n) {
  std::vector<CMatrix> basis;
  const double inv = 1.0 / std::sqrt(2.0);
  for (int i = 0; i < n; ++i) {
    CMatrix e = CMatrix::Zero(n, n);
    e(i, i) = 1;
    basis.push_back(e);
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      CMatrix e = CMatrix::Zero(n, n);
      e(i, j) = inv;
      e(j, i) = inv;
      basis.push_back(e);
      CMatrix f = CMatrix::Zero(n, n);
      f(i, j) = Complex(0, inv);
      f(j, i) = Complex(0, -inv);
      basis.push_back(f);
    }
  return basis;
}

inline RVector coords_of(const CMatrix& h, const std::vector<CMatrix>& basis) {
  RVector v(static_cast<Eigen::Index>(basis.size()));
  for (size_t k = 0; k < basis.size(); ++k)
    v(static_cast<Eigen::Index>(k)) = (basis[k].adjoint() * h).trace().real();
  return v;
}

inline CMatrix from_coords(const RVector& v, const std::vector<CMatrix>& basis, int n) {
  CMatrix h = CMatrix::Zero(n, n);
  for (size_t k = 0; k < basis.size(); ++k) h += v(static_cast<Eigen::Index>(k)) * basis[k];
  return h;
}

inline CMatrix psd_projection(const CMatrix& h) {
  auto eig = herm_eig(h);
  CMatrix out = CMatrix::Zero(h.rows(), h.cols());
  for (int k = 0; k < eig.eigenvalues.size(); ++k)
    if (eig.eigenvalues(k) > 0)
      out += eig.eigenvalues(k) * (eig.eigenvectors.col(k) * eig.eigenvectors.col(k).adjoint());
  return out;
}

} // namespace cpdetail

// A linear map on Choi matrices, evaluated entrywise; complex output.
using ChoiMap = std::function<CMatrix(const CMatrix&)>;

enum class CpFitMethod { dykstra, sdp };

struct CpFitOptions {
  CpFitMethod method = CpFitMethod::dykstra;
  int max_iterations = 20000;
  double convergence = 1e-12;
};

struct CpFitResult {
  std::optional<CMatrix> choi;  // CPTP J with affine(J) ~ target, if found
  double residual = 0;          // ||affine(J) - target||_F at the returned J
  int iterations = 0;
};

// Fits a Choi matrix J on (out_dim (x) in_dim) with affine(J) = target.
// `affine` must be linear in J (the matrix of the map is extracted by basis
// evaluation). The best CPTP point found is scored; `choi` is set iff its
// residual is <= tol.
inline CpFitResult cp_fit(const ChoiMap& affine, const CMatrix& target, int in_dim, int out_dim,
                          double tol, const CpFitOptions& opts = {}) {
  using namespace cpdetail;
  const int n = in_dim * out_dim;
  const auto basis = hermitian_basis(n);
  const int nvar = static_cast<int>(basis.size());

  const CMatrix t0 = affine(CMatrix::Zero(n, n));
  const int trows = static_cast<int>(target.rows()), tcols = static_cast<int>(target.cols());
  const int n_aff = 2 * trows * tcols;
  const auto tp_basis = hermitian_basis(in_dim); // rows for tr_out J = I_in
  const int n_tp = static_cast<int>(tp_basis.size());

  FactorShape shape({out_dim, in_dim});
  auto tr_out = [&](const CMatrix& j) { return partial_trace(j, shape, {1}); };

  RMatrix a(n_aff + n_tp, nvar);
  for (int k = 0; k < nvar; ++k) {
    CMatrix img = affine(basis[static_cast<size_t>(k)]) - t0;
    for (int r = 0; r < trows; ++r)
      for (int c = 0; c < tcols; ++c) {
        a(2 * (r * tcols + c), k) = img(r, c).real();
        a(2 * (r * tcols + c) + 1, k) = img(r, c).imag();
      }
    a.block(n_aff, k, n_tp, 1) = coords_of(tr_out(basis[static_cast<size_t>(k)]), tp_basis);
  }
  RVector b(n_aff + n_tp);
  for (int r = 0; r < trows; ++r)
    for (int c = 0; c < tcols; ++c) {
      b(2 * (r * tcols + c)) = (target(r, c) - t0(r, c)).real();
      b(2 * (r * tcols + c) + 1) = (target(r, c) - t0(r, c)).imag();
    }
  b.tail(n_tp) = coords_of(cidentity(in_dim), tp_basis);

  auto residual_of = [&](const CMatrix& j) { return (affine(j) - target).norm(); };
  auto tp_polish = [&](CMatrix j) {
    for (int polish = 0; polish < 50; ++polish) {
      CMatrix jp = psd_projection(j);
      CMatrix d2 = tr_out(jp) - cidentity(in_dim);
      j = jp - kron(cidentity(out_dim), d2) / out_dim;
      if (d2.norm() < 1e-13) break;
    }
    return j;
  };

  CpFitResult res;

  if (opts.method == CpFitMethod::sdp) {
    // min sum_i (u_i + w_i)  s.t.  (A v - b)_i = u_i - w_i,
    // v_k = <e_k, J>, J >= 0 carried as a realified block.  Feasible iff the
    // optimum vanishes; the extracted J is TP-polished and scored in L2.
    const int nr = static_cast<int>(a.rows());
    SDProgram p;
    p.block_dims.push_back(2 * n);
    for (int i = 0; i < 2 * nr; ++i) p.block_dims.push_back(1);
    for (int i = 0; i < 2 * nr; ++i) p.objective.add(1 + i, 0, 0, 1.0);
    for (int i = 0; i < nr; ++i) {
      CMatrix comb = CMatrix::Zero(n, n);
      for (int k = 0; k < nvar; ++k)
        if (a(i, k) != 0.0) comb += a(i, k) * basis[static_cast<size_t>(k)];
      RMatrix rc = realify(comb) / 2.0; // <realify(H)/2, realify(J)> = tr(HJ)
      BlockMatrix row;
      for (int r = 0; r < 2 * n; ++r)
        for (int c = r; c < 2 * n; ++c)
          if (std::abs(rc(r, c)) > 1e-15) row.add(0, r, c, rc(r, c));
      row.add(1 + 2 * i, 0, 0, -1.0);
      row.add(1 + 2 * i + 1, 0, 0, 1.0);
      p.constraints.push_back(row);
    }
    p.rhs = b;
    SdpOptions so;
    so.tol = 1e-10;
    SdpResult sr = sdp_solve(p, so);
    res.iterations = sr.iterations;
    if (sr.status == SdpStatus::optimal || sr.status == SdpStatus::max_iterations) {
      CMatrix j = tp_polish(unrealify(sr.x[0]));
      res.residual = residual_of(j);
      if (res.residual <= tol && (tr_out(j) - cidentity(in_dim)).norm() < 1e-8) res.choi = j;
    } else {
      res.residual = std::numeric_limits<double>::infinity();
    }
    return res;
  }

  // Dykstra between the PSD cone and the affine subspace {Av = b}.
  Eigen::CompleteOrthogonalDecomposition<RMatrix> cod(a);
  auto affine_proj = [&](const RVector& v) -> RVector { return v - cod.solve(a * v - b); };

  RVector v = affine_proj(coords_of(cidentity(n) / static_cast<double>(out_dim), basis));
  RVector p_inc = RVector::Zero(nvar); // Dykstra correction for the cone step
  CMatrix best = CMatrix::Zero(n, n);
  double best_res = std::numeric_limits<double>::infinity();
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    RVector w = v + p_inc;
    CMatrix jpsd = psd_projection(from_coords(w, basis, n));
    RVector vpsd = coords_of(jpsd, basis);
    p_inc = w - vpsd;
    RVector v_next = affine_proj(vpsd);
    const double move = (v_next - v).norm();
    v = v_next;
    if (it % 25 == 0 || move < opts.convergence) {
      CMatrix cand = tp_polish(jpsd);
      if ((tr_out(cand) - cidentity(in_dim)).norm() < 1e-9) {
        double r = residual_of(cand);
        if (r < best_res) { best_res = r; best = cand; }
      }
      if (move < opts.convergence) break;
    }
  }
  res.iterations = it;
  CMatrix jlim = tp_polish(psd_projection(from_coords(v + p_inc, basis, n)));
  if ((tr_out(jlim) - cidentity(in_dim)).norm() < 1e-9) {
    double r = residual_of(jlim);
    if (r < best_res) { best_res = r; best = jlim; }
  }
  res.residual = best_res;
  if (best_res <= tol) res.choi = best;
  return res;
}

} // namespace dilatio

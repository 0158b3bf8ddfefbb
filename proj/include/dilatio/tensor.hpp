#pragma once

// Dense complex-matrix kernel: Kronecker products, factor permutations,
// partial traces, Hermitian eigendecomposition and isometry completion.
// Everything downstream (channels, dilations, metrics) is built on these.

#include <Eigen/Dense>
#include <complex>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace dilatio {

using Complex = std::complex<double>;
using CMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CVector = Eigen::Matrix<Complex, Eigen::Dynamic, 1>;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

inline constexpr double kHermTol = 1e-10;
inline constexpr double kRankCutoff = 1e-9;

// Ordered list of tensor-factor dimensions annotating a square matrix.
struct FactorShape {
  std::vector<int> dims;

  FactorShape() = default;
  FactorShape(std::initializer_list<int> d) : dims(d) { check(); }
  explicit FactorShape(std::vector<int> d) : dims(std::move(d)) { check(); }

  int total() const {
    int t = 1;
    for (int d : dims) t *= d;
    return t;
  }
  int count() const { return static_cast<int>(dims.size()); }

  void check() const {
    for (int d : dims)
      if (d < 1) throw std::invalid_argument("FactorShape: dims must be >= 1");
  }
};

inline CMatrix cidentity(int n) { return CMatrix::Identity(n, n); }

inline CMatrix dagger(const CMatrix& m) { return m.adjoint(); }

inline double fro_norm(const CMatrix& m) { return m.norm(); }

inline double fro_dist(const CMatrix& a, const CMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("fro_dist: shape mismatch");
  return (a - b).norm();
}

inline double herm_defect(const CMatrix& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

inline CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline RMatrix kron(const RMatrix& a, const RMatrix& b) {
  RMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// Row-major mixed-radix strides: factor 0 is most significant, matching kron.
inline std::vector<int> strides_of(const std::vector<int>& dims) {
  std::vector<int> s(dims.size(), 1);
  for (int k = static_cast<int>(dims.size()) - 2; k >= 0; --k) s[k] = s[k + 1] * dims[k + 1];
  return s;
}

// Index permutation taking the factor order `dims` to the order dims[perm[0]],
// dims[perm[1]], ...  Returns map new_index -> old_index.
inline std::vector<int> factor_permutation(const std::vector<int>& dims,
                                           const std::vector<int>& perm) {
  const int n = static_cast<int>(dims.size());
  if (static_cast<int>(perm.size()) != n)
    throw std::invalid_argument("factor_permutation: size mismatch");
  std::vector<int> seen(n, 0);
  for (int p : perm) {
    if (p < 0 || p >= n || seen[p]) throw std::invalid_argument("factor_permutation: not a permutation");
    seen[p] = 1;
  }
  const auto old_strides = strides_of(dims);
  std::vector<int> new_dims(n);
  for (int k = 0; k < n; ++k) new_dims[k] = dims[perm[k]];
  const auto new_strides = strides_of(new_dims);
  const int total = std::accumulate(dims.begin(), dims.end(), 1, std::multiplies<int>());
  std::vector<int> map(total);
  std::vector<int> digits(n, 0);
  for (int idx = 0; idx < total; ++idx) {
    int rem = idx;
    int old_idx = 0;
    for (int k = 0; k < n; ++k) {
      digits[k] = rem / new_strides[k];
      rem %= new_strides[k];
      old_idx += digits[k] * old_strides[perm[k]];
    }
    map[idx] = old_idx;
  }
  return map;
}

// Applies a factor permutation to both row and column indices of a square
// matrix whose rows/cols both carry the factor structure `shape`.
inline CMatrix permute_factors(const CMatrix& m, const FactorShape& shape,
                               const std::vector<int>& perm) {
  if (m.rows() != shape.total() || m.cols() != shape.total())
    throw std::invalid_argument("permute_factors: shape does not match matrix");
  const auto map = factor_permutation(shape.dims, perm);
  const int n = shape.total();
  CMatrix out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = m(map[i], map[j]);
  return out;
}

// Same permutation applied to a vector of the given factor structure.
inline CVector permute_factors(const CVector& v, const FactorShape& shape,
                               const std::vector<int>& perm) {
  if (v.size() != shape.total())
    throw std::invalid_argument("permute_factors: shape does not match vector");
  const auto map = factor_permutation(shape.dims, perm);
  CVector out(v.size());
  for (int i = 0; i < v.size(); ++i) out(i) = v(map[i]);
  return out;
}

// Trace over the factors NOT in `keep`; remaining factors stay in their
// original relative order.
inline CMatrix partial_trace(const CMatrix& m, const FactorShape& shape,
                             const std::vector<int>& keep) {
  if (m.rows() != shape.total() || m.cols() != shape.total())
    throw std::invalid_argument("partial_trace: shape does not match matrix");
  const int n = shape.count();
  std::vector<int> is_kept(n, 0);
  for (int k : keep) {
    if (k < 0 || k >= n) throw std::invalid_argument("partial_trace: bad factor index");
    is_kept[k] = 1;
  }
  std::vector<int> kept, traced;
  for (int k = 0; k < n; ++k) (is_kept[k] ? kept : traced).push_back(k);

  int dk = 1, dt = 1;
  for (int k : kept) dk *= shape.dims[k];
  for (int k : traced) dt *= shape.dims[k];

  // Reorder so kept factors come first, then run the block trace.
  std::vector<int> perm = kept;
  perm.insert(perm.end(), traced.begin(), traced.end());
  CMatrix r = (perm == std::vector<int>{}) ? m : permute_factors(m, shape, perm);

  CMatrix out = CMatrix::Zero(dk, dk);
  for (int i = 0; i < dk; ++i)
    for (int j = 0; j < dk; ++j) {
      Complex s = 0.0;
      for (int t = 0; t < dt; ++t) s += r(i * dt + t, j * dt + t);
      out(i, j) = s;
    }
  return out;
}

struct HermEig {
  RVector eigenvalues;  // descending
  CMatrix eigenvectors; // columns, orthonormal
};

// Hermitian eigendecomposition; input symmetrized as (M+M')/2 first.
inline HermEig herm_eig(const CMatrix& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("herm_eig: matrix not square");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (herm_defect(m) > kHermTol * scale * 10)
    throw std::invalid_argument("herm_eig: input not Hermitian within tolerance");
  CMatrix h = (m + m.adjoint()) / 2.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h);
  if (solver.info() != Eigen::Success) throw std::runtime_error("herm_eig: eigensolver failed");
  const int n = static_cast<int>(m.rows());
  HermEig out;
  out.eigenvalues = RVector(n);
  out.eigenvectors = CMatrix(n, n);
  for (int k = 0; k < n; ++k) { // Eigen returns ascending order
    out.eigenvalues(k) = solver.eigenvalues()(n - 1 - k);
    out.eigenvectors.col(k) = solver.eigenvectors().col(n - 1 - k);
  }
  return out;
}

inline RVector singular_values(const CMatrix& m) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
  return svd.singularValues();
}

inline double trace_norm(const CMatrix& m) { return singular_values(m).sum(); }

inline int numerical_rank(const CMatrix& herm, double cutoff = kRankCutoff) {
  auto eig = herm_eig(herm);
  int r = 0;
  for (int k = 0; k < eig.eigenvalues.size(); ++k)
    if (std::abs(eig.eigenvalues(k)) > cutoff) ++r;
  return r;
}

// Extends an isometry v (cols <= rows, v'v = I) to a full unitary whose first
// block of columns equals v.
inline CMatrix complete_isometry(const CMatrix& v) {
  const int rows = static_cast<int>(v.rows());
  const int cols = static_cast<int>(v.cols());
  if (cols > rows) throw std::invalid_argument("complete_isometry: more columns than rows");
  if ((v.adjoint() * v - cidentity(cols)).norm() > 1e-9)
    throw std::invalid_argument("complete_isometry: input is not an isometry");
  if (cols == rows) return v;

  CMatrix u(rows, rows);
  u.leftCols(cols) = v;
  // Gram-Schmidt the standard basis against the existing columns.
  int filled = cols;
  for (int e = 0; e < rows && filled < rows; ++e) {
    CVector w = CVector::Zero(rows);
    w(e) = 1.0;
    for (int pass = 0; pass < 2; ++pass)
      for (int c = 0; c < filled; ++c) w -= u.col(c).dot(w) * u.col(c);
    const double nrm = w.norm();
    if (nrm > 1e-7) u.col(filled++) = w / nrm;
  }
  if (filled != rows) throw std::runtime_error("complete_isometry: completion failed");
  return u;
}

// Multiplies by a global phase making the largest-magnitude entry real positive.
inline CMatrix fix_global_phase(const CMatrix& m) {
  Eigen::Index bi = 0, bj = 0;
  double best = -1.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (std::abs(m(i, j)) > best) { best = std::abs(m(i, j)); bi = i; bj = j; }
  if (best < 1e-300) return m;
  return m * (std::conj(m(bi, bj)) / best);
}

} // namespace dilatio

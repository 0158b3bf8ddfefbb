#pragma once

// Seeded random generators for states, unitaries, channels and tables.
// Every source of randomness in the library and CLI goes through Rng.

#include <random>

#include "dilatio/tensor.hpp"

namespace dilatio {

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : gen_(seed), seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::mt19937_64& engine() { return gen_; }

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(gen_);
  }
  int uniform_int(int lo, int hi) { // inclusive
    return std::uniform_int_distribution<int>(lo, hi)(gen_);
  }
  double gaussian() { return std::normal_distribution<double>(0.0, 1.0)(gen_); }

  CMatrix gaussian_matrix(int rows, int cols) {
    CMatrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) m(i, j) = Complex(gaussian(), gaussian());
    return m;
  }

  CMatrix hermitian(int n) {
    CMatrix g = gaussian_matrix(n, n);
    return (g + g.adjoint()) / 2.0;
  }

  // Haar isometry: QR of a Gaussian matrix, phases fixed by R's diagonal.
  CMatrix haar_isometry(int rows, int cols) {
    if (cols > rows) throw std::invalid_argument("haar_isometry: cols > rows");
    CMatrix g = gaussian_matrix(rows, cols);
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(g);
    Eigen::MatrixXcd q = qr.householderQ() * Eigen::MatrixXcd::Identity(rows, cols);
    Eigen::MatrixXcd r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
    for (int c = 0; c < cols; ++c) {
      Complex d = r(c, c);
      q.col(c) *= (std::abs(d) > 1e-300) ? d / std::abs(d) : 1.0;
    }
    return q;
  }

  CMatrix haar_unitary(int n) { return haar_isometry(n, n); }

  CVector random_ket(int n) {
    CVector v(n);
    for (int i = 0; i < n; ++i) v(i) = Complex(gaussian(), gaussian());
    return v / v.norm();
  }

  CMatrix density_matrix(int n, int rank = 0) {
    if (rank <= 0 || rank > n) rank = n;
    CMatrix g = gaussian_matrix(n, rank);
    CMatrix rho = g * g.adjoint();
    return rho / rho.trace();
  }

  RVector probability_vector(int n) {
    RVector p(n);
    double s = 0;
    for (int i = 0; i < n; ++i) { p(i) = -std::log(uniform(1e-12, 1.0)); s += p(i); }
    return p / s;
  }

  RMatrix stochastic_table(int out_dim, int in_dim) {
    RMatrix t(out_dim, in_dim);
    for (int x = 0; x < in_dim; ++x) t.col(x) = probability_vector(out_dim);
    return t;
  }

  // Rank-one projector basis of a Haar-random orthonormal frame.
  std::vector<CMatrix> random_pvm(int dim) {
    CMatrix u = haar_unitary(dim);
    std::vector<CMatrix> pvm;
    for (int k = 0; k < dim; ++k) pvm.push_back(u.col(k) * u.col(k).adjoint());
    return pvm;
  }

  // POVM with `outcomes` effects, built from a Haar unitary on dim*outcomes.
  std::vector<CMatrix> random_povm(int dim, int outcomes) {
    CMatrix v = haar_isometry(dim * outcomes, dim); // columns: dim, rows: (y, i)
    std::vector<CMatrix> effects(outcomes, CMatrix::Zero(dim, dim));
    for (int y = 0; y < outcomes; ++y) {
      CMatrix blk = v.block(y * dim, 0, dim, dim); // (<y| ox I) V
      effects[y] = blk.adjoint() * blk;
    }
    return effects;
  }

 private:
  std::mt19937_64 gen_;
  std::uint64_t seed_;
};

} // namespace dilatio

#pragma once

// Metric suite: trace/variational distance, diamond distance (SDP upper
// side + see-saw lower bound), isometric-channel fidelities via the
// numerical range, Uhlmann fidelity / purified distance for states, the
// purified-diamond interval and the Bures relation.

#include "dilatio/dilation.hpp"
#include "dilatio/rng.hpp"
#include "dilatio/sdp.hpp"

namespace dilatio {

// ---------------------------------------------------------------------------
// Trace / variational distance

inline double trace_distance(const CMatrix& rho, const CMatrix& sigma) {
  return 0.5 * trace_norm(rho - sigma);
}

inline double trace_distance(const ClassicalChannel& a, const ClassicalChannel& b) {
  if (!(a.input() == b.input()) || !(a.output() == b.output()))
    throw std::invalid_argument("trace_distance: interface mismatch");
  double worst = 0;
  for (int x = 0; x < a.table().cols(); ++x)
    worst = std::max(worst, 0.5 * (a.table().col(x) - b.table().col(x)).cwiseAbs().sum());
  return worst; // exact: convexity puts the maximiser on a deterministic input
}

inline double trace_distance(const Channel& a, const Channel& b) {
  if (is_classical(a) && is_classical(b))
    return trace_distance(std::get<ClassicalChannel>(a), std::get<ClassicalChannel>(b));
  QuantumChannel qa = to_quantum(a), qb = to_quantum(b);
  if (!qa.input().empty())
    throw std::invalid_argument("trace_distance: quantum arguments must be states");
  return trace_distance(qa.choi(), qb.choi());
}

// ---------------------------------------------------------------------------
// Diamond distance

struct DiamondResult {
  double value = 0;          // d_diamond = ||Delta||_diamond / 2
  double sdp_gap = 0;        // interior-point duality gap
  double seesaw_lower = 0;   // achievable distinguishing value (lower bound)
  double certificate_margin = 0;   // min eigenvalue of [[Y,-J],[-J*,Y]]
  double certificate_objective = 0; // ||tr_out Y||_inf, equals 2*value
  SdpStatus status = SdpStatus::failed;
};

namespace metdetail {

// See-saw ascent over pure inputs psi = (I (x) M)|Omega>, alternating the
// optimal distinguishing projector and the optimal input.
inline double diamond_seesaw(const CMatrix& j, int dout, int din, int starts, Rng& rng) {
  double best = 0;
  for (int s = 0; s < starts; ++s) {
    CMatrix m = (s == 0) ? CMatrix(cidentity(din)) : rng.gaussian_matrix(din, din);
    m /= std::sqrt((m.adjoint() * m).trace().real());
    double value = 0;
    for (int iter = 0; iter < 60; ++iter) {
      // X = (I (x) M) J (I (x) M'); value = tr(Q X) with Q the positive part
      CMatrix im = kron(cidentity(dout), m);
      CMatrix x = im * j * im.adjoint();
      auto eig = herm_eig((x + x.adjoint()) / 2);
      CMatrix q = CMatrix::Zero(x.rows(), x.cols());
      double val = 0;
      for (int k = 0; k < eig.eigenvalues.size(); ++k)
        if (eig.eigenvalues(k) > 0) {
          q += eig.eigenvectors.col(k) * eig.eigenvectors.col(k).adjoint();
          val += eig.eigenvalues(k);
        }
      if (val < value + 1e-12 && iter > 2) { value = std::max(value, val); break; }
      value = val;
      // H[(r,i),(r',i')] = sum_{a,b} Q[(a,r),(b,r')] J[(b,i'),(a,i)]
      CMatrix h = CMatrix::Zero(din * din, din * din);
      for (int r = 0; r < din; ++r)
        for (int i = 0; i < din; ++i)
          for (int rp = 0; rp < din; ++rp)
            for (int ip = 0; ip < din; ++ip) {
              Complex v = 0;
              for (int a = 0; a < dout; ++a)
                for (int b = 0; b < dout; ++b)
                  v += q(a * din + r, b * din + rp) * j(b * din + ip, a * din + i);
              h(r * din + i, rp * din + ip) = v;
            }
      auto heig = herm_eig((h + h.adjoint()) / 2);
      for (int r = 0; r < din; ++r)
        for (int i = 0; i < din; ++i) m(r, i) = heig.eigenvectors(r * din + i, 0);
      m /= std::sqrt((m.adjoint() * m).trace().real());
    }
    best = std::max(best, value);
  }
  return best;
}

} // namespace metdetail

// d_diamond(a, b) by the semidefinite program
//   min t  s.t.  N >= J(Delta), N >= 0, tr_out N = t*I,
// whose optimal N yields the block-matrix certificate Y = 2N - J(Delta) with
// [[Y, -J],[-J*, Y]] >= 0 and ||tr_out Y||_inf = 2t.  A see-saw ascent over
// pure inputs provides the matching achievable lower bound.
inline DiamondResult diamond_distance(const QuantumChannel& a, const QuantumChannel& b,
                                      double tol = kSolverTol, int seesaw_starts = 3,
                                      std::uint64_t seed = 7) {
  if (!a.input().same_shape(b.input()) || !a.output().same_shape(b.output()))
    throw std::invalid_argument("diamond_distance: interface mismatch");
  const int din = a.din(), dout = a.dout();
  const int dd = din * dout;
  CMatrix j = a.choi() - b.choi();

  DiamondResult res;
  if (j.norm() < 1e-14) { // identical channels
    res.value = 0;
    res.status = SdpStatus::optimal;
    return res;
  }

  SDProgram p;
  p.block_dims = {2 * dd, 2 * dd, 1}; // realify(N - J), realify(N), [t]
  p.objective.add(2, 0, 0, 1.0);
  auto hbasis = cpdetail::hermitian_basis(dd);
  for (const auto& e : hbasis) {
    RMatrix re = realify(e) / 2.0;
    BlockMatrix m;
    for (int r = 0; r < 2 * dd; ++r)
      for (int c = r; c < 2 * dd; ++c)
        if (std::abs(re(r, c)) > 1e-15) {
          m.add(1, r, c, re(r, c));
          m.add(0, r, c, -re(r, c));
        }
    p.constraints.push_back(m);
    p.rhs.conservativeResize(p.rhs.size() + 1);
    p.rhs(p.rhs.size() - 1) = (e.adjoint() * j).trace().real();
  }
  auto in_basis = cpdetail::hermitian_basis(din);
  for (const auto& f : in_basis) {
    CMatrix lift = kron(cidentity(dout), f);
    RMatrix re = realify(lift) / 2.0;
    BlockMatrix m;
    for (int r = 0; r < 2 * dd; ++r)
      for (int c = r; c < 2 * dd; ++c)
        if (std::abs(re(r, c)) > 1e-15) m.add(1, r, c, re(r, c));
    double trf = f.trace().real();
    if (std::abs(trf) > 1e-15) m.add(2, 0, 0, -trf);
    p.constraints.push_back(m);
    p.rhs.conservativeResize(p.rhs.size() + 1);
    p.rhs(p.rhs.size() - 1) = 0.0;
  }

  SdpOptions opts;
  opts.tol = std::min(1e-9, tol / 10);
  SdpResult sr = sdp_solve(p, opts);
  res.status = sr.status;
  res.sdp_gap = sr.gap;
  if (sr.status != SdpStatus::optimal && sr.status != SdpStatus::max_iterations)
    throw std::runtime_error("diamond_distance: SDP solver failed");
  res.value = sr.x[2](0, 0);

  CMatrix n = unrealify(sr.x[1]);
  CMatrix y = 2.0 * n - j;
  CMatrix block(2 * dd, 2 * dd);
  block.topLeftCorner(dd, dd) = y;
  block.topRightCorner(dd, dd) = -j;
  block.bottomLeftCorner(dd, dd) = -j.adjoint();
  block.bottomRightCorner(dd, dd) = y;
  auto beig = herm_eig(block);
  res.certificate_margin = beig.eigenvalues(beig.eigenvalues.size() - 1);
  FactorShape shape({dout, din});
  auto teig = herm_eig(partial_trace(y, shape, {1}));
  res.certificate_objective = std::max(std::abs(teig.eigenvalues(0)),
                                       std::abs(teig.eigenvalues(teig.eigenvalues.size() - 1)));

  Rng rng(seed);
  res.seesaw_lower = metdetail::diamond_seesaw(j, dout, din, seesaw_starts, rng);
  return res;
}

inline DiamondResult diamond_distance(const Channel& a, const Channel& b,
                                      double tol = kSolverTol) {
  return diamond_distance(to_quantum(a), to_quantum(b), tol);
}

// ---------------------------------------------------------------------------
// Isometric-channel fidelities

struct IsoFidelities {
  double f = 1;          // fidelity: distance from 0 to the numerical range
  double ff = 1;         // fake fidelity: sup_theta lambda_min(Re e^{i theta} A)
  double d_diamond = 0;  // sqrt(1 - F^2)
  double d_inf = 0;      // sqrt(2 - 2 FF)
  double theta_star = 0;
  CMatrix worst_state;   // attaining density for FF
};

namespace metdetail {

struct SweepPoint {
  double value;
  CVector vec;
};

inline SweepPoint lambda_min_of(const CMatrix& a, double theta) {
  CMatrix h = (std::polar(1.0, theta) * a + std::polar(1.0, -theta) * a.adjoint()) / 2.0;
  auto eig = herm_eig(h);
  int last = static_cast<int>(eig.eigenvalues.size()) - 1;
  return {eig.eigenvalues(last), eig.eigenvectors.col(last)};
}

} // namespace metdetail

// FF maximised over a 720-point theta grid with golden-section refinement of
// every bracket that the Lipschitz bound cannot exclude (lambda_min is
// 1-Lipschitz in theta for ||A|| <= 1).
inline IsoFidelities iso_fidelities(const CMatrix& s1, const CMatrix& s2) {
  if (s1.rows() != s2.rows() || s1.cols() != s2.cols())
    throw std::invalid_argument("iso_fidelities: shape mismatch");
  if ((s1.adjoint() * s1 - cidentity(static_cast<int>(s1.cols()))).norm() > 1e-9 ||
      (s2.adjoint() * s2 - cidentity(static_cast<int>(s2.cols()))).norm() > 1e-9)
    throw std::invalid_argument("iso_fidelities: inputs are not isometries");
  CMatrix a = s1.adjoint() * s2;

  const int grid = 720;
  const double h = 2 * M_PI / grid;
  std::vector<double> vals(grid);
  double best = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < grid; ++k) {
    vals[static_cast<size_t>(k)] = metdetail::lambda_min_of(a, k * h).value;
    best = std::max(best, vals[static_cast<size_t>(k)]);
  }
  const double lipschitz_slack = 2.0 * h; // bound on what a bracket can hide
  double ff = best;
  double theta_star = 0;
  for (int k = 0; k < grid; ++k) {
    if (vals[static_cast<size_t>(k)] < best - lipschitz_slack) continue;
    double lo = (k - 1) * h, hi = (k + 1) * h;
    const double gr = (std::sqrt(5.0) - 1) / 2;
    double c = hi - gr * (hi - lo), d = lo + gr * (hi - lo);
    double fc = metdetail::lambda_min_of(a, c).value;
    double fd = metdetail::lambda_min_of(a, d).value;
    while (hi - lo > 1e-12) {
      if (fc > fd) {
        hi = d; d = c; fd = fc;
        c = hi - gr * (hi - lo);
        fc = metdetail::lambda_min_of(a, c).value;
      } else {
        lo = c; c = d; fc = fd;
        d = lo + gr * (hi - lo);
        fd = metdetail::lambda_min_of(a, d).value;
      }
    }
    double mid = (lo + hi) / 2;
    double fmid = metdetail::lambda_min_of(a, mid).value;
    if (fmid > ff) { ff = fmid; theta_star = mid; }
  }

  IsoFidelities out;
  out.ff = ff;
  out.f = std::max(0.0, ff);
  out.d_diamond = std::sqrt(std::max(0.0, 1.0 - out.f * out.f));
  out.d_inf = std::sqrt(std::max(0.0, 2.0 - 2.0 * out.ff));
  out.theta_star = theta_star;
  auto pt = metdetail::lambda_min_of(a, theta_star);
  out.worst_state = pt.vec * pt.vec.adjoint();
  return out;
}

// Oracle for unitary pairs: F = cos(gamma/2)^+ and FF = cos(gamma/2) with
// gamma the smallest arc containing the eigenvalues of S1* S2.
struct ArcFidelity {
  double gamma = 0;
  double f = 1;
  double ff = 1;
};

inline ArcFidelity unitary_arc_fidelity(const CMatrix& s1, const CMatrix& s2) {
  CMatrix a = s1.adjoint() * s2;
  const int n = static_cast<int>(a.rows());
  if ((a * a.adjoint() - cidentity(n)).norm() > 1e-8)
    throw std::invalid_argument("unitary_arc_fidelity: product is not unitary");
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(a);
  std::vector<double> phases;
  for (int k = 0; k < n; ++k) phases.push_back(std::arg(es.eigenvalues()(k)));
  std::sort(phases.begin(), phases.end());
  double max_gap = 2 * M_PI + phases.front() - phases.back();
  for (size_t k = 0; k + 1 < phases.size(); ++k)
    max_gap = std::max(max_gap, phases[k + 1] - phases[k]);
  ArcFidelity out;
  out.gamma = 2 * M_PI - max_gap;
  out.ff = std::cos(out.gamma / 2);
  out.f = std::max(0.0, out.ff);
  return out;
}

// ---------------------------------------------------------------------------
// State fidelity and purified distance

struct StateFidelity {
  double f = 1; // ||sqrt(rho) sqrt(sigma)||_1
  double p = 0; // sqrt(1 - F^2)
};

inline StateFidelity state_fidelity_purified(const CMatrix& rho, const CMatrix& sigma) {
  auto er = herm_eig(rho);
  auto es = herm_eig(sigma);
  auto sqrt_of = [](const HermEig& e, Eigen::Index n) {
    CMatrix s = CMatrix::Zero(n, n);
    for (int k = 0; k < e.eigenvalues.size(); ++k)
      if (e.eigenvalues(k) > 0)
        s += std::sqrt(e.eigenvalues(k)) * (e.eigenvectors.col(k) * e.eigenvectors.col(k).adjoint());
    return s;
  };
  StateFidelity out;
  out.f = trace_norm(sqrt_of(er, rho.rows()) * sqrt_of(es, sigma.rows()));
  out.f = std::min(1.0, out.f);
  out.p = std::sqrt(std::max(0.0, 1.0 - out.f * out.f));
  return out;
}

// ---------------------------------------------------------------------------
// Purified diamond-distance interval

struct MetricInterval {
  double lower = 0;
  double upper = 0;
  std::string lower_method, upper_method;
};

namespace metdetail {

// Best fidelity over (1 (x) V)-rotations of the padded minimal Stinesprings.
inline double rotated_dilation_fidelity(const CMatrix& s1, const CMatrix& s2, int dout, int env,
                                        int starts, Rng& rng) {
  double best_f = 0;
  for (int s = 0; s < starts; ++s) {
    CMatrix v = (s == 0) ? CMatrix(cidentity(env)) : rng.haar_unitary(env);
    double prev = -1;
    for (int iter = 0; iter < 40; ++iter) {
      CMatrix rot = kron(cidentity(dout), v);
      auto fid = iso_fidelities(s1, rot * s2);
      best_f = std::max(best_f, fid.f);
      if (fid.ff <= 0 || std::abs(fid.ff - prev) < 1e-11) break;
      prev = fid.ff;
      // optimal V for fixed (theta*, rho*): polar part of the contraction
      // C(l,k) = sum_m B[(m,l),(m,k)], B = e^{i theta} S2 rho S1*
      CMatrix b = std::polar(1.0, fid.theta_star) * (s2 * fid.worst_state * s1.adjoint());
      CMatrix c = CMatrix::Zero(env, env);
      for (int l = 0; l < env; ++l)
        for (int k = 0; k < env; ++k) {
          Complex acc = 0;
          for (int m = 0; m < dout; ++m) acc += b(m * env + l, m * env + k);
          c(l, k) = acc;
        }
      Eigen::JacobiSVD<Eigen::MatrixXcd> svd(c, Eigen::ComputeFullU | Eigen::ComputeFullV);
      v = svd.matrixV() * svd.matrixU().adjoint(); // max Re tr(VC)
    }
  }
  return best_f;
}

inline CMatrix pad_env(const CMatrix& s, int dout, int env_from, int env_to) {
  if (env_from == env_to) return s;
  const int din = static_cast<int>(s.cols());
  CMatrix out = CMatrix::Zero(dout * env_to, din);
  for (int m = 0; m < dout; ++m)
    for (int e = 0; e < env_from; ++e) out.row(m * env_to + e) = s.row(m * env_from + e);
  return out;
}

} // namespace metdetail

inline MetricInterval pdiamond_interval(const QuantumChannel& a, const QuantumChannel& b,
                                        double tol = kSolverTol, int starts = 4,
                                        std::uint64_t seed = 11) {
  MetricInterval out;
  if (a.choi().rows() == b.choi().rows() && (a.choi() - b.choi()).norm() < 1e-14) {
    out.lower_method = out.upper_method = "identical";
    return out;
  }
  auto sa = stinespring_minimal(a);
  auto sb = stinespring_minimal(b);
  if (sa.env_dim == 1 && sb.env_dim == 1) {
    // dilationally pure inputs: the interval collapses to the exact value
    auto fid = iso_fidelities(sa.isometry, sb.isometry);
    out.lower = out.upper = fid.d_diamond;
    out.lower_method = out.upper_method = "isometric-exact";
    return out;
  }
  DiamondResult dd = diamond_distance(a, b, tol);
  out.lower = dd.value;
  out.lower_method = "sdp";
  const int env = std::max(sa.env_dim, sb.env_dim);
  CMatrix s1 = metdetail::pad_env(sa.isometry, a.dout(), sa.env_dim, env);
  CMatrix s2 = metdetail::pad_env(sb.isometry, b.dout(), sb.env_dim, env);
  Rng rng(seed);
  double best_f = metdetail::rotated_dilation_fidelity(s1, s2, a.dout(), env, starts, rng);
  double search = std::sqrt(std::max(0.0, 1.0 - best_f * best_f));
  double cap = std::sqrt(std::max(0.0, 2.0 * out.lower));
  out.upper = std::max(out.lower, std::min(cap, search));
  out.upper_method = (search <= cap) ? "search" : "ksw-cap";
  return out;
}

// ---------------------------------------------------------------------------
// Bures relation (P = beta sqrt(1 - beta^2/4))

struct BpResult {
  double beta = 0;
  double p = 0;
  double residual = 0; // |sqrt(1 - P^2) - (1 - beta^2/2)|
};

inline BpResult bp_check(double sup_ff) {
  BpResult out;
  const double f = std::max(0.0, sup_ff);
  out.beta = std::sqrt(std::max(0.0, 2.0 - 2.0 * f));
  out.p = std::sqrt(std::max(0.0, 1.0 - f * f));
  out.residual = std::abs(std::sqrt(std::max(0.0, 1.0 - out.p * out.p)) -
                          (1.0 - out.beta * out.beta / 2.0));
  return out;
}

inline BpResult bp_check(const CMatrix& s1, const CMatrix& s2) {
  return bp_check(iso_fidelities(s1, s2).ff);
}

} // namespace dilatio

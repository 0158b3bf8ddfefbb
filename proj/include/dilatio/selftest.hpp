#pragma once

// Quantum self-testing toolkit: strategies and behaviours, the canonical
// CHSH strategy, Naimark projectivisation, reducibility verification,
// local-derivability through canonical Stinespring dilations, and
// security/extremality diagnostics.

#include "dilatio/behaviour.hpp"
#include "dilatio/cp_fit.hpp"
#include "dilatio/dilation.hpp"
#include "dilatio/lp.hpp"

namespace dilatio {

// Bipartite strategy: shared state + per-site, per-input projective (or
// POVM) measurement families.
struct Strategy {
  CMatrix state; // density on H_A (x) H_B
  int da = 1, db = 1;
  std::vector<std::vector<CMatrix>> pvms_a; // [input][outcome]
  std::vector<std::vector<CMatrix>> pvms_b;

  BellScenario scenario() const {
    BellScenario sc;
    sc.nxa = static_cast<int>(pvms_a.size());
    sc.nxb = static_cast<int>(pvms_b.size());
    sc.nya = pvms_a.empty() ? 1 : static_cast<int>(pvms_a[0].size());
    sc.nyb = pvms_b.empty() ? 1 : static_cast<int>(pvms_b[0].size());
    return sc;
  }
};

struct StrategyDiagnostics {
  bool pass = false;
  double state_defect = 0;       // PSD margin + trace defect
  double projection_defect = 0;  // idempotence/orthogonality/completeness
};

inline StrategyDiagnostics validate_strategy(const Strategy& s, double tol = 1e-9) {
  StrategyDiagnostics d;
  auto eig = herm_eig(s.state);
  d.state_defect = std::max(std::max(0.0, -eig.eigenvalues(eig.eigenvalues.size() - 1)),
                            std::abs(s.state.trace().real() - 1.0));
  auto check_site = [&](const std::vector<std::vector<CMatrix>>& pvms, int dim) {
    for (const auto& family : pvms) {
      CMatrix sum = CMatrix::Zero(dim, dim);
      for (size_t y = 0; y < family.size(); ++y) {
        const CMatrix& p = family[y];
        d.projection_defect = std::max(d.projection_defect, herm_defect(p));
        d.projection_defect = std::max(d.projection_defect, fro_dist(p * p, p));
        for (size_t z = y + 1; z < family.size(); ++z)
          d.projection_defect = std::max(d.projection_defect, (p * family[z]).norm());
        sum += p;
      }
      d.projection_defect = std::max(d.projection_defect, (sum - cidentity(dim)).norm());
    }
  };
  check_site(s.pvms_a, s.da);
  check_site(s.pvms_b, s.db);
  d.pass = d.state_defect <= tol + 1e-12 && d.projection_defect <= tol;
  return d;
}

inline Behaviour behaviour_of(const Strategy& s) {
  Behaviour b;
  b.sc = s.scenario();
  b.p = RMatrix::Zero(b.sc.nya * b.sc.nyb, b.sc.nxa * b.sc.nxb);
  for (int xa = 0; xa < b.sc.nxa; ++xa)
    for (int xb = 0; xb < b.sc.nxb; ++xb)
      for (int ya = 0; ya < b.sc.nya; ++ya)
        for (int yb = 0; yb < b.sc.nyb; ++yb) {
          CMatrix op = kron(s.pvms_a[static_cast<size_t>(xa)][static_cast<size_t>(ya)],
                            s.pvms_b[static_cast<size_t>(xb)][static_cast<size_t>(yb)]);
          b.p(ya * b.sc.nyb + yb, xa * b.sc.nxb + xb) = (op * s.state).trace().real();
        }
  return b;
}

// The canonical CHSH strategy: maximally entangled pair, A measures Z or X,
// B measures (Z +- X)/sqrt2, i.e. the pi/8-rotated bases.
inline Strategy canonical_chsh() {
  Strategy s;
  s.da = s.db = 2;
  CVector phi = CVector::Zero(4);
  phi(0) = phi(3) = 1.0 / std::sqrt(2.0);
  s.state = phi * phi.adjoint();
  auto proj = [](double a0, double a1) {
    CVector v(2);
    v << a0, a1;
    return CMatrix(v * v.adjoint());
  };
  const double c = std::cos(M_PI / 8), sn = std::sin(M_PI / 8);
  s.pvms_a = {{proj(1, 0), proj(0, 1)},                                   // Z basis
              {proj(1 / std::sqrt(2.0), 1 / std::sqrt(2.0)),
               proj(1 / std::sqrt(2.0), -1 / std::sqrt(2.0))}};           // X basis
  s.pvms_b = {{proj(c, sn), proj(sn, -c)},                                // (Z+X)/sqrt2
              {proj(c, -sn), proj(sn, c)}};                               // (Z-X)/sqrt2
  return s;
}

// ---------------------------------------------------------------------------
// Naimark projectivisation

// Dilates every POVM family to a projective one on K (x) H with a single
// ancilla K per site (dim = outcome count), absorbing the ancilla |0> into
// the state; behaviours are unchanged.
inline Strategy naimarkize(const Strategy& s, double tol = 1e-9) {
  auto site_needs = [&](const std::vector<std::vector<CMatrix>>& pvms) {
    for (const auto& family : pvms)
      for (const CMatrix& e : family)
        if (fro_dist(e * e, e) > tol) return true;
    return false;
  };
  auto sqrt_psd = [](const CMatrix& e) {
    auto eig = herm_eig(e);
    CMatrix r = CMatrix::Zero(e.rows(), e.cols());
    for (int k = 0; k < eig.eigenvalues.size(); ++k)
      if (eig.eigenvalues(k) > 0)
        r += std::sqrt(eig.eigenvalues(k)) *
             (eig.eigenvectors.col(k) * eig.eigenvectors.col(k).adjoint());
    return r;
  };

  Strategy out = s;
  bool site_a = site_needs(s.pvms_a), site_b = site_needs(s.pvms_b);
  auto dilate_site = [&](const std::vector<std::vector<CMatrix>>& pvms, int dim,
                         std::vector<std::vector<CMatrix>>& new_pvms, int& new_dim) {
    int ny = static_cast<int>(pvms[0].size());
    new_dim = ny * dim; // K (x) H with K in front
    new_pvms.clear();
    for (const auto& family : pvms) {
      // V = sum_y |y> (x) sqrt(E_y): H -> K (x) H, completed to a unitary U
      CMatrix v = CMatrix::Zero(ny * dim, dim);
      for (int y = 0; y < ny; ++y) v.block(y * dim, 0, dim, dim) = sqrt_psd(family[static_cast<size_t>(y)]);
      CMatrix u = complete_isometry(v);
      // the isometry occupies the |0>_K column block; rotate it there
      // (complete_isometry puts v in the FIRST dim columns, which is exactly
      // the |0>_K (x) H block in the K-first layout)
      std::vector<CMatrix> family2;
      for (int y = 0; y < ny; ++y) {
        CMatrix sel = CMatrix::Zero(ny * dim, ny * dim);
        sel.block(y * dim, y * dim, dim, dim) = cidentity(dim);
        family2.push_back(u.adjoint() * sel * u);
      }
      new_pvms.push_back(family2);
    }
  };

  int nda = s.da, ndb = s.db;
  if (site_a) dilate_site(s.pvms_a, s.da, out.pvms_a, nda);
  if (site_b) dilate_site(s.pvms_b, s.db, out.pvms_b, ndb);
  if (!site_a && !site_b) return out;

  // state: |0><0|_KA (x) rho_AB (x) |0><0|_KB rearranged to (KA HA)(KB HB)
  int ka = nda / s.da, kb = ndb / s.db;
  CMatrix anc_a = CMatrix::Zero(ka, ka);
  anc_a(0, 0) = 1;
  CMatrix anc_b = CMatrix::Zero(kb, kb);
  anc_b(0, 0) = 1;
  CMatrix big = kron(kron(anc_a, s.state), anc_b); // (KA)(HA HB)(KB)
  FactorShape shape({ka, s.da, s.db, kb});
  out.state = permute_factors(big, shape, {0, 1, 3, 2}); // (KA, HA, KB, HB)
  out.da = nda;
  out.db = ndb;
  // untouched sites keep their original projections, padded over the new site
  if (!site_a) out.pvms_a = s.pvms_a;
  if (!site_b) out.pvms_b = s.pvms_b;
  return out;
}

// ---------------------------------------------------------------------------
// Reducibility

struct Reduction {
  CMatrix wa, wb;          // isometries H_i -> H~_i (x) H^res_i
  int res_a = 1, res_b = 1;
  CVector residual_state;  // pure state on res_A (x) res_B (x) P
  CVector purification;    // vector of the purification of s.state on (H_A H_B P)
  int pdim = 1;
};

// Purification vector of a density matrix on (H, P), P = rank.
inline CVector purification_vector(const CMatrix& rho, int& pdim, double cutoff = kRankCutoff) {
  auto eig = herm_eig(rho);
  int rank = 0;
  for (int k = 0; k < eig.eigenvalues.size(); ++k)
    if (eig.eigenvalues(k) > cutoff) ++rank;
  pdim = std::max(1, rank);
  CVector psi = CVector::Zero(rho.rows() * pdim);
  for (int k = 0; k < pdim; ++k) {
    double w = std::sqrt(std::max(0.0, eig.eigenvalues(k)));
    for (int i = 0; i < rho.rows(); ++i) psi(i * pdim + k) = w * eig.eigenvectors(i, k);
  }
  return psi;
}

// Checks [W Pi^x(y) (x) 1_P]|psi> = Pi~^x(y)|psi~> (x) |psi_res> entrywise,
// with one global phase estimated from the first pair of non-negligible
// norm.
struct ReductionCheck {
  bool ok = false;
  double residual = 0;
};

inline ReductionCheck verify_reduction(const Strategy& s, const Strategy& canon,
                                       const Reduction& r, double tol = 1e-7) {
  if (numerical_rank(canon.state) != 1)
    throw std::invalid_argument("verify_reduction: canonical state must be pure");
  auto sc = s.scenario(), scc = canon.scenario();
  if (sc.nxa != scc.nxa || sc.nxb != scc.nxb || sc.nya != scc.nya || sc.nyb != scc.nyb)
    throw std::invalid_argument("verify_reduction: scenario mismatch");
  const int da = s.da, db = s.db, ta = canon.da, tb = canon.db;
  const int ra = r.res_a, rb = r.res_b, pd = r.pdim;
  if (r.wa.rows() != ta * ra || r.wa.cols() != da || r.wb.rows() != tb * rb || r.wb.cols() != db)
    throw std::invalid_argument("verify_reduction: isometry shapes inconsistent");

  auto canon_vec = [&] {
    auto eig = herm_eig(canon.state);
    return CVector(eig.eigenvectors.col(0));
  }();

  CMatrix w = kron(r.wa, r.wb);
  FactorShape lhs_shape({ta, ra, tb, rb, pd});
  std::vector<int> regroup{0, 2, 1, 3, 4}; // to (H~A, H~B, resA, resB, P)

  Complex phase = 0;
  double worst = 0;
  bool phase_set = false;
  for (int xa = 0; xa < sc.nxa; ++xa)
    for (int xb = 0; xb < sc.nxb; ++xb)
      for (int ya = 0; ya < sc.nya; ++ya)
        for (int yb = 0; yb < sc.nyb; ++yb) {
          CMatrix proj = kron(s.pvms_a[static_cast<size_t>(xa)][static_cast<size_t>(ya)],
                              s.pvms_b[static_cast<size_t>(xb)][static_cast<size_t>(yb)]);
          CVector lhs0 = kron(proj, cidentity(pd)) * r.purification;
          CVector lhs = kron(w, cidentity(pd)) * lhs0;
          lhs = permute_factors(lhs, lhs_shape, regroup);
          CMatrix cproj = kron(canon.pvms_a[static_cast<size_t>(xa)][static_cast<size_t>(ya)],
                               canon.pvms_b[static_cast<size_t>(xb)][static_cast<size_t>(yb)]);
          CVector rhs_core = cproj * canon_vec;
          CVector rhs = kron(CMatrix(rhs_core), CMatrix(r.residual_state)).col(0);
          if (!phase_set && rhs.norm() > 1e-6 && lhs.norm() > 1e-6) {
            Complex overlap = rhs.dot(lhs); // conjugates rhs
            if (std::abs(overlap) > 1e-12) {
              phase = overlap / std::abs(overlap);
              phase_set = true;
            }
          }
          worst = std::max(worst, (lhs - phase * rhs).norm());
        }
  if (!phase_set) throw std::invalid_argument("verify_reduction: no non-negligible pair");
  ReductionCheck out;
  out.residual = worst;
  out.ok = worst <= tol;
  return out;
}

// ---------------------------------------------------------------------------
// Canonical Stinespring dilation of a strategy (the bridge construction)

// The measurement-ensemble Stinespring S_i = sum_{x,y} Pi_i^x(y) (x) |x><x|
// (x) |y>, as a channel {z_i, x_i} -> {y_i, h_i, c_i} with hidden h_i = H_i
// and c_i = the input copy.
inline QuantumChannel canonical_site_dilation(const std::vector<std::vector<CMatrix>>& pvms,
                                              int dim, const std::string& site) {
  const int nx = static_cast<int>(pvms.size());
  const int ny = static_cast<int>(pvms[0].size());
  CMatrix s = CMatrix::Zero(dim * nx * ny, dim * nx); // rows (h, c, y), cols (z, x)
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < ny; ++y) {
      const CMatrix& p = pvms[static_cast<size_t>(x)][static_cast<size_t>(y)];
      for (int h = 0; h < dim; ++h)
        for (int z = 0; z < dim; ++z)
          s((h * nx + x) * ny + y, z * nx + x) += p(h, z);
    }
  std::vector<Port> out_layout{Port{"h" + site, dim, Kind::quantum},
                               Port{"c" + site, nx, Kind::classical},
                               Port{"y" + site, ny, Kind::classical}};
  std::vector<Port> in_layout{Port{"z" + site, dim, Kind::quantum},
                              Port{"x" + site, nx, Kind::classical}};
  return isometry_channel(s, out_layout, in_layout);
}

// Full causal Stinespring dilation of the behaviour channel: purification of
// the state on (zA, zB, e0), both site dilations applied.  Hidden outputs:
// hA, cA, hB, cB, e0.
inline Channel strategy_dilation(const Strategy& s) {
  int pdim = 1;
  CVector psi = purification_vector(s.state, pdim);
  Interface st_ports(std::vector<Port>{Port{"zA", s.da, Kind::quantum},
                                       Port{"zB", s.db, Kind::quantum},
                                       Port{"e0", pdim, Kind::quantum}});
  Channel pi = make_quantum_state(psi * psi.adjoint(), st_ports);
  auto sc = s.scenario();
  Channel sa = canonical_site_dilation(s.pvms_a, s.da, "A");
  Channel sb = canonical_site_dilation(s.pvms_b, s.db, "B");
  Channel stage0 = parallel(
      parallel(pi, Channel(make_quantum_identity(Interface::single("xA", sc.nxa, Kind::classical)))),
      Channel(make_quantum_identity(Interface::single("xB", sc.nxb, Kind::classical))));
  Channel stage1 = parallel(parallel(sa, sb),
                            Channel(make_quantum_identity(Interface::single("e0", pdim, Kind::quantum))));
  return serial(stage1, stage0);
}

// The behaviour channel of a strategy via its dilation (sanity route).
inline Channel strategy_behaviour_channel(const Strategy& s) {
  return marginal(strategy_dilation(s), {"yA", "yB"});
}

enum class DerivationStatus { verified, refuted, inconclusive };

struct LocalDerivationResult {
  DerivationStatus status = DerivationStatus::inconclusive;
  double residual = 0;
  std::optional<Channel> gamma_a, gamma_b;
};

// Thm-bridge identity: (id (x) Gamma_A (x) Gamma_B) o [D_s with e0 trashed]
// = D_canon.  Verify mode checks supplied witnesses; search mode alternates
// CPTP fits over the two unknowns (bilinear, so failure is inconclusive).
inline LocalDerivationResult local_derivation(const Strategy& s, const Strategy& canon,
                                              const std::optional<std::pair<Channel, Channel>>& witnesses,
                                              double tol = 1e-7, int search_iters = 10) {
  if (numerical_rank(canon.state) != 1)
    throw std::invalid_argument("local_derivation: canonical state must be pure");
  // locally full rank hypothesis
  FactorShape cshape({canon.da, canon.db});
  CMatrix ma = partial_trace(canon.state, cshape, {0});
  CMatrix mb = partial_trace(canon.state, cshape, {1});
  if (herm_eig(ma).eigenvalues(canon.da - 1) <= 1e-9 ||
      herm_eig(mb).eigenvalues(canon.db - 1) <= 1e-9)
    throw std::invalid_argument("local_derivation: canonical state lacks locally full rank");

  LocalDerivationResult res;
  Behaviour bs = behaviour_of(s), bc = behaviour_of(canon);
  if ((bs.p - bc.p).norm() > 1e-7) {
    res.status = DerivationStatus::refuted; // behaviours differ, no witness exists
    res.residual = (bs.p - bc.p).norm();
    return res;
  }

  Channel ds = strategy_dilation(s);
  Channel dcanon = strategy_dilation(canon);
  auto sc = s.scenario();
  // trash the purifiers on both sides (canon's is 1-dimensional)
  std::set<std::string> keep{"yA", "yB", "hA", "cA", "hB", "cB"};
  Channel lhs_base = marginal(ds, keep);
  CMatrix target = to_quantum(marginal(dcanon, keep)).choi();

  Interface ga_in(std::vector<Port>{Port{"hA", s.da, Kind::quantum}, Port{"cA", sc.nxa, Kind::classical}});
  Interface ga_out(std::vector<Port>{Port{"hA", canon.da, Kind::quantum}, Port{"cA", sc.nxa, Kind::classical}});
  Interface gb_in(std::vector<Port>{Port{"hB", s.db, Kind::quantum}, Port{"cB", sc.nxb, Kind::classical}});
  Interface gb_out(std::vector<Port>{Port{"hB", canon.db, Kind::quantum}, Port{"cB", sc.nxb, Kind::classical}});
  Channel id_y = make_quantum_identity(Interface(std::vector<Port>{
      Port{"yA", sc.nya, Kind::classical}, Port{"yB", sc.nyb, Kind::classical}}));
  auto assemble = [&](const Channel& ga, const Channel& gb) {
    return serial(parallel(parallel(ga, gb), id_y), lhs_base);
  };

  if (witnesses) {
    res.residual = (to_quantum(assemble(witnesses->first, witnesses->second)).choi() - target).norm();
    res.status = res.residual <= tol ? DerivationStatus::verified : DerivationStatus::inconclusive;
    if (res.status == DerivationStatus::verified) {
      res.gamma_a = witnesses->first;
      res.gamma_b = witnesses->second;
    }
    return res;
  }

  Channel ga = make_uniform(ga_in, ga_out);
  Channel gb = make_uniform(gb_in, gb_out);
  CpFitOptions opts;
  opts.max_iterations = 4000;
  double best = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < search_iters; ++iter) {
    {
      auto affine = [&](const CMatrix& j) {
        Channel g = QuantumChannel::from_choi(ga_out.ports(), ga_in.ports(), j);
        return to_quantum(assemble(g, gb)).choi();
      };
      auto fit = cp_fit(affine, target, ga_in.total_dim(), ga_out.total_dim(), 1e9, opts);
      if (fit.choi) ga = QuantumChannel::from_choi(ga_out.ports(), ga_in.ports(), *fit.choi);
    }
    {
      auto affine = [&](const CMatrix& j) {
        Channel g = QuantumChannel::from_choi(gb_out.ports(), gb_in.ports(), j);
        return to_quantum(assemble(ga, g)).choi();
      };
      auto fit = cp_fit(affine, target, gb_in.total_dim(), gb_out.total_dim(), 1e9, opts);
      if (fit.choi) gb = QuantumChannel::from_choi(gb_out.ports(), gb_in.ports(), *fit.choi);
    }
    double r = (to_quantum(assemble(ga, gb)).choi() - target).norm();
    best = std::min(best, r);
    if (r <= tol) {
      res.status = DerivationStatus::verified;
      res.residual = r;
      res.gamma_a = ga;
      res.gamma_b = gb;
      return res;
    }
    if (iter > 2 && std::abs(best - r) < 1e-12) break;
  }
  res.residual = best;
  return res;
}

// ---------------------------------------------------------------------------
// Security / extremality

struct SecurityResult {
  bool decomposition_trivial = false; // all parts equal the behaviour
  std::optional<int> witness_index;   // a non-factoring component
  bool ns_vertex = false;             // extremality in the NS polytope
  std::optional<RMatrix> perturbation; // feasible two-sided direction if not a vertex
};

inline SecurityResult security_extremality(const Behaviour& b, const RVector& weights,
                                           const std::vector<Behaviour>& parts,
                                           double tol = 1e-8) {
  if (static_cast<int>(parts.size()) != weights.size())
    throw std::invalid_argument("security_extremality: weight/part count mismatch");
  RMatrix mix = RMatrix::Zero(b.p.rows(), b.p.cols());
  for (size_t k = 0; k < parts.size(); ++k) mix += weights(static_cast<Eigen::Index>(k)) * parts[k].p;
  if ((mix - b.p).norm() > 1e-9)
    throw std::invalid_argument("security_extremality: decomposition does not reproduce b");

  SecurityResult res;
  // the flagged acausal dilation P(y, k | x) = s_k P_k(y|x) factors iff all
  // the parts coincide with b
  res.decomposition_trivial = true;
  for (size_t k = 0; k < parts.size(); ++k)
    if ((parts[k].p - b.p).cwiseAbs().maxCoeff() > tol) {
      res.decomposition_trivial = false;
      res.witness_index = static_cast<int>(k);
      break;
    }

  // independent diagnostic: vertex test in the non-signalling polytope.
  // equality rows: normalisation + non-signalling; active rows: zero entries.
  const auto sc = b.sc;
  const int nv = static_cast<int>(b.p.size());
  auto idx = [&](int ya, int yb, int xa, int xb) {
    return (ya * sc.nyb + yb) * (sc.nxa * sc.nxb) + (xa * sc.nxb + xb);
  };
  std::vector<RVector> rows;
  for (int xa = 0; xa < sc.nxa; ++xa)
    for (int xb = 0; xb < sc.nxb; ++xb) {
      RVector r = RVector::Zero(nv);
      for (int ya = 0; ya < sc.nya; ++ya)
        for (int yb = 0; yb < sc.nyb; ++yb) r(idx(ya, yb, xa, xb)) = 1.0;
      rows.push_back(r);
    }
  for (int xa = 0; xa < sc.nxa; ++xa)
    for (int ya = 0; ya < sc.nya; ++ya)
      for (int xb = 1; xb < sc.nxb; ++xb) {
        RVector r = RVector::Zero(nv);
        for (int yb = 0; yb < sc.nyb; ++yb) {
          r(idx(ya, yb, xa, xb)) += 1.0;
          r(idx(ya, yb, xa, 0)) -= 1.0;
        }
        rows.push_back(r);
      }
  for (int xb = 0; xb < sc.nxb; ++xb)
    for (int yb = 0; yb < sc.nyb; ++yb)
      for (int xa = 1; xa < sc.nxa; ++xa) {
        RVector r = RVector::Zero(nv);
        for (int ya = 0; ya < sc.nya; ++ya) {
          r(idx(ya, yb, xa, xb)) += 1.0;
          r(idx(ya, yb, 0, xb)) -= 1.0;
        }
        rows.push_back(r);
      }
  double min_pos = 1.0;
  for (int ya = 0; ya < sc.nya; ++ya)
    for (int yb = 0; yb < sc.nyb; ++yb)
      for (int xa = 0; xa < sc.nxa; ++xa)
        for (int xb = 0; xb < sc.nxb; ++xb) {
          double v = b.p(ya * sc.nyb + yb, xa * sc.nxb + xb);
          if (v <= 1e-10) {
            RVector r = RVector::Zero(nv);
            r(idx(ya, yb, xa, xb)) = 1.0;
            rows.push_back(r);
          } else {
            min_pos = std::min(min_pos, v);
          }
        }
  RMatrix m(static_cast<Eigen::Index>(rows.size()), nv);
  for (size_t k = 0; k < rows.size(); ++k) m.row(static_cast<Eigen::Index>(k)) = rows[k];
  Eigen::JacobiSVD<RMatrix> svd(m, Eigen::ComputeFullV);
  int rank = 0;
  for (int k = 0; k < svd.singularValues().size(); ++k)
    if (svd.singularValues()(k) > 1e-9 * svd.singularValues()(0)) ++rank;
  res.ns_vertex = (rank == nv);
  if (!res.ns_vertex) {
    RVector dir = svd.matrixV().col(nv - 1);
    double eps = 0.5 * min_pos / std::max(1e-12, dir.cwiseAbs().maxCoeff());
    // confirm both perturbed points stay in the polytope (entries >= 0)
    RMatrix d = RMatrix::Zero(b.p.rows(), b.p.cols());
    for (int ya = 0; ya < sc.nya; ++ya)
      for (int yb = 0; yb < sc.nyb; ++yb)
        for (int xa = 0; xa < sc.nxa; ++xa)
          for (int xb = 0; xb < sc.nxb; ++xb)
            d(ya * sc.nyb + yb, xa * sc.nxb + xb) = eps * dir(idx(ya, yb, xa, xb));
    if ((b.p + d).minCoeff() >= -1e-12 && (b.p - d).minCoeff() >= -1e-12) res.perturbation = d;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Purely non-signalling recharacterisation

struct PurelyNsResult {
  bool found = false;
  double residual = 0;
  int split_a = 1, split_b = 1;
  std::vector<int> assignment; // env basis -> grid (row-major a x b), when found
};

// Direct test on a supplied total isometric dilation: non-signalling from xB
// to {yA} u EA and from xA to {yB} u EB.
inline PurelyNsResult purely_nonsignalling_direct(const Channel& total,
                                                  const std::set<std::string>& env_a,
                                                  const std::set<std::string>& env_b,
                                                  const std::string& xa, const std::string& xb,
                                                  const std::string& ya, const std::string& yb,
                                                  double tol = 1e-8) {
  std::set<std::string> to_a = env_a, to_b = env_b;
  to_a.insert(ya);
  to_b.insert(yb);
  auto ra = is_nonsignalling(total, {xb}, to_a, tol);
  auto rb = is_nonsignalling(total, {xa}, to_b, tol);
  PurelyNsResult res;
  res.residual = std::max(ra.residual, rb.residual);
  res.found = ra.nonsignalling && rb.nonsignalling;
  return res;
}

// Sweep over factorisations of the minimal Stinespring environment, modulo
// local basis relabelings, with a per-factor dimension cap. A failed sweep
// means "no split found within the cap", not a disproof.
inline PurelyNsResult purely_nonsignalling_sweep(const QuantumChannel& candidate, int dim_cap = 4,
                                                 double tol = 1e-8) {
  if (candidate.input().size() != 2 || candidate.output().size() != 2)
    throw std::invalid_argument("purely_nonsignalling_sweep: bipartite channel required");
  const std::string xa = candidate.input().port(0).name, xb = candidate.input().port(1).name;
  const std::string ya = candidate.output().port(0).name, yb = candidate.output().port(1).name;
  auto sd = stinespring_minimal(candidate, "~env");
  const int e = sd.env_dim;
  PurelyNsResult best;
  best.residual = std::numeric_limits<double>::infinity();
  const int dout = candidate.dout();

  for (int a = 1; a <= e; ++a) {
    if (e % a != 0) continue;
    const int b = e / a;
    if (a > dim_cap || b > dim_cap) continue;
    // canonical coset representatives of S_e / (S_a x S_b) acting on the grid
    std::vector<int> perm(static_cast<size_t>(e));
    for (int k = 0; k < e; ++k) perm[static_cast<size_t>(k)] = k;
    do {
      // one representative per (row-relabel x column-relabel) orbit: the
      // first row and the first column ascending (every orbit has one)
      bool canonical = true;
      for (int c = 1; c < b && canonical; ++c)
        if (perm[static_cast<size_t>(c)] < perm[static_cast<size_t>(c - 1)]) canonical = false;
      for (int r = 1; r < a && canonical; ++r)
        if (perm[static_cast<size_t>(r * b)] < perm[static_cast<size_t>((r - 1) * b)])
          canonical = false;
      if (!canonical) continue;

      // total channel with env coordinates rearranged to the grid
      CMatrix s2 = CMatrix::Zero(sd.isometry.rows(), sd.isometry.cols());
      for (int m = 0; m < dout; ++m)
        for (int k = 0; k < e; ++k) s2.row(m * e + k) = sd.isometry.row(m * e + perm[static_cast<size_t>(k)]);
      std::vector<Port> out_layout = candidate.output().ports();
      out_layout.push_back(Port{"~ea", a, Kind::quantum});
      out_layout.push_back(Port{"~eb", b, Kind::quantum});
      Channel total = isometry_channel(s2, out_layout, candidate.input().ports());
      auto r = purely_nonsignalling_direct(total, {"~ea"}, {"~eb"}, xa, xb, ya, yb, tol);
      if (r.residual < best.residual) {
        best = r;
        best.split_a = a;
        best.split_b = b;
        best.assignment = perm;
      }
      if (best.found) return best;
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  return best;
}

} // namespace dilatio

#pragma once

// Classical Bell-channel analysis: convex decomposition into deterministic
// atoms, uniqueness via per-atom weight LPs, maximal-dilation enumeration
// (copy-input + copy-label form) and rigidity verdicts.

#include "dilatio/behaviour.hpp"
#include "dilatio/causal.hpp"
#include "dilatio/lp.hpp"

namespace dilatio {

inline constexpr int kAtomCap = 4096;

// Deterministic function X -> Y encoded by its value tuple.
struct DetAtom {
  std::vector<int> values; // values[x] in [0, ny)

  bool operator==(const DetAtom& o) const { return values == o.values; }
  bool operator<(const DetAtom& o) const { return values < o.values; }
};

struct DetDecomposition {
  std::vector<DetAtom> atoms;
  RVector weights;
  bool proper = false; // weights > 0, atoms pairwise distinct

  RMatrix reconstruct(int ny) const {
    const int nx = atoms.empty() ? 1 : static_cast<int>(atoms[0].values.size());
    RMatrix t = RMatrix::Zero(ny, nx);
    for (size_t k = 0; k < atoms.size(); ++k)
      for (int x = 0; x < nx; ++x) t(atoms[k].values[static_cast<size_t>(x)], x) += weights(static_cast<Eigen::Index>(k));
    return t;
  }
};

namespace rigdetail {

inline long long ipow(long long b, int e) {
  long long r = 1;
  while (e-- > 0) r *= b;
  return r;
}

inline std::vector<DetAtom> enumerate_atoms(int nx, int ny, long long cap = kAtomCap) {
  long long total = ipow(ny, nx);
  if (total > cap)
    throw std::invalid_argument("deterministic atom enumeration exceeds the configured cap");
  std::vector<DetAtom> atoms;
  for (long long code = 0; code < total; ++code) {
    DetAtom a;
    long long c = code;
    for (int x = 0; x < nx; ++x) {
      a.values.push_back(static_cast<int>(c % ny));
      c /= ny;
    }
    atoms.push_back(a);
  }
  return atoms;
}

// Constraint matrix: rows over (y, x) entries, columns over atoms.
inline RMatrix atom_matrix(const std::vector<DetAtom>& atoms, int nx, int ny) {
  RMatrix a = RMatrix::Zero(nx * ny, static_cast<Eigen::Index>(atoms.size()));
  for (size_t k = 0; k < atoms.size(); ++k)
    for (int x = 0; x < nx; ++x)
      a(atoms[k].values[static_cast<size_t>(x)] * nx + x, static_cast<Eigen::Index>(k)) = 1.0;
  return a;
}

inline RVector table_vec(const RMatrix& t) {
  RVector b(t.rows() * t.cols());
  for (int y = 0; y < t.rows(); ++y)
    for (int x = 0; x < t.cols(); ++x) b(y * t.cols() + x) = t(y, x);
  return b;
}

inline DetDecomposition properize(DetDecomposition d) {
  std::map<DetAtom, double> merged;
  for (size_t k = 0; k < d.atoms.size(); ++k)
    if (d.weights(static_cast<Eigen::Index>(k)) > 1e-12) merged[d.atoms[k]] += d.weights(static_cast<Eigen::Index>(k));
  DetDecomposition out;
  out.weights = RVector(static_cast<Eigen::Index>(merged.size()));
  int k = 0;
  for (const auto& [a, w] : merged) {
    out.atoms.push_back(a);
    out.weights(k++) = w;
  }
  out.proper = true;
  return out;
}

} // namespace rigdetail

// Greedy peeling: repeatedly pick the argmax function of the residual table.
// Produces a proper decomposition for every stochastic table.
inline DetDecomposition det_decompose(const ClassicalChannel& t, long long cap = kAtomCap) {
  const int nx = t.input().total_dim(), ny = t.output().total_dim();
  if (rigdetail::ipow(ny, nx) > cap)
    throw std::invalid_argument("det_decompose: atom count exceeds cap");
  RMatrix r = t.table();
  DetDecomposition d;
  std::vector<double> ws;
  for (int guard = 0; guard < nx * ny + 2; ++guard) {
    if (r.cwiseAbs().maxCoeff() < 1e-12) break;
    DetAtom a;
    double w = std::numeric_limits<double>::infinity();
    for (int x = 0; x < nx; ++x) {
      int best = 0;
      for (int y = 1; y < ny; ++y)
        if (r(y, x) > r(best, x)) best = y;
      a.values.push_back(best);
      w = std::min(w, r(best, x));
    }
    if (w < 1e-12) break;
    for (int x = 0; x < nx; ++x) r(a.values[static_cast<size_t>(x)], x) -= w;
    d.atoms.push_back(a);
    ws.push_back(w);
  }
  d.weights = RVector(static_cast<Eigen::Index>(ws.size()));
  for (size_t k = 0; k < ws.size(); ++k) d.weights(static_cast<Eigen::Index>(k)) = ws[k];
  d = rigdetail::properize(d);
  if ((d.reconstruct(ny) - t.table()).norm() > 1e-9)
    throw std::runtime_error("det_decompose: reconstruction failed");
  return d;
}

struct UniquenessResult {
  bool unique = false;
  DetDecomposition decomposition;             // some proper decomposition
  std::optional<DetDecomposition> alternative; // a distinct one when not unique
};

// Uniqueness by per-atom weight range over the feasibility polytope
// { w >= 0 : A w = vec(T) }.
inline UniquenessResult decomposition_unique(const ClassicalChannel& t, long long cap = kAtomCap,
                                             double tol = 1e-8) {
  const int nx = t.input().total_dim(), ny = t.output().total_dim();
  auto atoms = rigdetail::enumerate_atoms(nx, ny, cap);
  RMatrix a = rigdetail::atom_matrix(atoms, nx, ny);
  RVector b = rigdetail::table_vec(t.table());

  UniquenessResult res;
  res.decomposition = det_decompose(t, cap);
  res.unique = true;
  for (size_t k = 0; k < atoms.size(); ++k) {
    RVector c = RVector::Zero(static_cast<Eigen::Index>(atoms.size()));
    c(static_cast<Eigen::Index>(k)) = 1.0;
    LinearProgram pmin = LinearProgram::minimize(c);
    pmin.eq_lhs = a;
    pmin.eq_rhs = b;
    auto rmin = lp_solve(pmin);
    LinearProgram pmax = pmin;
    pmax.maximize = true;
    auto rmax = lp_solve(pmax);
    if (rmin.status != LpStatus::optimal || rmax.status != LpStatus::optimal)
      throw std::runtime_error("decomposition_unique: weight LP failed");
    if (rmax.objective - rmin.objective > tol) {
      res.unique = false;
      // the two optima give distinct proper decompositions
      DetDecomposition lo, hi;
      lo.atoms = atoms;
      lo.weights = rmin.x;
      hi.atoms = atoms;
      hi.weights = rmax.x;
      res.decomposition = rigdetail::properize(hi);
      res.alternative = rigdetail::properize(lo);
      break;
    }
  }
  return res;
}

// All vertices of the weight polytope (proper extreme decompositions), by
// support-subset enumeration up to the rank bound. Exponential but capped.
inline std::vector<DetDecomposition> extreme_decompositions(const ClassicalChannel& t,
                                                            long long cap = kAtomCap,
                                                            long long subset_cap = 2'000'000) {
  const int nx = t.input().total_dim(), ny = t.output().total_dim();
  auto atoms = rigdetail::enumerate_atoms(nx, ny, cap);
  RMatrix a = rigdetail::atom_matrix(atoms, nx, ny);
  RVector b = rigdetail::table_vec(t.table());
  const int n = static_cast<int>(atoms.size());
  const int rank = static_cast<int>(Eigen::FullPivLU<RMatrix>(a).rank());

  std::vector<DetDecomposition> out;
  std::vector<int> subset;
  long long examined = 0;
  auto try_subset = [&]() {
    RMatrix as(a.rows(), static_cast<Eigen::Index>(subset.size()));
    for (size_t j = 0; j < subset.size(); ++j) as.col(static_cast<Eigen::Index>(j)) = a.col(subset[j]);
    Eigen::FullPivLU<RMatrix> lu(as);
    if (lu.rank() < static_cast<int>(subset.size())) return; // not a basic support
    RVector w = as.colPivHouseholderQr().solve(b);
    if ((as * w - b).norm() > 1e-9) return;
    for (int j = 0; j < w.size(); ++j)
      if (w(j) < 1e-10) return;
    DetDecomposition d;
    for (size_t j = 0; j < subset.size(); ++j) d.atoms.push_back(atoms[static_cast<size_t>(subset[j])]);
    d.weights = w;
    d.proper = true;
    for (const auto& seen : out) {
      if (seen.atoms == d.atoms && (seen.weights - d.weights).norm() < 1e-8) return;
    }
    out.push_back(d);
  };
  std::function<void(int)> rec = [&](int start) {
    if (++examined > subset_cap)
      throw std::runtime_error("extreme_decompositions: subset cap exceeded");
    if (!subset.empty()) try_subset();
    if (static_cast<int>(subset.size()) >= rank) return;
    for (int k = start; k < n; ++k) {
      subset.push_back(k);
      rec(k + 1);
      subset.pop_back();
    }
  };
  rec(0);
  return out;
}

struct RigidityVerdict {
  bool rigid = false;
  std::vector<DetDecomposition> extreme; // the maximal-dilation index set
};

// Maximal causal dilation of a unipartite Bell-channel from a proper
// decomposition: draw r ~ p, copy r and the input, output f_r(x).
inline CausalDilation maximal_dilation_of(const ClassicalChannel& t, const DetDecomposition& d,
                                          const std::string& in_copy = "in_copy",
                                          const std::string& label = "label") {
  const int nx = t.input().total_dim(), ny = t.output().total_dim();
  const int nr = static_cast<int>(d.atoms.size());
  RMatrix total = RMatrix::Zero(ny * nx * nr, nx); // rows (y, in_copy, label)
  for (int r = 0; r < nr; ++r)
    for (int x = 0; x < nx; ++x) {
      int y = d.atoms[static_cast<size_t>(r)].values[static_cast<size_t>(x)];
      total((y * nx + x) * nr + r, x) += d.weights(r);
    }
  std::vector<Port> out_layout = t.output().ports();
  out_layout.push_back(Port{in_copy, nx, Kind::classical});
  out_layout.push_back(Port{label, nr, Kind::classical});
  CausalDilation cd;
  CausalSpec spec;
  const std::string xname = t.input().port(0).name;
  const std::string yname = t.output().port(0).name;
  spec.set(yname, {xname});
  spec.set(in_copy, {xname});
  spec.set(label, {});
  cd.cc = CausalChannel(ClassicalChannel::from_table(out_layout, t.input().ports(), total), spec);
  cd.base = CausalChannel(Channel(t), CausalSpec::primitive(t.input(), t.output()));
  cd.hidden_out = {in_copy, label};
  return cd;
}

// Rigid iff the convex decomposition into functions is unique; the extreme
// decompositions index the maximal causal dilations.
inline RigidityVerdict unipartite_rigid(const ClassicalChannel& t, long long cap = kAtomCap) {
  RigidityVerdict v;
  auto uni = decomposition_unique(t, cap);
  v.rigid = uni.unique;
  if (rigdetail::ipow(t.output().total_dim(), t.input().total_dim()) <= 256)
    v.extreme = extreme_decompositions(t, cap);
  else
    v.extreme = {uni.decomposition};
  return v;
}

// ---------------------------------------------------------------------------
// Bipartite analysis over product atoms g_A x g_B

struct BipartiteDecomposition {
  bool feasible = false;                       // infeasible => not a CIT Bell-channel
  std::vector<std::pair<DetAtom, DetAtom>> atoms;
  RVector weights;
  bool unique = false;
};

inline BipartiteDecomposition bipartite_product_decompose(const ClassicalChannel& t,
                                                          const BellScenario& sc,
                                                          long long cap = kAtomCap,
                                                          double tol = 1e-8) {
  using namespace rigdetail;
  if (ipow(sc.nya, sc.nxa) * ipow(sc.nyb, sc.nxb) > cap)
    throw std::invalid_argument("bipartite_product_decompose: atom count exceeds cap");
  // non-signalling both ways is a precondition for any product decomposition
  Behaviour b = Behaviour::from_channel(t);
  if (b.ns_residual() > 1e-8)
    throw std::invalid_argument("bipartite_product_decompose: channel is signalling");

  auto atoms_a = enumerate_atoms(sc.nxa, sc.nya, cap);
  auto atoms_b = enumerate_atoms(sc.nxb, sc.nyb, cap);
  std::vector<std::pair<DetAtom, DetAtom>> atoms;
  for (const auto& ga : atoms_a)
    for (const auto& gb : atoms_b) atoms.emplace_back(ga, gb);

  const int rows = static_cast<int>(t.table().size());
  RMatrix a = RMatrix::Zero(rows, static_cast<Eigen::Index>(atoms.size()));
  for (size_t k = 0; k < atoms.size(); ++k)
    for (int xa = 0; xa < sc.nxa; ++xa)
      for (int xb = 0; xb < sc.nxb; ++xb) {
        int ya = atoms[k].first.values[static_cast<size_t>(xa)];
        int yb = atoms[k].second.values[static_cast<size_t>(xb)];
        int row = (ya * sc.nyb + yb) * (sc.nxa * sc.nxb) + (xa * sc.nxb + xb);
        a(row, static_cast<Eigen::Index>(k)) = 1.0;
      }
  RVector bv(rows);
  for (int y = 0; y < t.table().rows(); ++y)
    for (int x = 0; x < t.table().cols(); ++x) bv(y * t.table().cols() + x) = t.table()(y, x);

  BipartiteDecomposition out;
  // feasibility with L1 slack
  const int n = static_cast<int>(atoms.size());
  LinearProgram feas = LinearProgram::minimize(RVector::Zero(n + 2 * rows));
  feas.objective.tail(2 * rows).setOnes();
  feas.eq_lhs = RMatrix::Zero(rows, n + 2 * rows);
  feas.eq_lhs.leftCols(n) = a;
  for (int i = 0; i < rows; ++i) {
    feas.eq_lhs(i, n + 2 * i) = 1.0;
    feas.eq_lhs(i, n + 2 * i + 1) = -1.0;
  }
  feas.eq_rhs = bv;
  auto fr = lp_solve(feas);
  if (fr.status != LpStatus::optimal || fr.objective > tol) return out; // infeasible
  out.feasible = true;
  out.atoms = atoms;
  out.weights = fr.x.head(n);

  out.unique = true;
  for (int k = 0; k < n; ++k) {
    RVector c = RVector::Zero(n);
    c(k) = 1.0;
    LinearProgram pmin = LinearProgram::minimize(c);
    pmin.eq_lhs = a;
    pmin.eq_rhs = bv;
    auto rmin = lp_solve(pmin);
    LinearProgram pmax = pmin;
    pmax.maximize = true;
    auto rmax = lp_solve(pmax);
    if (rmin.status != LpStatus::optimal || rmax.status != LpStatus::optimal) {
      out.unique = false;
      break;
    }
    if (rmax.objective - rmin.objective > tol) {
      out.unique = false;
      break;
    }
  }
  return out;
}

struct BipartiteRigidity {
  bool feasible = false;
  bool rigid_sufficient = false; // unique product decomposition => rigid
};

inline BipartiteRigidity bipartite_rigid_sufficient(const ClassicalChannel& t,
                                                    const BellScenario& sc,
                                                    long long cap = kAtomCap) {
  auto d = bipartite_product_decompose(t, sc, cap);
  BipartiteRigidity v;
  v.feasible = d.feasible;
  v.rigid_sufficient = d.feasible && d.unique;
  return v;
}

} // namespace dilatio

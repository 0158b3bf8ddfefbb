#pragma once

// Dilation algebra: Stinespring/purification construction, minimality,
// purity tests, the CIT complete dilation, complementary channels,
// environment-morphism feasibility (derivability / Blackwell order) and
// left-inverse search.

#include "dilatio/cp_fit.hpp"
#include "dilatio/lp.hpp"

namespace dilatio {

struct Dilation {
  Channel base;
  Channel total;
  std::set<std::string> hidden_in, hidden_out;

  std::set<std::string> visible_out() const {
    std::set<std::string> v;
    for (const Port& p : output_of(total).ports())
      if (!hidden_out.count(p.name)) v.insert(p.name);
    return v;
  }
};

struct DilationCheck {
  bool ok = false;
  double residual = 0;
};

// Checks marginal(total, visible outs) == base (x) trash(hidden ins).
inline DilationCheck verify_dilation(const Dilation& d, double tol = kAlgTol) {
  DilationCheck r;
  Channel lhs = marginal(d.total, d.visible_out());
  Channel rhs = d.base;
  if (!d.hidden_in.empty()) {
    Interface hidden = input_of(d.total).sub(d.hidden_in);
    rhs = parallel(rhs, make_trash(hidden));
  }
  r.residual = channel_dist(lhs, rhs);
  r.ok = r.residual <= tol;
  return r;
}

struct IsometricDilation {
  CMatrix isometry;       // S: in -> out (x) env, rows laid out (out, env)
  int env_dim = 1;
  Channel base;
  std::string env_port;

  // The conjugation channel A -> S A S* with the environment as hidden port.
  Dilation as_dilation() const {
    const Interface& in = input_of(base);
    const Interface& out = output_of(base);
    std::vector<Port> out_layout = out.ports();
    out_layout.push_back(Port{env_port, env_dim, Kind::quantum});
    Dilation d;
    d.base = base;
    d.total = isometry_channel(isometry, out_layout, in.ports());
    d.hidden_out = {env_port};
    return d;
  }
};

// Minimal Stinespring dilation: environment dimension = Choi rank, Kraus
// operators from the Choi eigenvectors, S = sum_k K_k (x) |k>.
inline IsometricDilation stinespring_minimal(const QuantumChannel& q,
                                             const std::string& env_port = "env",
                                             double cutoff = kRankCutoff) {
  auto diag = validate(q, 1e-7);
  if (!diag.pass) throw std::invalid_argument("stinespring_minimal: channel is not CPTP");
  const int di = q.din(), dv = q.dout();
  auto eig = herm_eig(q.choi());
  int rank = 0;
  for (int k = 0; k < eig.eigenvalues.size(); ++k)
    if (eig.eigenvalues(k) > cutoff) ++rank;
  if (rank == 0) throw std::runtime_error("stinespring_minimal: zero-rank Choi");
  CMatrix s(dv * rank, di);
  for (int k = 0; k < rank; ++k) {
    const double w = std::sqrt(eig.eigenvalues(k));
    for (int m = 0; m < dv; ++m)
      for (int i = 0; i < di; ++i) s(m * rank + k, i) = w * eig.eigenvectors(m * di + i, k);
  }
  IsometricDilation d;
  d.isometry = fix_global_phase(s);
  d.env_dim = rank;
  d.base = q;
  d.env_port = env_port;
  return d;
}

// Purification of a state (a channel with trivial input).
inline IsometricDilation purify(const QuantumChannel& state, const std::string& env_port = "env") {
  if (!state.input().empty()) throw std::invalid_argument("purify: not a state");
  return stinespring_minimal(state, env_port);
}

// Dilational purity: Choi rank one (quantum); point-mass state (classical).
inline bool is_pure(const Channel& c, double cutoff = kRankCutoff) {
  if (is_classical(c)) {
    const auto& cc = std::get<ClassicalChannel>(c);
    if (!cc.input().empty()) return false; // only probabilistically pure states
    int support = 0;
    for (int y = 0; y < cc.table().rows(); ++y)
      if (cc.table()(y, 0) > cutoff) ++support;
    return support == 1;
  }
  return numerical_rank(std::get<QuantumChannel>(c).choi(), cutoff) == 1;
}

inline std::string unique_port_name(std::string base, const std::vector<const Interface*>& taken) {
  auto used = [&](const std::string& n) {
    for (const Interface* i : taken)
      if (i->has(n)) return true;
    return false;
  };
  while (used(base)) base += "'";
  return base;
}

// Environment marginal of a minimal Stinespring dilation.
inline QuantumChannel complementary(const QuantumChannel& q) {
  const std::string env = unique_port_name("env", {&q.input(), &q.output()});
  IsometricDilation sd = stinespring_minimal(q, env);
  Dilation d = sd.as_dilation();
  return std::get<QuantumChannel>(marginal(d.total, {env}));
}

// Completeness construction in CIT: copy both the input and the output.
// Hidden outputs: "<in-copy-port>" and "<out-copy-port>".
inline Dilation cit_complete_dilation(const ClassicalChannel& t,
                                      const std::string& in_copy = "in_copy",
                                      const std::string& out_copy = "out_copy") {
  const int di = t.input().total_dim(), dv = t.output().total_dim();
  // rows laid out (y, in_copy, out_copy) over [out ports..., copies]
  RMatrix table = RMatrix::Zero(dv * di * dv, std::max(di, 1));
  for (int x = 0; x < di; ++x)
    for (int y = 0; y < dv; ++y) table((y * di + x) * dv + y, x) = t.table()(y, x);
  std::vector<Port> out_layout = t.output().ports();
  out_layout.push_back(Port{in_copy, di, Kind::classical});
  out_layout.push_back(Port{out_copy, dv, Kind::classical});
  Dilation d;
  d.base = t;
  d.total = ClassicalChannel::from_table(out_layout, t.input().ports(), table);
  d.hidden_out = {in_copy, out_copy};
  return d;
}

// ---------------------------------------------------------------------------
// Environment morphisms

struct EnvMorphResult {
  std::optional<Channel> morphism; // G with (id (x) G) o l.total = lp.total
  double residual = 0;
};

// Blackwell order between classical channels with a common input system:
// finds stochastic M with  lp = M o l  (LP feasibility, L1-minimised).
inline EnvMorphResult blackwell_morph(const ClassicalChannel& l, const ClassicalChannel& lp,
                                      double tol = kSolverTol) {
  if (!(l.input() == lp.input()))
    throw std::invalid_argument("blackwell_morph: input interfaces differ");
  const int de = l.output().total_dim();
  const int df = lp.output().total_dim();
  const int dx = l.input().total_dim();
  // variables: M entries (df*de), then slack pair per data entry
  const int nm = df * de;
  const int nd = df * dx;
  LinearProgram p = LinearProgram::minimize(RVector::Zero(nm + 2 * nd));
  p.objective.tail(2 * nd).setOnes();
  p.eq_lhs = RMatrix::Zero(nd + de, nm + 2 * nd);
  p.eq_rhs = RVector::Zero(nd + de);
  for (int f = 0; f < df; ++f)
    for (int x = 0; x < dx; ++x) {
      int row = f * dx + x;
      for (int e = 0; e < de; ++e) p.eq_lhs(row, f * de + e) = l.table()(e, x);
      p.eq_lhs(row, nm + 2 * row) = 1.0;
      p.eq_lhs(row, nm + 2 * row + 1) = -1.0;
      p.eq_rhs(row) = lp.table()(f, x);
    }
  for (int e = 0; e < de; ++e) { // columns of M sum to one
    for (int f = 0; f < df; ++f) p.eq_lhs(nd + e, f * de + e) = 1.0;
    p.eq_rhs(nd + e) = 1.0;
  }
  auto r = lp_solve(p);
  EnvMorphResult out;
  if (r.status != LpStatus::optimal) {
    out.residual = std::numeric_limits<double>::infinity();
    return out;
  }
  RMatrix m(df, de);
  for (int f = 0; f < df; ++f)
    for (int e = 0; e < de; ++e) m(f, e) = std::max(0.0, r.x(f * de + e));
  for (int e = 0; e < de; ++e) m.col(e) /= m.col(e).sum();
  ClassicalChannel g = ClassicalChannel::from_table(lp.output().ports(), l.output().ports(), m);
  out.residual = (g.table() * l.table() - lp.table()).norm();
  if (out.residual <= tol) out.morphism = g;
  return out;
}

// Derivability of one-sided dilations: finds G on the hidden systems with
// (id_visible (x) G) o l.total = lp.total within tol.
inline EnvMorphResult env_morph(const Dilation& l, const Dilation& lp, double tol = kSolverTol,
                                const CpFitOptions& opts = {}) {
  if (!l.hidden_in.empty() || !lp.hidden_in.empty())
    throw std::invalid_argument("env_morph: only one-sided dilations are supported");
  if (channel_dist(l.base, lp.base) > 1e-6)
    throw std::invalid_argument("env_morph: dilations have different bases");

  Interface he = output_of(l.total).sub(l.hidden_out);
  // Clashes between lp's hidden names and l's ports are resolved by an
  // internal rename, undone on the returned morphism.
  {
    std::map<std::string, std::string> fresh;
    for (const std::string& n : lp.hidden_out)
      if (output_of(l.total).has(n)) fresh[n] = unique_port_name(n + "~", {&output_of(l.total)});
    if (!fresh.empty()) {
      Dilation lp2 = lp;
      lp2.total = rename_ports(lp.total, fresh);
      lp2.hidden_out.clear();
      for (const std::string& n : lp.hidden_out)
        lp2.hidden_out.insert(fresh.count(n) ? fresh.at(n) : n);
      EnvMorphResult r = env_morph(l, lp2, tol, opts);
      if (r.morphism) {
        std::map<std::string, std::string> back;
        for (const auto& [from, to] : fresh) back[to] = from;
        r.morphism = rename_ports(*r.morphism, back);
      }
      return r;
    }
  }
  Interface hf = output_of(lp.total).sub(lp.hidden_out);
  Interface visible = output_of(l.total).complement(l.hidden_out);
  Channel id_vis = make_identity(visible);

  EnvMorphResult out;
  if (is_classical(l.total) && is_classical(lp.total)) {
    // classical route: the affine map on stochastic G is solved by LP
    const auto& lt = std::get<ClassicalChannel>(l.total);
    const auto& lpt = std::get<ClassicalChannel>(lp.total);
    const int de = he.total_dim(), df = hf.total_dim();
    const int nm = df * de;
    auto assemble = [&](const RMatrix& g) {
      Channel gc = ClassicalChannel::from_table(hf.ports(), he.ports(), g);
      return std::get<ClassicalChannel>(serial(parallel(id_vis, gc), Channel(lt))).table();
    };
    const RMatrix target = lpt.table();
    const int nd = static_cast<int>(target.size());
    RMatrix base0 = assemble(RMatrix::Zero(df, de));
    LinearProgram p = LinearProgram::minimize(RVector::Zero(nm + 2 * nd));
    p.objective.tail(2 * nd).setOnes();
    p.eq_lhs = RMatrix::Zero(nd + de, nm + 2 * nd);
    p.eq_rhs = RVector::Zero(nd + de);
    for (int k = 0; k < nm; ++k) {
      RMatrix g = RMatrix::Zero(df, de);
      g(k / de, k % de) = 1.0;
      RMatrix img = assemble(g) - base0;
      for (int idx = 0; idx < nd; ++idx)
        p.eq_lhs(idx, k) = img(idx % img.rows(), idx / img.rows());
    }
    for (int idx = 0; idx < nd; ++idx) {
      p.eq_lhs(idx, nm + 2 * idx) = 1.0;
      p.eq_lhs(idx, nm + 2 * idx + 1) = -1.0;
      p.eq_rhs(idx) = target(idx % target.rows(), idx / target.rows()) -
                      base0(idx % base0.rows(), idx / base0.rows());
    }
    for (int e = 0; e < de; ++e) {
      for (int f = 0; f < df; ++f) p.eq_lhs(nd + e, f * de + e) = 1.0;
      p.eq_rhs(nd + e) = 1.0;
    }
    auto r = lp_solve(p);
    if (r.status != LpStatus::optimal) {
      out.residual = std::numeric_limits<double>::infinity();
      return out;
    }
    RMatrix g(df, de);
    for (int f = 0; f < df; ++f)
      for (int e = 0; e < de; ++e) g(f, e) = std::max(0.0, r.x(f * de + e));
    for (int e = 0; e < de; ++e) g.col(e) /= g.col(e).sum();
    Channel gc = ClassicalChannel::from_table(hf.ports(), he.ports(), g);
    out.residual = (assemble(g) - target).norm();
    if (out.residual <= tol) out.morphism = gc;
    return out;
  }

  // quantum route: CPTP fit of J_G
  QuantumChannel ltq = to_quantum(l.total);
  CMatrix target = to_quantum(lp.total).choi();
  auto affine = [&](const CMatrix& jg) {
    QuantumChannel g = QuantumChannel::from_choi(hf.ports(), he.ports(), jg);
    return std::get<QuantumChannel>(serial(parallel(id_vis, Channel(g)), Channel(ltq))).choi();
  };
  auto fit = cp_fit(affine, target, he.total_dim(), hf.total_dim(), tol, opts);
  out.residual = fit.residual;
  if (fit.choi)
    out.morphism = QuantumChannel::from_choi(hf.ports(), he.ports(), *fit.choi);
  return out;
}

// Kraus operators of a channel, from the minimal Stinespring isometry.
inline std::vector<CMatrix> kraus_operators(const QuantumChannel& q) {
  IsometricDilation sd = stinespring_minimal(q);
  std::vector<CMatrix> ks;
  const int dv = q.dout(), di = q.din(), r = sd.env_dim;
  for (int k = 0; k < r; ++k) {
    CMatrix kk(dv, di);
    for (int m = 0; m < dv; ++m)
      for (int i = 0; i < di; ++i) kk(m, i) = sd.isometry(m * r + k, i);
    ks.push_back(kk);
  }
  return ks;
}

// Left inverse: R with R o c = identity within tol.  The quantum route uses
// the transpose (Petz) recovery map at the maximally mixed reference, which
// succeeds exactly when a recovery exists; cp_fit remains as a numerical
// fallback.
inline std::optional<Channel> find_left_inverse(const Channel& c, double tol = kSolverTol) {
  const Interface& in = input_of(c);
  const Interface& out = output_of(c);
  if (is_classical(c)) {
    const auto& cc = std::get<ClassicalChannel>(c);
    ClassicalChannel idc = ClassicalChannel::from_table(
        in.ports(), in.ports(), RMatrix::Identity(in.total_dim(), in.total_dim()));
    auto r = blackwell_morph(cc, idc, tol);
    if (!r.morphism) return std::nullopt;
    return r.morphism;
  }
  QuantumChannel q = to_quantum(c);
  const int di = q.din(), dv = q.dout();
  Channel identity_in = make_identity(in);

  // Petz candidate: R(w) = (1/d) sum_i K_i' M^-1/2 w M^-1/2 K_i + dump,
  // with M = Phi(I/d) and the dump completing trace preservation off supp(M).
  {
    auto ks = kraus_operators(q);
    CMatrix m = q.apply_to(cidentity(di) / di);
    auto eig = herm_eig(m);
    CMatrix minv_sqrt = CMatrix::Zero(dv, dv);
    CMatrix proj = CMatrix::Zero(dv, dv);
    for (int k = 0; k < static_cast<int>(eig.eigenvalues.size()); ++k)
      if (eig.eigenvalues(k) > 1e-12) {
        minv_sqrt += (eig.eigenvectors.col(k) * eig.eigenvectors.col(k).adjoint()) /
                     std::sqrt(eig.eigenvalues(k));
        proj += eig.eigenvectors.col(k) * eig.eigenvectors.col(k).adjoint();
      }
    CMatrix jr = CMatrix::Zero(di * dv, di * dv);
    auto add_kraus = [&](const CMatrix& l) {
      CMatrix vecl(di * dv, 1);
      for (int a = 0; a < di; ++a)
        for (int b = 0; b < dv; ++b) vecl(a * dv + b, 0) = l(a, b);
      jr += vecl * vecl.adjoint();
    };
    for (const CMatrix& kk : ks) add_kraus(kk.adjoint() * minv_sqrt / std::sqrt(double(di)));
    // dump term: (I - P) w (I - P) -> I/d, via Kraus |i><b_k|/sqrt(d)
    CMatrix comp = cidentity(dv) - proj;
    auto ceig = herm_eig(comp);
    for (int k = 0; k < static_cast<int>(ceig.eigenvalues.size()); ++k)
      if (ceig.eigenvalues(k) > 0.5)
        for (int i = 0; i < di; ++i) {
          CMatrix l = CMatrix::Zero(di, dv);
          l.row(i) = ceig.eigenvectors.col(k).adjoint() / std::sqrt(double(di));
          add_kraus(l);
        }
    QuantumChannel petz = QuantumChannel::from_choi(in.ports(), out.ports(), jr);
    if (validate(petz, 1e-7).pass &&
        channel_dist(serial(Channel(petz), Channel(q)), identity_in) <= tol)
      return Channel(petz);
  }

  CMatrix target = std::get<QuantumChannel>(identity_in).choi();
  auto affine = [&](const CMatrix& jr) {
    QuantumChannel r = QuantumChannel::from_choi(in.ports(), out.ports(), jr);
    return serial(r, q).choi();
  };
  auto fit = cp_fit(affine, target, out.total_dim(), in.total_dim(), tol);
  if (!fit.choi) return std::nullopt;
  return Channel(QuantumChannel::from_choi(in.ports(), out.ports(), *fit.choi));
}

// Is the channel completely forgetful (trash then a fixed state)?  The best
// factored approximation has Choi sigma (x) I with sigma = tr_in(J)/d_in.
inline DilationCheck completely_forgetful_check(const QuantumChannel& q, double tol = 1e-8) {
  std::vector<int> dims = q.output().dims();
  std::vector<int> keep;
  for (int i = 0; i < static_cast<int>(dims.size()); ++i) keep.push_back(i);
  for (const Port& p : q.input().ports()) dims.push_back(p.dim);
  CMatrix sigma = partial_trace(q.choi(), FactorShape(dims), keep) / q.din();
  DilationCheck r;
  r.residual = (q.choi() - kron(sigma, cidentity(q.din()))).norm();
  r.ok = r.residual <= tol;
  return r;
}

} // namespace dilatio

#pragma once

// Classical channels (column-stochastic tables) and quantum channels (Choi
// matrices, convention J = sum_ij Phi(|i><j|) (x) |i><j| on out (x) in), over
// named-port interfaces, with serial/parallel composition, marginals,
// non-signalling tests and the classical-to-quantum embedding.

#include <map>
#include <optional>
#include <variant>

#include "dilatio/interface.hpp"
#include "dilatio/tensor.hpp"

namespace dilatio {

inline constexpr double kAlgTol = 1e-9;   // algebraic identities
inline constexpr double kSolverTol = 1e-6; // solver-produced quantities

namespace detail {

inline CMatrix reindex(const CMatrix& m, const std::vector<int>& rmap,
                       const std::vector<int>& cmap) {
  CMatrix out(static_cast<Eigen::Index>(rmap.size()), static_cast<Eigen::Index>(cmap.size()));
  for (size_t i = 0; i < rmap.size(); ++i)
    for (size_t j = 0; j < cmap.size(); ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          m(rmap[i], cmap[j]);
  return out;
}

inline RMatrix reindex(const RMatrix& m, const std::vector<int>& rmap,
                       const std::vector<int>& cmap) {
  RMatrix out(static_cast<Eigen::Index>(rmap.size()), static_cast<Eigen::Index>(cmap.size()));
  for (size_t i = 0; i < rmap.size(); ++i)
    for (size_t j = 0; j < cmap.size(); ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          m(rmap[i], cmap[j]);
  return out;
}

inline std::vector<int> identity_map(int n) {
  std::vector<int> m(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) m[static_cast<size_t>(i)] = i;
  return m;
}

} // namespace detail

class ClassicalChannel {
 public:
  ClassicalChannel() : table_(RMatrix::Ones(1, 1)) {}

  // `table` laid out with rows indexed by out_layout, cols by in_layout
  // (mixed radix, first port most significant). Ports are canonicalised.
  static ClassicalChannel from_table(const std::vector<Port>& out_layout,
                                     const std::vector<Port>& in_layout,
                                     const RMatrix& table) {
    for (const Port& p : out_layout)
      if (p.kind != Kind::classical)
        throw std::invalid_argument("ClassicalChannel: all ports must be classical");
    for (const Port& p : in_layout)
      if (p.kind != Kind::classical)
        throw std::invalid_argument("ClassicalChannel: all ports must be classical");
    ClassicalChannel c;
    c.output_ = Interface(out_layout);
    c.input_ = Interface(in_layout);
    if (table.rows() != c.output_.total_dim() || table.cols() != c.input_.total_dim())
      throw std::invalid_argument("ClassicalChannel: table shape mismatch");
    auto rmap = out_layout.empty() ? detail::identity_map(1)
                                   : factor_permutation(port_dims(out_layout),
                                                        canonical_permutation(out_layout));
    auto cmap = in_layout.empty() ? detail::identity_map(1)
                                  : factor_permutation(port_dims(in_layout),
                                                       canonical_permutation(in_layout));
    c.table_ = detail::reindex(table, rmap, cmap);
    return c;
  }

  const Interface& input() const { return input_; }
  const Interface& output() const { return output_; }
  const RMatrix& table() const { return table_; }

 private:
  Interface input_, output_;
  RMatrix table_; // rows = outputs, cols = inputs; columns sum to 1
};

class QuantumChannel {
 public:
  QuantumChannel() : choi_(CMatrix::Ones(1, 1)) {}

  // Choi matrix laid out over (out_layout ++ in_layout) factors.
  static QuantumChannel from_choi(const std::vector<Port>& out_layout,
                                  const std::vector<Port>& in_layout,
                                  const CMatrix& choi) {
    QuantumChannel q;
    q.output_ = Interface(out_layout);
    q.input_ = Interface(in_layout);
    const int d = q.output_.total_dim() * q.input_.total_dim();
    if (choi.rows() != d || choi.cols() != d)
      throw std::invalid_argument("QuantumChannel: Choi shape mismatch");
    auto perm_out = canonical_permutation(out_layout);
    auto perm_in = canonical_permutation(in_layout);
    std::vector<int> dims = port_dims(out_layout);
    for (const Port& p : in_layout) dims.push_back(p.dim);
    std::vector<int> perm = perm_out;
    for (int k : perm_in) perm.push_back(static_cast<int>(out_layout.size()) + k);
    q.choi_ = dims.empty() ? choi : permute_factors(choi, FactorShape(dims), perm);
    return q;
  }

  const Interface& input() const { return input_; }
  const Interface& output() const { return output_; }
  const CMatrix& choi() const { return choi_; }

  int din() const { return input_.total_dim(); }
  int dout() const { return output_.total_dim(); }

  // Transfer matrix: S[(m,n),(i,j)] = J[(m,i),(n,j)]; serial composition is
  // matrix multiplication of transfer matrices.
  CMatrix superop() const {
    const int di = din(), dv = dout();
    CMatrix s(dv * dv, di * di);
    for (int m = 0; m < dv; ++m)
      for (int n = 0; n < dv; ++n)
        for (int i = 0; i < di; ++i)
          for (int j = 0; j < di; ++j)
            s(m * dv + n, i * di + j) = choi_(m * di + i, n * di + j);
    return s;
  }

  static QuantumChannel from_superop(const Interface& out, const Interface& in,
                                     const CMatrix& s) {
    const int di = in.total_dim(), dv = out.total_dim();
    CMatrix j(dv * di, dv * di);
    for (int m = 0; m < dv; ++m)
      for (int n = 0; n < dv; ++n)
        for (int i = 0; i < di; ++i)
          for (int jj = 0; jj < di; ++jj)
            j(m * di + i, n * di + jj) = s(m * dv + n, i * di + jj);
    QuantumChannel q;
    q.input_ = in;
    q.output_ = out;
    q.choi_ = j;
    return q;
  }

  // Phi(rho) = tr_in[J (I (x) rho^T)].
  CMatrix apply_to(const CMatrix& rho) const {
    const int di = din(), dv = dout();
    if (rho.rows() != di || rho.cols() != di)
      throw std::invalid_argument("QuantumChannel::apply_to: state dim mismatch");
    CMatrix out = CMatrix::Zero(dv, dv);
    for (int m = 0; m < dv; ++m)
      for (int n = 0; n < dv; ++n) {
        Complex s = 0.0;
        for (int i = 0; i < di; ++i)
          for (int j = 0; j < di; ++j) s += choi_(m * di + i, n * di + j) * rho(i, j);
        out(m, n) = s;
      }
    return out;
  }

 private:
  Interface input_, output_;
  CMatrix choi_; // on out (x) in, canonical port order
};

using Channel = std::variant<ClassicalChannel, QuantumChannel>;

inline const Interface& input_of(const Channel& c) {
  return std::visit([](const auto& ch) -> const Interface& { return ch.input(); }, c);
}
inline const Interface& output_of(const Channel& c) {
  return std::visit([](const auto& ch) -> const Interface& { return ch.output(); }, c);
}
inline bool is_classical(const Channel& c) {
  return std::holds_alternative<ClassicalChannel>(c);
}

// ---------------------------------------------------------------------------
// Validation

struct ChannelDiagnostics {
  double psd_margin = 0;       // min Choi eigenvalue (quantum)
  double tp_residual = 0;      // ||tr_out J - I||_F (quantum)
  double stoch_residual = 0;   // column-sum and negativity defect (classical)
  bool pass = false;
};

inline ChannelDiagnostics validate(const QuantumChannel& q, double tol = kAlgTol) {
  ChannelDiagnostics d;
  auto eig = herm_eig(q.choi());
  d.psd_margin = eig.eigenvalues.size() ? eig.eigenvalues(eig.eigenvalues.size() - 1) : 0.0;
  std::vector<int> dims = q.output().dims();
  std::vector<int> keep;
  int k = static_cast<int>(dims.size());
  for (const Port& p : q.input().ports()) dims.push_back(p.dim);
  for (int i = k; i < static_cast<int>(dims.size()); ++i) keep.push_back(i);
  CMatrix tr_out = partial_trace(q.choi(), FactorShape(dims), keep);
  d.tp_residual = (tr_out - cidentity(q.din())).norm();
  d.pass = d.psd_margin >= -tol && d.tp_residual <= tol;
  return d;
}

inline ChannelDiagnostics validate(const ClassicalChannel& c, double tol = kAlgTol) {
  ChannelDiagnostics d;
  double worst = 0;
  for (int x = 0; x < c.table().cols(); ++x)
    worst = std::max(worst, std::abs(c.table().col(x).sum() - 1.0));
  double neg = std::max(0.0, -c.table().minCoeff());
  d.stoch_residual = std::max(worst, neg);
  d.pass = d.stoch_residual <= std::max(tol, 1e-10);
  return d;
}

inline ChannelDiagnostics validate(const Channel& c, double tol = kAlgTol) {
  return std::visit([&](const auto& ch) { return validate(ch, tol); }, c);
}

// ---------------------------------------------------------------------------
// Embedding Gamma: CIT -> QIT.  Gamma(T)(|x><x|) = sum_y t_x(y)|y><y|.

inline QuantumChannel embed_classical(const ClassicalChannel& t) {
  const int di = t.input().total_dim(), dv = t.output().total_dim();
  CMatrix j = CMatrix::Zero(dv * di, dv * di);
  for (int y = 0; y < dv; ++y)
    for (int x = 0; x < di; ++x) j(y * di + x, y * di + x) = t.table()(y, x);
  return QuantumChannel::from_choi(t.output().ports(), t.input().ports(), j);
}

inline QuantumChannel to_quantum(const Channel& c) {
  if (is_classical(c)) return embed_classical(std::get<ClassicalChannel>(c));
  return std::get<QuantumChannel>(c);
}

// Frobenius distance between the matrix representations; classical pairs are
// compared as tables, anything else as Choi matrices after embedding.
inline double channel_dist(const Channel& a, const Channel& b) {
  if (!input_of(a).same_shape(input_of(b)) || !output_of(a).same_shape(output_of(b)))
    throw std::invalid_argument("channel_dist: interface mismatch");
  if (is_classical(a) && is_classical(b))
    return (std::get<ClassicalChannel>(a).table() - std::get<ClassicalChannel>(b).table()).norm();
  return (to_quantum(a).choi() - to_quantum(b).choi()).norm();
}

// ---------------------------------------------------------------------------
// Composition

inline ClassicalChannel serial(const ClassicalChannel& s, const ClassicalChannel& t) {
  if (!(s.input() == t.output()))
    throw std::invalid_argument("serial: interface mismatch");
  return ClassicalChannel::from_table(s.output().ports(), t.input().ports(),
                                      s.table() * t.table());
}

inline QuantumChannel serial(const QuantumChannel& s, const QuantumChannel& t) {
  if (!s.input().same_shape(t.output()))
    throw std::invalid_argument("serial: interface mismatch");
  return QuantumChannel::from_superop(s.output(), t.input(), s.superop() * t.superop());
}

inline Channel serial(const Channel& s, const Channel& t) {
  if (is_classical(s) && is_classical(t))
    return serial(std::get<ClassicalChannel>(s), std::get<ClassicalChannel>(t));
  return serial(to_quantum(s), to_quantum(t));
}

inline ClassicalChannel parallel(const ClassicalChannel& a, const ClassicalChannel& b) {
  std::vector<Port> out = a.output().ports(), in = a.input().ports();
  for (const Port& p : b.output().ports()) out.push_back(p);
  for (const Port& p : b.input().ports()) in.push_back(p);
  return ClassicalChannel::from_table(out, in, kron(a.table(), b.table()));
}

inline QuantumChannel parallel(const QuantumChannel& a, const QuantumChannel& b) {
  // kron(J_a, J_b) lives on [a.out, a.in, b.out, b.in]; regroup to
  // [a.out, b.out, a.in, b.in] before canonicalisation.
  CMatrix k = kron(a.choi(), b.choi());
  FactorShape shape({a.dout(), a.din(), b.dout(), b.din()});
  CMatrix r = permute_factors(k, shape, {0, 2, 1, 3});
  std::vector<Port> out = a.output().ports(), in = a.input().ports();
  for (const Port& p : b.output().ports()) out.push_back(p);
  for (const Port& p : b.input().ports()) in.push_back(p);
  return QuantumChannel::from_choi(out, in, r);
}

inline Channel parallel(const Channel& a, const Channel& b) {
  if (is_classical(a) && is_classical(b))
    return parallel(std::get<ClassicalChannel>(a), std::get<ClassicalChannel>(b));
  return parallel(to_quantum(a), to_quantum(b));
}

// ---------------------------------------------------------------------------
// Marginals (trash discarded output ports)

inline QuantumChannel marginal(const QuantumChannel& q, const std::set<std::string>& keep_out) {
  Interface kept = q.output().sub(keep_out);
  std::vector<int> dims = q.output().dims();
  const int n_out = static_cast<int>(dims.size());
  for (const Port& p : q.input().ports()) dims.push_back(p.dim);
  std::vector<int> keep;
  for (int i = 0; i < n_out; ++i)
    if (keep_out.count(q.output().port(i).name)) keep.push_back(i);
  for (int i = n_out; i < static_cast<int>(dims.size()); ++i) keep.push_back(i);
  CMatrix j = partial_trace(q.choi(), FactorShape(dims), keep);
  return QuantumChannel::from_choi(kept.ports(), q.input().ports(), j);
}

inline ClassicalChannel marginal(const ClassicalChannel& c, const std::set<std::string>& keep_out) {
  Interface kept = c.output().sub(keep_out);
  const auto dims = c.output().dims();
  const auto strides = strides_of(dims);
  RMatrix t = RMatrix::Zero(kept.total_dim(), c.input().total_dim());
  std::vector<int> kept_idx;
  for (int i = 0; i < c.output().size(); ++i)
    if (keep_out.count(c.output().port(i).name)) kept_idx.push_back(i);
  const auto kept_strides = strides_of(kept.dims());
  for (int y = 0; y < c.output().total_dim(); ++y) {
    int ky = 0;
    for (size_t k = 0; k < kept_idx.size(); ++k) {
      int digit = (y / strides[static_cast<size_t>(kept_idx[k])]) % dims[static_cast<size_t>(kept_idx[k])];
      ky += digit * kept_strides[k];
    }
    t.row(ky) += c.table().row(y);
  }
  return ClassicalChannel::from_table(kept.ports(), c.input().ports(), t);
}

inline Channel marginal(const Channel& c, const std::set<std::string>& keep_out) {
  return std::visit([&](const auto& ch) -> Channel { return marginal(ch, keep_out); }, c);
}

// ---------------------------------------------------------------------------
// Port renaming (pure relabeling; matrix is re-canonicalised)

template <typename C>
inline std::vector<Port> renamed_ports(const C& iface,
                                       const std::map<std::string, std::string>& names) {
  std::vector<Port> ps = iface.ports();
  for (Port& p : ps) {
    auto it = names.find(p.name);
    if (it != names.end()) p.name = it->second;
  }
  return ps;
}

inline Channel rename_ports(const Channel& c, const std::map<std::string, std::string>& in_names,
                            const std::map<std::string, std::string>& out_names) {
  if (is_classical(c)) {
    const auto& cc = std::get<ClassicalChannel>(c);
    return ClassicalChannel::from_table(renamed_ports(cc.output(), out_names),
                                        renamed_ports(cc.input(), in_names), cc.table());
  }
  const auto& q = std::get<QuantumChannel>(c);
  return QuantumChannel::from_choi(renamed_ports(q.output(), out_names),
                                   renamed_ports(q.input(), in_names), q.choi());
}

inline Channel rename_ports(const Channel& c, const std::map<std::string, std::string>& names) {
  return rename_ports(c, names, names);
}

// ---------------------------------------------------------------------------
// Primitives

// The QIT identity, regardless of port flags.  Distinct from the embedded
// CIT identity on classical ports (which is the decoherence channel).
inline QuantumChannel make_quantum_identity(const Interface& io) {
  const int d = io.total_dim();
  CMatrix j = CMatrix::Zero(d * d, d * d);
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < d; ++k) j(i * d + i, k * d + k) = 1.0;
  return QuantumChannel::from_choi(io.ports(), io.ports(), j);
}

inline Channel make_identity(const Interface& io) {
  if (io.all_classical())
    return ClassicalChannel::from_table(io.ports(), io.ports(),
                                        RMatrix::Identity(io.total_dim(), io.total_dim()));
  return make_quantum_identity(io);
}

inline Channel make_trash(const Interface& in) {
  if (in.all_classical())
    return ClassicalChannel::from_table({}, in.ports(), RMatrix::Ones(1, in.total_dim()));
  return QuantumChannel::from_choi({}, in.ports(), cidentity(in.total_dim()));
}

inline Channel make_quantum_state(const CMatrix& rho, const Interface& out) {
  if (rho.rows() != out.total_dim())
    throw std::invalid_argument("make_quantum_state: dim mismatch");
  return QuantumChannel::from_choi(out.ports(), {}, rho);
}

inline Channel make_classical_state(const RVector& p, const Interface& out) {
  if (p.size() != out.total_dim())
    throw std::invalid_argument("make_classical_state: dim mismatch");
  return ClassicalChannel::from_table(out.ports(), {}, p);
}

// Decoherence on the total computational product basis of `io`.
inline QuantumChannel make_decoherence(const Interface& io) {
  const int d = io.total_dim();
  CMatrix j = CMatrix::Zero(d * d, d * d);
  for (int i = 0; i < d; ++i) j(i * d + i, i * d + i) = 1.0;
  return QuantumChannel::from_choi(io.ports(), io.ports(), j);
}

// Constant uniform output, forgetting the input.
inline Channel make_uniform(const Interface& in, const Interface& out) {
  if (out.all_classical() && in.all_classical())
    return ClassicalChannel::from_table(
        out.ports(), in.ports(),
        RMatrix::Ones(out.total_dim(), in.total_dim()) / out.total_dim());
  Channel tr = make_trash(in);
  Channel st = make_quantum_state(cidentity(out.total_dim()) / out.total_dim(), out);
  return serial(st, tr);
}

// Exchanges the contents of the two ports of `io`; output interface carries
// the dims swapped when they differ.
inline Channel make_swap(const Interface& io) {
  if (io.size() != 2) throw std::invalid_argument("make_swap: need exactly two ports");
  Port p = io.port(0), q = io.port(1);
  if (p.kind != q.kind) throw std::invalid_argument("make_swap: kinds differ");
  Port po = p, qo = q;
  std::swap(po.dim, qo.dim);
  const int d = io.total_dim();
  RMatrix perm = RMatrix::Zero(d, d);
  for (int a = 0; a < p.dim; ++a)
    for (int b = 0; b < q.dim; ++b) perm(b * p.dim + a, a * q.dim + b) = 1.0;
  if (io.all_classical())
    return ClassicalChannel::from_table({po, qo}, {p, q}, perm);
  CMatrix u = perm.cast<Complex>();
  CMatrix vecu(d * d, 1);
  for (int m = 0; m < d; ++m)
    for (int i = 0; i < d; ++i) vecu(m * d + i, 0) = u(m, i);
  return QuantumChannel::from_choi({po, qo}, {p, q}, vecu * vecu.adjoint());
}

// Measurement channel of a POVM: Lambda(A) = sum_y tr(E_y A) |y><y|, with a
// classical-flagged outcome port.
inline QuantumChannel measurement_from_povm(const std::vector<CMatrix>& effects,
                                            const Interface& in,
                                            const std::string& out_name = "y") {
  const int d = in.total_dim();
  const int ny = static_cast<int>(effects.size());
  if (ny == 0) throw std::invalid_argument("measurement_from_povm: empty POVM");
  CMatrix sum = CMatrix::Zero(d, d);
  for (const CMatrix& e : effects) {
    if (e.rows() != d || e.cols() != d)
      throw std::invalid_argument("measurement_from_povm: effect dim mismatch");
    auto eig = herm_eig(e);
    if (eig.eigenvalues(eig.eigenvalues.size() - 1) < -1e-9)
      throw std::invalid_argument("measurement_from_povm: effect not PSD");
    sum += e;
  }
  if ((sum - cidentity(d)).norm() > 1e-9)
    throw std::invalid_argument("measurement_from_povm: effects do not sum to identity");
  CMatrix j = CMatrix::Zero(ny * d, ny * d);
  for (int y = 0; y < ny; ++y)
    j.block(y * d, y * d, d, d) = effects[static_cast<size_t>(y)].transpose();
  return QuantumChannel::from_choi({Port{out_name, ny, Kind::classical}}, in.ports(), j);
}

// Unitary/isometry conjugation A -> S A S', with the output factors laid out
// as out_layout (in the row order of S).
inline QuantumChannel isometry_channel(const CMatrix& s, const std::vector<Port>& out_layout,
                                       const std::vector<Port>& in_layout) {
  Interface in(in_layout), out(out_layout);
  if (s.cols() != in.total_dim() || s.rows() != out.total_dim())
    throw std::invalid_argument("isometry_channel: shape mismatch");
  if ((s.adjoint() * s - cidentity(static_cast<int>(s.cols()))).norm() > 1e-8)
    throw std::invalid_argument("isometry_channel: not an isometry");
  const int dv = static_cast<int>(s.rows()), di = static_cast<int>(s.cols());
  CMatrix vecs(dv * di, 1);
  for (int m = 0; m < dv; ++m)
    for (int i = 0; i < di; ++i) vecs(m * di + i, 0) = s(m, i);
  return QuantumChannel::from_choi(out_layout, in_layout, vecs * vecs.adjoint());
}

// Applies a channel to a state (a channel with empty input interface).
inline Channel apply(const Channel& c, const Channel& state) {
  if (!input_of(state).empty()) throw std::invalid_argument("apply: second argument not a state");
  return serial(c, state);
}

// ---------------------------------------------------------------------------
// Non-signalling

struct NonsignallingResult {
  bool nonsignalling = false;
  double residual = 0;
  std::optional<Channel> factored; // channel from inputs outside `from` to `to`
};

inline NonsignallingResult is_nonsignalling(const Channel& c,
                                            const std::set<std::string>& from_inputs,
                                            const std::set<std::string>& to_outputs,
                                            double tol = 1e-8) {
  const Interface& in = input_of(c);
  for (const auto& n : from_inputs)
    if (!in.has(n)) throw std::invalid_argument("is_nonsignalling: unknown input port " + n);
  Channel m = marginal(c, to_outputs);
  NonsignallingResult res;

  if (from_inputs.empty() || to_outputs.empty()) {
    res.nonsignalling = true;
    res.residual = 0;
    res.factored = is_classical(m)
        ? Channel(std::get<ClassicalChannel>(m))
        : m; // with empty `from`, the marginal itself factors
    return res;
  }

  Interface rest = in.complement(from_inputs);
  if (is_classical(m)) {
    const auto& cm = std::get<ClassicalChannel>(m);
    const auto dims = in.dims();
    std::vector<int> perm; // rest factors first, then the `from` factors
    for (int i = 0; i < in.size(); ++i)
      if (!from_inputs.count(in.port(i).name)) perm.push_back(i);
    const int n_rest = static_cast<int>(perm.size());
    for (int i = 0; i < in.size(); ++i)
      if (from_inputs.count(in.port(i).name)) perm.push_back(i);
    auto cmap = factor_permutation(dims, perm);
    const int d_rest = rest.total_dim();
    const int d_from = in.total_dim() / d_rest;
    (void)n_rest;
    RMatrix avg = RMatrix::Zero(cm.table().rows(), d_rest);
    for (int r = 0; r < d_rest; ++r) {
      for (int f = 0; f < d_from; ++f) avg.col(r) += cm.table().col(cmap[static_cast<size_t>(r * d_from + f)]);
      avg.col(r) /= d_from;
    }
    double worst = 0;
    for (int r = 0; r < d_rest; ++r)
      for (int f = 0; f < d_from; ++f)
        worst = std::max(worst,
                         (cm.table().col(cmap[static_cast<size_t>(r * d_from + f)]) - avg.col(r))
                             .cwiseAbs()
                             .maxCoeff());
    res.residual = worst;
    res.nonsignalling = worst <= tol;
    if (res.nonsignalling)
      res.factored = ClassicalChannel::from_table(cm.output().ports(), rest.ports(), avg);
    return res;
  }

  const auto& qm = std::get<QuantumChannel>(m);
  std::vector<int> dims = qm.output().dims();
  const int n_out = static_cast<int>(dims.size());
  for (const Port& p : in.ports()) dims.push_back(p.dim);
  std::vector<int> perm;
  for (int i = 0; i < n_out; ++i) perm.push_back(i);
  for (int i = 0; i < in.size(); ++i)
    if (!from_inputs.count(in.port(i).name)) perm.push_back(n_out + i);
  for (int i = 0; i < in.size(); ++i)
    if (from_inputs.count(in.port(i).name)) perm.push_back(n_out + i);
  CMatrix jp = permute_factors(qm.choi(), FactorShape(dims), perm);
  const int d_from = in.sub(from_inputs).total_dim();
  const int d_keep = qm.dout() * rest.total_dim();
  std::vector<int> keep;
  std::vector<int> pdims;
  for (int i : perm) pdims.push_back(dims[static_cast<size_t>(i)]);
  for (int i = 0; i < static_cast<int>(pdims.size()) - static_cast<int>(from_inputs.size()); ++i)
    keep.push_back(i);
  CMatrix factored = partial_trace(jp, FactorShape(pdims), keep) / d_from;
  res.residual = (jp - kron(factored, cidentity(d_from))).norm();
  res.nonsignalling = res.residual <= tol;
  (void)d_keep;
  if (res.nonsignalling) {
    std::vector<Port> out_layout = qm.output().ports(), in_layout;
    for (const Port& p : in.ports())
      if (!from_inputs.count(p.name)) in_layout.push_back(p);
    res.factored = QuantumChannel::from_choi(out_layout, in_layout, factored);
  }
  return res;
}

} // namespace dilatio

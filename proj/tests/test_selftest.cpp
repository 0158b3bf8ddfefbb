#include <catch2/catch_amalgamated.hpp>

#include "dilatio/rng.hpp"
#include "dilatio/selftest.hpp"

using namespace dilatio;

namespace {

// applies local unitaries to the state and all projections of a strategy
Strategy rotate_strategy(const Strategy& s, const CMatrix& ua, const CMatrix& ub) {
  Strategy out = s;
  CMatrix u = kron(ua, ub);
  out.state = u * s.state * u.adjoint();
  for (auto& family : out.pvms_a)
    for (auto& p : family) p = ua * p * ua.adjoint();
  for (auto& family : out.pvms_b)
    for (auto& p : family) p = ub * p * ub.adjoint();
  return out;
}

} // namespace

TEST_CASE("canonical CHSH strategy") {
  Strategy s = canonical_chsh();
  REQUIRE(validate_strategy(s).pass);

  Behaviour b = behaviour_of(s);
  REQUIRE(b.valid(1e-10, 1e-10));
  // P^x(y) = 1/4 + ya yb (-1)^{xa xb} / (4 sqrt2)
  for (int xa = 0; xa < 2; ++xa)
    for (int xb = 0; xb < 2; ++xb)
      for (int ya = 0; ya < 2; ++ya)
        for (int yb = 0; yb < 2; ++yb) {
          double sa = ya ? -1 : 1, sb = yb ? -1 : 1;
          double expect = 0.25 + sa * sb * ((xa & xb) ? -1.0 : 1.0) / (4.0 * std::sqrt(2.0));
          REQUIRE(std::abs(b.p(ya * 2 + yb, xa * 2 + xb) - expect) < 1e-10);
        }
  REQUIRE(std::abs(classical_chsh(b) - 2.0 * std::sqrt(2.0)) < 1e-9);

  // local marginal outcomes are uniform
  for (int xa = 0; xa < 2; ++xa)
    for (int ya = 0; ya < 2; ++ya) {
      double m = b.p(ya * 2 + 0, xa * 2 + 0) + b.p(ya * 2 + 1, xa * 2 + 0);
      REQUIRE(std::abs(m - 0.5) < 1e-10);
    }
}

TEST_CASE("behaviour_of basics") {
  // trivial strategy: one-dimensional state, trivial measurement
  Strategy triv;
  triv.da = triv.db = 1;
  triv.state = CMatrix::Ones(1, 1);
  triv.pvms_a = {{cidentity(1)}};
  triv.pvms_b = {{cidentity(1)}};
  Behaviour bt = behaviour_of(triv);
  REQUIRE(bt.p.rows() == 1);
  REQUIRE(std::abs(bt.p(0, 0) - 1.0) < 1e-14);

  // product state + local PVMs give a product behaviour
  Rng rng(601);
  Strategy prod;
  prod.da = prod.db = 2;
  CMatrix ra = rng.density_matrix(2), rb = rng.density_matrix(2);
  prod.state = kron(ra, rb);
  prod.pvms_a = {rng.random_pvm(2)};
  prod.pvms_b = {rng.random_pvm(2)};
  Behaviour bp = behaviour_of(prod);
  for (int ya = 0; ya < 2; ++ya)
    for (int yb = 0; yb < 2; ++yb) {
      double pa = (prod.pvms_a[0][static_cast<size_t>(ya)] * ra).trace().real();
      double pb = (prod.pvms_b[0][static_cast<size_t>(yb)] * rb).trace().real();
      REQUIRE(std::abs(bp.p(ya * 2 + yb, 0) - pa * pb) < 1e-12);
    }
}

TEST_CASE("behaviours of valid strategies are non-signalling") {
  Rng rng(607);
  for (int trial = 0; trial < 30; ++trial) {
    Strategy s;
    s.da = rng.uniform_int(2, 3);
    s.db = rng.uniform_int(2, 3);
    s.state = rng.density_matrix(s.da * s.db);
    s.pvms_a = {rng.random_pvm(s.da), rng.random_pvm(s.da)};
    s.pvms_b = {rng.random_pvm(s.db), rng.random_pvm(s.db)};
    REQUIRE(validate_strategy(s).pass);
    Behaviour b = behaviour_of(s);
    REQUIRE(b.ns_residual() < 1e-10);
  }
}

TEST_CASE("naimarkize") {
  Rng rng(613);
  // an already projective strategy is unchanged
  Strategy s = canonical_chsh();
  Strategy n = naimarkize(s);
  REQUIRE(n.da == s.da);
  REQUIRE((behaviour_of(n).p - behaviour_of(s).p).norm() < 1e-12);

  // {I/2, I/2}: outcome probabilities stay half/half for every state
  Strategy coin;
  coin.da = 2;
  coin.db = 1;
  coin.state = kron(rng.density_matrix(2), CMatrix::Ones(1, 1));
  coin.pvms_a = {{cidentity(2) / 2.0, cidentity(2) / 2.0}};
  coin.pvms_b = {{cidentity(1)}};
  Strategy nc = naimarkize(coin);
  REQUIRE(validate_strategy(nc).pass); // now projective
  Behaviour bc = behaviour_of(nc);
  REQUIRE(std::abs(bc.p(0, 0) - 0.5) < 1e-10);
  REQUIRE(std::abs(bc.p(1 * 1 + 0, 0) - 0.5) < 1e-10);

  // random POVMs on both sites: behaviour preserved, outputs projective
  for (int trial = 0; trial < 20; ++trial) {
    Strategy r;
    r.da = 2;
    r.db = 2;
    r.state = rng.density_matrix(4);
    r.pvms_a = {rng.random_povm(2, 3), rng.random_povm(2, 3)};
    r.pvms_b = {rng.random_povm(2, 2), rng.random_povm(2, 2)};
    Strategy nr = naimarkize(r);
    REQUIRE(validate_strategy(nr).pass);
    REQUIRE((behaviour_of(nr).p - behaviour_of(r).p).norm() < 1e-9);
  }
}

TEST_CASE("verify_reduction: identity reduction") {
  Strategy canon = canonical_chsh();
  int pdim = 1;
  Reduction r;
  r.purification = purification_vector(canon.state, pdim);
  r.pdim = pdim;
  r.wa = cidentity(2);
  r.wb = cidentity(2);
  r.res_a = r.res_b = 1;
  r.residual_state = CVector::Ones(1);
  auto chk = verify_reduction(canon, canon, r, 1e-9);
  REQUIRE(chk.ok);
}

TEST_CASE("verify_reduction: auxiliary pure state construction") {
  Rng rng(617);
  Strategy canon = canonical_chsh();
  // s = canon (x) (shared auxiliary pure state untouched by measurements)
  CVector aux_a = rng.random_ket(2), aux_b = rng.random_ket(2);
  Strategy s;
  s.da = s.db = 4; // H~ (x) res with res in the second factor
  CMatrix aux = kron(CMatrix(aux_a * aux_a.adjoint()), CMatrix(aux_b * aux_b.adjoint()));
  CMatrix big = kron(canon.state, aux); // (A~ B~ resA resB)
  s.state = permute_factors(big, FactorShape({2, 2, 2, 2}), {0, 2, 1, 3});
  auto lift_a = [&](const CMatrix& p) { return kron(p, cidentity(2)); };
  s.pvms_a.clear();
  s.pvms_b.clear();
  for (const auto& fam : canon.pvms_a) {
    std::vector<CMatrix> f2;
    for (const auto& p : fam) f2.push_back(lift_a(p));
    s.pvms_a.push_back(f2);
  }
  for (const auto& fam : canon.pvms_b) {
    std::vector<CMatrix> f2;
    for (const auto& p : fam) f2.push_back(lift_a(p));
    s.pvms_b.push_back(f2);
  }
  REQUIRE(validate_strategy(s).pass);
  REQUIRE((behaviour_of(s).p - behaviour_of(canon).p).norm() < 1e-10);

  Reduction r;
  r.wa = cidentity(4); // H_A = H~_A (x) res_A already
  r.wb = cidentity(4);
  r.res_a = r.res_b = 2;
  int pdim = 1;
  r.purification = purification_vector(s.state, pdim);
  r.pdim = pdim;
  r.residual_state = kron(CMatrix(aux_a), CMatrix(aux_b)).col(0);
  auto chk = verify_reduction(s, canon, r, 1e-8);
  REQUIRE(chk.ok);

  // perturbing one projection breaks the identity at tolerance 1e-6;
  // the generator mixes the H~ factor so the rotation genuinely moves the
  // diagonal Z-basis projections
  Strategy sp = s;
  CMatrix rot = CMatrix::Zero(4, 4);
  {
    double eps = 1e-2;
    CMatrix h = CMatrix::Zero(4, 4); // Hermitian generator
    h(0, 2) = eps;
    h(2, 0) = eps;
    CMatrix u = cidentity(4) + Complex(0, 1) * h - 0.5 * h * h; // ~exp(ih)
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(u, Eigen::ComputeFullU | Eigen::ComputeFullV);
    rot = svd.matrixU() * svd.matrixV().adjoint();
  }
  for (auto& p : sp.pvms_a[0]) p = rot * p * rot.adjoint();
  auto chk2 = verify_reduction(sp, canon, r, 1e-6);
  REQUIRE_FALSE(chk2.ok);
  REQUIRE(chk2.residual > 1e-4);
}

TEST_CASE("strategy dilation reproduces the behaviour channel") {
  Strategy s = canonical_chsh();
  Channel bc = strategy_behaviour_channel(s);
  Behaviour b = behaviour_of(s);
  Channel direct = b.as_channel();
  REQUIRE(channel_dist(marginal(bc, {"yA", "yB"}), to_quantum(std::get<ClassicalChannel>(direct))) < 1e-9);
}

TEST_CASE("local_derivation: identity witnesses verify") {
  Strategy canon = canonical_chsh();
  Interface ga_io(std::vector<Port>{Port{"cA", 2, Kind::classical}, Port{"hA", 2, Kind::quantum}});
  Interface gb_io(std::vector<Port>{Port{"cB", 2, Kind::classical}, Port{"hB", 2, Kind::quantum}});
  auto res = local_derivation(canon, canon,
                              std::make_pair(make_identity(ga_io), make_identity(gb_io)), 1e-7);
  REQUIRE(res.status == DerivationStatus::verified);
}

TEST_CASE("local_derivation: locally rotated strategies round-trip") {
  Rng rng(619);
  Strategy canon = canonical_chsh();
  CMatrix ua = rng.haar_unitary(2), ub = rng.haar_unitary(2);
  Strategy s = rotate_strategy(canon, ua, ub);
  REQUIRE((behaviour_of(s).p - behaviour_of(canon).p).norm() < 1e-10);

  // Gamma_i = conjugation undoing U_i on the hidden H factor
  auto undo = [](const CMatrix& u, const std::string& site, int nx) {
    CMatrix w = kron(u.adjoint(), cidentity(nx));
    std::vector<Port> io{Port{"h" + site, 2, Kind::quantum}, Port{"c" + site, nx, Kind::classical}};
    return Channel(isometry_channel(w, io, io));
  };
  auto res = local_derivation(s, canon, std::make_pair(undo(ua, "A", 2), undo(ub, "B", 2)), 1e-7);
  REQUIRE(res.status == DerivationStatus::verified);

  // a strategy with a different behaviour is refuted outright
  Strategy wrong = canon;
  std::swap(wrong.pvms_b[0], wrong.pvms_b[1]);
  auto res2 = local_derivation(wrong, canon, std::nullopt, 1e-7, 2);
  REQUIRE(res2.status == DerivationStatus::refuted);
}

TEST_CASE("security and extremality") {
  Strategy canon = canonical_chsh();
  Behaviour b = behaviour_of(canon);
  // the split b = 1/2 b + 1/2 b is trivial
  auto triv = security_extremality(b, RVector::Constant(2, 0.5), {b, b});
  REQUIRE(triv.decomposition_trivial);

  // bit-refresh-as-behaviour split {f0, f1} returns a witness
  Behaviour br;
  br.sc = BellScenario{2, 1, 2, 1};
  br.p = RMatrix::Constant(2, 2, 0.5);
  Behaviour f0 = br, f1 = br;
  f0.p << 1, 1, 0, 0;
  f1.p << 0, 0, 1, 1;
  auto split = security_extremality(br, RVector::Constant(2, 0.5), {f0, f1});
  REQUIRE_FALSE(split.decomposition_trivial);
  REQUIRE(split.witness_index.has_value());
  REQUIRE_FALSE(split.ns_vertex); // the bit refresh is not extremal
  REQUIRE(split.perturbation.has_value());

  // the PR box is a vertex of the non-signalling polytope
  Behaviour pr;
  pr.p = RMatrix::Zero(4, 4);
  for (int xa = 0; xa < 2; ++xa)
    for (int xb = 0; xb < 2; ++xb)
      for (int ya = 0; ya < 2; ++ya)
        for (int yb = 0; yb < 2; ++yb)
          if ((ya ^ yb) == (xa & xb)) pr.p(ya * 2 + yb, xa * 2 + xb) = 0.5;
  auto vx = security_extremality(pr, RVector::Ones(1), {pr});
  REQUIRE(vx.ns_vertex);
}

TEST_CASE("purely non-signalling: Bell-built dilation passes the direct test") {
  Strategy s = canonical_chsh();
  Channel total = strategy_dilation(s); // e0 is 1-dimensional for a pure state
  Channel no_e0 = marginal(total, {"yA", "yB", "hA", "cA", "hB", "cB"});
  auto r = purely_nonsignalling_direct(no_e0, {"hA", "cA"}, {"hB", "cB"}, "xA", "xB", "yA", "yB");
  REQUIRE(r.found);
  REQUIRE(r.residual < 1e-9);
}

TEST_CASE("purely non-signalling: product channel passes with the trivial split") {
  Rng rng(631);
  CMatrix ua = rng.haar_unitary(2), ub = rng.haar_unitary(2);
  std::vector<Port> pa_in{Port{"xA", 2, Kind::quantum}};
  std::vector<Port> pb_in{Port{"xB", 2, Kind::quantum}};
  Channel ca = isometry_channel(ua, {Port{"yA", 2, Kind::quantum}}, pa_in);
  Channel cb = isometry_channel(ub, {Port{"yB", 2, Kind::quantum}}, pb_in);
  QuantumChannel prod = std::get<QuantumChannel>(parallel(ca, cb));
  auto r = purely_nonsignalling_sweep(prod, 4);
  REQUIRE(r.found); // unitary product: env dim 1, split (1,1)
}

TEST_CASE("purely non-signalling: embedded PR box finds no split") {
  RMatrix pr = RMatrix::Zero(4, 4);
  for (int xa = 0; xa < 2; ++xa)
    for (int xb = 0; xb < 2; ++xb)
      for (int ya = 0; ya < 2; ++ya)
        for (int yb = 0; yb < 2; ++yb)
          if ((ya ^ yb) == (xa & xb)) pr(ya * 2 + yb, xa * 2 + xb) = 0.5;
  ClassicalChannel prc = ClassicalChannel::from_table(
      {Port{"ya", 2, Kind::classical}, Port{"yb", 2, Kind::classical}},
      {Port{"xa", 2, Kind::classical}, Port{"xb", 2, Kind::classical}}, pr);
  QuantumChannel q = embed_classical(prc);
  auto r = purely_nonsignalling_sweep(q, 4);
  REQUIRE_FALSE(r.found); // necessary-condition sweep: no split within the cap
  REQUIRE(r.residual > 1e-3);
}

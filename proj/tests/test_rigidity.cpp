#include <catch2/catch_amalgamated.hpp>

#include "dilatio/derivation.hpp"
#include "dilatio/rigidity.hpp"
#include "dilatio/rng.hpp"

using namespace dilatio;

namespace {

Port csym(const std::string& n, int d = 2) { return Port{n, d, Kind::classical}; }

ClassicalChannel table_channel(const RMatrix& t, int din, int dout) {
  return ClassicalChannel::from_table({csym("y", dout)}, {csym("x", din)}, t);
}

ClassicalChannel bit_refresh() { return table_channel(RMatrix::Constant(2, 2, 0.5), 2, 2); }

ClassicalChannel pr_box_channel() {
  RMatrix pr = RMatrix::Zero(4, 4);
  for (int xa = 0; xa < 2; ++xa)
    for (int xb = 0; xb < 2; ++xb)
      for (int ya = 0; ya < 2; ++ya)
        for (int yb = 0; yb < 2; ++yb)
          if ((ya ^ yb) == (xa & xb)) pr(ya * 2 + yb, xa * 2 + xb) = 0.5;
  return ClassicalChannel::from_table({csym("ya"), csym("yb")}, {csym("xa"), csym("xb")}, pr);
}

} // namespace

TEST_CASE("det_decompose") {
  // a deterministic function is its own single atom
  RMatrix nt(2, 2);
  nt << 0, 1, 1, 0;
  auto d = det_decompose(table_channel(nt, 2, 2));
  REQUIRE(d.atoms.size() == 1);
  REQUIRE(std::abs(d.weights(0) - 1.0) < 1e-12);
  REQUIRE(d.atoms[0].values == std::vector<int>({1, 0}));

  // bit refresh: one of the two half/half decompositions
  auto dbr = det_decompose(bit_refresh());
  REQUIRE(dbr.atoms.size() == 2);
  REQUIRE(std::abs(dbr.weights.sum() - 1.0) < 1e-10);
  REQUIRE((dbr.reconstruct(2) - bit_refresh().table()).norm() < 1e-9);

  // a state (|X| = 1) decomposes into point masses with the given weights
  Rng rng(501);
  RVector p = rng.probability_vector(6);
  ClassicalChannel die = table_channel(p, 1, 6);
  auto dd = det_decompose(die);
  REQUIRE((dd.reconstruct(6) - die.table()).norm() < 1e-10);
  for (size_t k = 0; k < dd.atoms.size(); ++k)
    REQUIRE(std::abs(dd.weights(static_cast<Eigen::Index>(k)) -
                     p(dd.atoms[k].values[0])) < 1e-10);

  // random tables always reconstruct
  for (int trial = 0; trial < 40; ++trial) {
    int nx = rng.uniform_int(1, 3), ny = rng.uniform_int(2, 4);
    ClassicalChannel t = table_channel(rng.stochastic_table(ny, nx), nx, ny);
    auto dr = det_decompose(t);
    REQUIRE((dr.reconstruct(ny) - t.table()).norm() < 1e-9);
    REQUIRE(std::abs(dr.weights.sum() - 1.0) < 1e-9);
  }
}

TEST_CASE("decomposition uniqueness") {
  RMatrix nt(2, 2);
  nt << 0, 1, 1, 0;
  REQUIRE(decomposition_unique(table_channel(nt, 2, 2)).unique);

  auto u = decomposition_unique(bit_refresh());
  REQUIRE_FALSE(u.unique);
  REQUIRE(u.alternative.has_value());
  // the two returned decompositions are the vertex pair {f0,f1} and {id,NOT}
  auto names = [](const DetDecomposition& d) {
    std::set<std::vector<int>> s;
    for (const auto& a : d.atoms) s.insert(a.values);
    return s;
  };
  std::set<std::vector<int>> constant{{0, 0}, {1, 1}};
  std::set<std::vector<int>> involutive{{0, 1}, {1, 0}};
  auto s1 = names(u.decomposition), s2 = names(*u.alternative);
  REQUIRE(((s1 == constant && s2 == involutive) || (s1 == involutive && s2 == constant)));

  Rng rng(503);
  RVector p = rng.probability_vector(4);
  REQUIRE(decomposition_unique(table_channel(p, 1, 4)).unique);
}

TEST_CASE("uniqueness verdict is stable under relabeling") {
  Rng rng(509);
  for (int trial = 0; trial < 10; ++trial) {
    RMatrix t = rng.stochastic_table(2, 2);
    ClassicalChannel c = table_channel(t, 2, 2);
    // relabel the input (swap columns)
    RMatrix t2 = t;
    t2.col(0).swap(t2.col(1));
    ClassicalChannel c2 = table_channel(t2, 2, 2);
    REQUIRE(decomposition_unique(c).unique == decomposition_unique(c2).unique);
  }
}

TEST_CASE("unipartite rigidity") {
  // bit refresh: not rigid, exactly two extreme decompositions
  auto v = unipartite_rigid(bit_refresh());
  REQUIRE_FALSE(v.rigid);
  REQUIRE(v.extreme.size() == 2);

  // NOT: rigid
  RMatrix nt(2, 2);
  nt << 0, 1, 1, 0;
  REQUIRE(unipartite_rigid(table_channel(nt, 2, 2)).rigid);

  // uniform state behind a button: rigid
  ClassicalChannel button = table_channel(RVector::Constant(2, 0.5), 1, 2);
  REQUIRE(unipartite_rigid(button).rigid);

  // maximal dilations built from the extreme decompositions verify
  for (const auto& d : v.extreme) {
    CausalDilation cd = maximal_dilation_of(bit_refresh(), d);
    REQUIRE(is_causal_dilation(cd, 1e-9).ok);
    REQUIRE(validate_causal(cd.cc).pass);
    // the label is acausal side-information
    auto ac = acausal_ports(cd.cc, {}, cd.hidden_out);
    REQUIRE(ac.count("label") == 1);
  }

  // rigid verdict agrees with brute-force pairwise equivalence of the
  // enumerated extreme decompositions (relabeling test)
  Rng rng(521);
  for (int trial = 0; trial < 10; ++trial) {
    RMatrix t = rng.stochastic_table(2, 2);
    ClassicalChannel c = table_channel(t, 2, 2);
    auto verdict = unipartite_rigid(c);
    // up-to-relabeling equivalence classes of proper extreme decompositions
    std::set<std::set<std::pair<std::vector<int>, long long>>> classes;
    for (const auto& d : verdict.extreme) {
      std::set<std::pair<std::vector<int>, long long>> cls;
      for (size_t k = 0; k < d.atoms.size(); ++k)
        cls.insert({d.atoms[k].values,
                    static_cast<long long>(std::round(d.weights(static_cast<Eigen::Index>(k)) * 1e9))});
      classes.insert(cls);
    }
    REQUIRE(verdict.rigid == (classes.size() <= 1));
  }
}

TEST_CASE("bipartite rigidity") {
  BellScenario sc;
  // T = 1/2 id (x) NOT + 1/2 NOT (x) id:
  // P(ya, yb | xa, xb) = 1/2 [ya=xa][yb=1-xb] + 1/2 [ya=1-xa][yb=xb]
  RMatrix tm = RMatrix::Zero(4, 4);
  for (int xa = 0; xa < 2; ++xa)
    for (int xb = 0; xb < 2; ++xb) {
      tm((xa)*2 + (1 - xb), xa * 2 + xb) += 0.5;       // id (x) NOT
      tm((1 - xa) * 2 + (xb), xa * 2 + xb) += 0.5;     // NOT (x) id
    }
  ClassicalChannel mix =
      ClassicalChannel::from_table({csym("ya"), csym("yb")}, {csym("xa"), csym("xb")}, tm);
  auto v = bipartite_rigid_sufficient(mix, sc);
  REQUIRE(v.feasible);
  REQUIRE(v.rigid_sufficient);

  // both marginals are the (non-rigid) bit refreshment
  Channel ma = marginal(Channel(mix), {"ya"});
  REQUIRE((std::get<ClassicalChannel>(marginal(ma, {"ya"})).table().col(0) -
           RVector::Constant(2, 0.5)).norm() < 1e-12);

  // PR box: product decomposition infeasible
  auto pr = bipartite_product_decompose(pr_box_channel(), sc);
  REQUIRE_FALSE(pr.feasible);

  // a product of two deterministic functions is trivially unique
  RMatrix det = RMatrix::Zero(4, 4);
  for (int xa = 0; xa < 2; ++xa)
    for (int xb = 0; xb < 2; ++xb) det(xa * 2 + (1 - xb), xa * 2 + xb) = 1.0;
  ClassicalChannel detc =
      ClassicalChannel::from_table({csym("ya"), csym("yb")}, {csym("xa"), csym("xb")}, det);
  auto vd = bipartite_rigid_sufficient(detc, sc);
  REQUIRE(vd.feasible);
  REQUIRE(vd.rigid_sufficient);
}

TEST_CASE("chsh values") {
  // deterministic all-(+1) behaviour scores 1+1+1-1 = 2
  Behaviour allplus;
  allplus.p = RMatrix::Zero(4, 4);
  for (int x = 0; x < 4; ++x) allplus.p(0, x) = 1.0;
  REQUIRE(std::abs(classical_chsh(allplus) - 2.0) < 1e-12);

  // PR box reaches 4, exactly in rational arithmetic
  Behaviour pr = Behaviour::from_channel(pr_box_channel());
  REQUIRE(std::abs(classical_chsh(pr) - 4.0) < 1e-12);
  std::vector<std::vector<Rational>> prq(4, std::vector<Rational>(4, Rational(0)));
  for (int xa = 0; xa < 2; ++xa)
    for (int xb = 0; xb < 2; ++xb)
      for (int ya = 0; ya < 2; ++ya)
        for (int yb = 0; yb < 2; ++yb)
          if ((ya ^ yb) == (xa & xb))
            prq[static_cast<size_t>(ya * 2 + yb)][static_cast<size_t>(xa * 2 + xb)] = Rational(1, 2);
  REQUIRE(classical_chsh_exact(prq) == Rational(4));

  // the quantum value 2 sqrt 2
  Behaviour q;
  q.p = RMatrix::Zero(4, 4);
  for (int xa = 0; xa < 2; ++xa)
    for (int xb = 0; xb < 2; ++xb)
      for (int ya = 0; ya < 2; ++ya)
        for (int yb = 0; yb < 2; ++yb) {
          double sa = ya ? -1 : 1, sb = yb ? -1 : 1;
          double corr = ((xa & xb) ? -1.0 : 1.0) / std::sqrt(2.0);
          q.p(ya * 2 + yb, xa * 2 + xb) = 0.25 + sa * sb * corr / 4.0;
        }
  REQUIRE(std::abs(classical_chsh(q) - 2.0 * std::sqrt(2.0)) < 1e-12);
  REQUIRE(q.valid());
}

TEST_CASE("product-decomposable behaviours respect the local bound") {
  Rng rng(523);
  BellScenario sc;
  auto atoms_a = rigdetail::enumerate_atoms(2, 2);
  for (int trial = 0; trial < 200; ++trial) {
    RVector w = rng.probability_vector(16);
    RMatrix p = RMatrix::Zero(4, 4);
    int k = 0;
    for (const auto& ga : atoms_a)
      for (const auto& gb : atoms_a) {
        for (int xa = 0; xa < 2; ++xa)
          for (int xb = 0; xb < 2; ++xb)
            p(ga.values[static_cast<size_t>(xa)] * 2 + gb.values[static_cast<size_t>(xb)],
              xa * 2 + xb) += w(k);
        ++k;
      }
    Behaviour b;
    b.p = p;
    REQUIRE(classical_chsh(b) <= 2.0 + 1e-9);
    REQUIRE(classical_chsh(b) >= -2.0 - 1e-9);
  }
}

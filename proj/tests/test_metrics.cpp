#include <catch2/catch_amalgamated.hpp>

#include "dilatio/metrics.hpp"
#include "dilatio/rng.hpp"

using namespace dilatio;

namespace {

Interface qdim(const std::string& name, int d) { return Interface::single(name, d, Kind::quantum); }
Interface cdim(const std::string& name, int d) { return Interface::single(name, d, Kind::classical); }

QuantumChannel random_cptp(Rng& rng, int din, int dout, int rank, const std::string& in = "x",
                           const std::string& out = "y") {
  rank = std::max(rank, (din + dout - 1) / dout);
  CMatrix s = rng.haar_isometry(dout * rank, din);
  std::vector<Port> layout{Port{out, dout, Kind::quantum}, Port{"~e", rank, Kind::quantum}};
  Channel conj = isometry_channel(s, layout, qdim(in, din).ports());
  return std::get<QuantumChannel>(marginal(conj, {out}));
}

ClassicalChannel random_classical(Rng& rng, int din, int dout) {
  return ClassicalChannel::from_table(cdim("y", dout).ports(), cdim("x", din).ports(),
                                      rng.stochastic_table(dout, din));
}

CMatrix sigma_z() {
  CMatrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

} // namespace

TEST_CASE("trace distance basics") {
  RVector d0(2), d1(2), u(2);
  d0 << 1, 0;
  d1 << 0, 1;
  u << 0.5, 0.5;
  auto as_state = [](const RVector& p) {
    return std::get<ClassicalChannel>(
        make_classical_state(p, Interface::single("x", 2, Kind::classical)));
  };
  REQUIRE(std::abs(trace_distance(as_state(d0), as_state(d1)) - 1.0) < 1e-14);
  REQUIRE(std::abs(trace_distance(as_state(d0), as_state(u)) - 0.5) < 1e-14);
  Rng rng(301);
  CMatrix rho = rng.density_matrix(3);
  REQUIRE(trace_distance(rho, rho) < 1e-14);
}

TEST_CASE("metric axioms on random triples") {
  Rng rng(307);
  for (int trial = 0; trial < 50; ++trial) {
    int d = rng.uniform_int(2, 4);
    CMatrix a = rng.density_matrix(d), b = rng.density_matrix(d), c = rng.density_matrix(d);
    REQUIRE(std::abs(trace_distance(a, b) - trace_distance(b, a)) < 1e-12);
    REQUIRE(trace_distance(a, c) <= trace_distance(a, b) + trace_distance(b, c) + 1e-7);
  }
}

TEST_CASE("diamond distance: identical and orthogonal-unitary pairs") {
  QuantumChannel id2 = std::get<QuantumChannel>(make_identity(qdim("q", 2)));
  auto r0 = diamond_distance(id2, id2);
  REQUIRE(r0.value < 1e-9);

  QuantumChannel zconj = isometry_channel(sigma_z(), qdim("q", 2).ports(), qdim("q", 2).ports());
  auto r1 = diamond_distance(id2, zconj);
  REQUIRE(std::abs(r1.value - 1.0) < 1e-6); // gamma = pi so F = 0
  REQUIRE(r1.seesaw_lower > 1.0 - 1e-6);
  REQUIRE(r1.certificate_margin > -1e-7);
  REQUIRE(std::abs(r1.certificate_objective - 2.0 * r1.value) < 1e-5);
  REQUIRE(r1.sdp_gap < 1e-6);
}

TEST_CASE("diamond distance reduces to classical d1 on embedded channels") {
  Rng rng(311);
  ClassicalChannel idc = std::get<ClassicalChannel>(make_identity(cdim("x", 2)));
  ClassicalChannel refresh = ClassicalChannel::from_table(
      cdim("x", 2).ports(), cdim("x", 2).ports(), RMatrix::Constant(2, 2, 0.5));
  auto r = diamond_distance(embed_classical(idc), embed_classical(refresh));
  REQUIRE(std::abs(r.value - 0.5) < 1e-6);

  for (int trial = 0; trial < 8; ++trial) {
    int din = rng.uniform_int(2, 3), dout = rng.uniform_int(2, 3);
    ClassicalChannel a = random_classical(rng, din, dout);
    ClassicalChannel b = random_classical(rng, din, dout);
    auto rr = diamond_distance(embed_classical(a), embed_classical(b));
    REQUIRE(std::abs(rr.value - trace_distance(a, b)) < 1e-6);
  }
}

TEST_CASE("diamond monotonicity and parallel invariance") {
  Rng rng(313);
  for (int trial = 0; trial < 4; ++trial) {
    QuantumChannel a = random_cptp(rng, 2, 2, 2);
    QuantumChannel b = random_cptp(rng, 2, 2, 2);
    QuantumChannel s = random_cptp(rng, 2, 2, 1, "y", "z");
    double dab = diamond_distance(a, b).value;
    double dsasb = diamond_distance(serial(s, a), serial(s, b)).value;
    REQUIRE(dsasb <= dab + 1e-6);

    QuantumChannel c = random_cptp(rng, 2, 2, 2, "u", "v");
    double dpar = diamond_distance(std::get<QuantumChannel>(parallel(Channel(a), Channel(c))),
                                   std::get<QuantumChannel>(parallel(Channel(b), Channel(c))))
                      .value;
    REQUIRE(std::abs(dpar - dab) < 1e-5);
  }
}

TEST_CASE("iso fidelities: basic identities") {
  Rng rng(317);
  CMatrix u = rng.haar_unitary(3);
  auto same = iso_fidelities(u, u);
  REQUIRE(std::abs(same.f - 1.0) < 1e-10);
  REQUIRE(std::abs(same.ff - 1.0) < 1e-10);
  REQUIRE(same.d_diamond < 1e-5);

  auto zz = iso_fidelities(cidentity(2), sigma_z());
  REQUIRE(std::abs(zz.f) < 1e-8); // arc pi
  REQUIRE(std::abs(zz.ff) < 1e-8);

  CMatrix s2 = CMatrix::Zero(2, 2);
  s2(0, 0) = 1;
  s2(1, 1) = std::polar(1.0, M_PI / 4);
  auto rot = iso_fidelities(cidentity(2), s2);
  REQUIRE(std::abs(rot.f - std::cos(M_PI / 8)) < 1e-8);
  auto arc = unitary_arc_fidelity(cidentity(2), s2);
  REQUIRE(std::abs(arc.gamma - M_PI / 4) < 1e-9);
  REQUIRE(std::abs(arc.f - rot.f) < 1e-8);
}

TEST_CASE("iso fidelities agree with the arc formula on random unitary pairs") {
  Rng rng(331);
  for (int trial = 0; trial < 60; ++trial) {
    int d = rng.uniform_int(2, 5);
    CMatrix u1 = rng.haar_unitary(d), u2 = rng.haar_unitary(d);
    auto sweep = iso_fidelities(u1, u2);
    auto arc = unitary_arc_fidelity(u1, u2);
    REQUIRE(std::abs(sweep.f - arc.f) < 1e-8);
    REQUIRE(std::abs(sweep.ff - arc.ff) < 1e-8);
    REQUIRE(std::abs(sweep.f - std::max(0.0, sweep.ff)) < 1e-10);
  }
}

TEST_CASE("sdp diamond matches the closed form on isometric pairs") {
  Rng rng(337);
  for (int trial = 0; trial < 6; ++trial) {
    int d = rng.uniform_int(2, 3);
    CMatrix u1 = rng.haar_unitary(d), u2 = rng.haar_unitary(d);
    QuantumChannel c1 = isometry_channel(u1, qdim("y", d).ports(), qdim("x", d).ports());
    QuantumChannel c2 = isometry_channel(u2, qdim("y", d).ports(), qdim("x", d).ports());
    auto fid = iso_fidelities(u1, u2);
    auto dd = diamond_distance(c1, c2);
    REQUIRE(std::abs(dd.value - fid.d_diamond) < 1e-6);
    REQUIRE(dd.seesaw_lower > dd.value - 1e-5); // achievable at unitary pairs
  }
}

TEST_CASE("state fidelity and purified distance") {
  Rng rng(347);
  CMatrix rho = rng.density_matrix(3);
  auto same = state_fidelity_purified(rho, rho);
  REQUIRE(std::abs(same.f - 1.0) < 1e-10);
  REQUIRE(same.p < 1e-5);

  CMatrix e0 = CMatrix::Zero(2, 2), plus = CMatrix::Constant(2, 2, 0.5);
  e0(0, 0) = 1;
  auto f0p = state_fidelity_purified(e0, plus);
  REQUIRE(std::abs(f0p.f - 1.0 / std::sqrt(2.0)) < 1e-10);
  REQUIRE(std::abs(f0p.p - 1.0 / std::sqrt(2.0)) < 1e-10);

  CMatrix e1 = CMatrix::Zero(2, 2);
  e1(1, 1) = 1;
  auto orth = state_fidelity_purified(e0, e1);
  REQUIRE(std::abs(orth.f) < 1e-12);
  REQUIRE(std::abs(orth.p - 1.0) < 1e-12);
}

TEST_CASE("pdiamond interval") {
  Rng rng(349);
  CMatrix u1 = rng.haar_unitary(2), u2 = rng.haar_unitary(2);
  QuantumChannel c1 = isometry_channel(u1, qdim("y", 2).ports(), qdim("x", 2).ports());
  QuantumChannel c2 = isometry_channel(u2, qdim("y", 2).ports(), qdim("x", 2).ports());
  auto iso = pdiamond_interval(c1, c2);
  REQUIRE(iso.upper - iso.lower <= 1e-8);
  REQUIRE(std::abs(iso.lower - iso_fidelities(u1, u2).d_diamond) < 1e-10);

  auto same = pdiamond_interval(c1, c1);
  REQUIRE(same.lower == 0.0);
  REQUIRE(same.upper == 0.0);

  for (int trial = 0; trial < 6; ++trial) {
    QuantumChannel a = random_cptp(rng, 2, 2, rng.uniform_int(1, 4));
    QuantumChannel b = random_cptp(rng, 2, 2, rng.uniform_int(1, 4));
    auto iv = pdiamond_interval(a, b);
    REQUIRE(iv.lower <= iv.upper + 1e-9);
    REQUIRE(iv.upper <= std::sqrt(2.0 * iv.lower) + 1e-6);
  }
}

TEST_CASE("bp relation") {
  auto r1 = bp_check(1.0);
  REQUIRE(r1.beta < 1e-12);
  REQUIRE(r1.p < 1e-12);

  auto r0 = bp_check(0.0);
  REQUIRE(std::abs(r0.beta - std::sqrt(2.0)) < 1e-12);
  REQUIRE(std::abs(r0.p - 1.0) < 1e-12);

  const double f = std::cos(M_PI / 8);
  auto rc = bp_check(f);
  REQUIRE(std::abs(rc.beta - std::sqrt(2.0 - 2.0 * f)) < 1e-12);
  REQUIRE(std::abs(rc.p - std::sqrt(1.0 - f * f)) < 1e-12);
  REQUIRE(rc.residual <= 1e-10);

  // asymptotics: P = beta - beta^3/8 + O(beta^5) near zero
  Rng rng(353);
  for (int trial = 0; trial < 40; ++trial) {
    double beta = rng.uniform(0.0, 0.3);
    double ff = 1.0 - beta * beta / 2.0;
    auto r = bp_check(ff);
    REQUIRE(std::abs(r.p - r.beta) <= std::pow(r.beta, 3) / 4 + 1e-12);
  }
}

#include <catch2/catch_amalgamated.hpp>

#include "dilatio/derivation.hpp"
#include "dilatio/dilation.hpp"
#include "dilatio/rng.hpp"

using namespace dilatio;

namespace {

Port cbit(const std::string& n) { return Port{n, 2, Kind::classical}; }

ClassicalChannel pr_box() {
  RMatrix pr = RMatrix::Zero(4, 4);
  for (int xa = 0; xa < 2; ++xa)
    for (int xb = 0; xb < 2; ++xb)
      for (int ya = 0; ya < 2; ++ya)
        for (int yb = 0; yb < 2; ++yb)
          if ((ya ^ yb) == (xa & xb)) pr(ya * 2 + yb, xa * 2 + xb) = 0.5;
  return ClassicalChannel::from_table({cbit("ya"), cbit("yb")}, {cbit("xa"), cbit("xb")}, pr);
}

// One-time pad: c = m xor k, k kept, key uniform.
ClassicalChannel one_time_pad() {
  RMatrix t = RMatrix::Zero(4, 2);
  for (int m = 0; m < 2; ++m)
    for (int k = 0; k < 2; ++k) t((m ^ k) * 2 + k, m) += 0.5;
  return ClassicalChannel::from_table({cbit("c"), cbit("k")}, {cbit("m")}, t);
}

CausalChannel primitive_causal(const Channel& c) {
  return CausalChannel(c, CausalSpec::primitive(input_of(c), output_of(c)));
}

ClassicalChannel random_classical(Rng& rng, const std::string& in, const std::string& out,
                                  int din = 2, int dout = 2) {
  return ClassicalChannel::from_table({Port{out, dout, Kind::classical}},
                                      {Port{in, din, Kind::classical}},
                                      rng.stochastic_table(dout, din));
}

// Two copies of a uniformly random bit on ports (k1, k2).
ClassicalChannel kappa(const std::string& k1, const std::string& k2) {
  RMatrix t = RMatrix::Zero(4, 1);
  t(0, 0) = 0.5;
  t(3, 0) = 0.5;
  return ClassicalChannel::from_table({cbit(k1), cbit(k2)}, {}, t);
}

ClassicalChannel xor_gate(const std::string& a, const std::string& b, const std::string& out) {
  RMatrix t = RMatrix::Zero(2, 4);
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) t(x ^ y, x * 2 + y) = 1.0;
  return ClassicalChannel::from_table({cbit(out)}, {cbit(a), cbit(b)}, t);
}

} // namespace

TEST_CASE("validate_causal") {
  CausalSpec local;
  local.set("ya", {"xa"});
  local.set("yb", {"xb"});
  CausalChannel pr(Channel(pr_box()), local);
  REQUIRE(validate_causal(pr).pass);
  REQUIRE(validate_causal(pr, 1e-8, true).pass); // full-subset audit

  CausalSpec empty;
  empty.set("x", {});
  CausalChannel idc(make_identity(Interface::single("x", 2, Kind::classical)), empty);
  REQUIRE_FALSE(validate_causal(idc).pass);

  // one-time pad with the ancestry specification (m causes c; k uncaused)
  CausalSpec otp_spec;
  otp_spec.set("c", {"m"});
  otp_spec.set("k", {});
  CausalChannel otp(Channel(one_time_pad()), otp_spec);
  REQUIRE(validate_causal(otp).pass);
}

TEST_CASE("causal composition") {
  Rng rng(401);
  ClassicalChannel t = random_classical(rng, "x", "y");
  CausalChannel ct = primitive_causal(Channel(t));
  Interface y2 = Interface::single("y", 2, Kind::classical);
  CausalChannel idc(make_identity(y2), CausalSpec::identity(y2));
  CausalChannel comp = causal_serial(idc, ct);
  REQUIRE(comp.spec.of("y") == std::set<std::string>{"x"});
  REQUIRE(validate_causal(comp).pass);

  // trash-then-state: bit refreshment with spec C(y) = {x}, the trivial
  // system stalling the state release
  Interface x2 = Interface::single("x", 2, Kind::classical);
  Interface one = Interface::single("mid", 1, Kind::classical);
  CausalChannel tr1(Channel(ClassicalChannel::from_table(one.ports(), x2.ports(),
                                                         RMatrix::Ones(1, 2))),
                    CausalSpec::primitive(x2, one));
  CausalChannel st(Channel(ClassicalChannel::from_table(y2.ports(), one.ports(),
                                                        RMatrix::Constant(2, 1, 0.5))),
                   CausalSpec::primitive(one, y2));
  CausalChannel refresh = causal_serial(st, tr1);
  REQUIRE(refresh.spec.of("y") == std::set<std::string>{"x"});
  const auto& table = std::get<ClassicalChannel>(refresh.channel).table();
  REQUIRE((table - RMatrix::Constant(2, 2, 0.5)).norm() < 1e-12);

  ClassicalChannel s = random_classical(rng, "u", "v");
  CausalChannel both = causal_parallel(ct, primitive_causal(Channel(s)));
  REQUIRE(both.spec.of("y") == std::set<std::string>{"x"});
  REQUIRE(both.spec.of("v") == std::set<std::string>{"u"});
}

TEST_CASE("single box stencil evaluates to the box") {
  Rng rng(403);
  ClassicalChannel t = random_classical(rng, "a", "b");
  Stencil g;
  g.boxes = {"T"};
  g.in_ports = {"x"};
  g.out_ports = {"y"};
  g.wires.push_back({"w0", "x", "T", "", "a"});
  g.wires.push_back({"w1", "T", "y", "b", ""});
  Filling f;
  f.wire_systems["w0"] = {2, Kind::classical};
  f.wire_systems["w1"] = {2, Kind::classical};
  f.box_channels["T"] = primitive_causal(Channel(t));
  CausalChannel v = evaluate_stencil(g, f);
  REQUIRE(input_of(v.channel).has("x"));
  REQUIRE(output_of(v.channel).has("y"));
  REQUIRE((std::get<ClassicalChannel>(v.channel).table() - t.table()).norm() < 1e-12);
  REQUIRE(v.spec.of("y") == std::set<std::string>{"x"});
}

namespace {

// The five-box network: T4 -> {U, y4, S}; T3: {x2, U} -> {W, V};
// T1: {x1, W} -> {y1, Z}; T2: {Z, V} -> {y2, y3}; T5: {S, x3} -> {y5}.
std::pair<Stencil, Filling> generic_five_box(Rng& rng) {
  Stencil g;
  g.boxes = {"T1", "T2", "T3", "T4", "T5"};
  g.in_ports = {"x1", "x2", "x3"};
  g.out_ports = {"y1", "y2", "y3", "y4", "y5"};
  auto wire = [&](const std::string& id, const std::string& from, const std::string& fp,
                  const std::string& to, const std::string& tp) {
    g.wires.push_back({id, from, to, fp, tp});
  };
  wire("wx1", "x1", "", "T1", "i1");
  wire("wx2", "x2", "", "T3", "i1");
  wire("wx3", "x3", "", "T5", "i2");
  wire("wU", "T4", "oU", "T3", "i2");
  wire("wS", "T4", "oS", "T5", "i1");
  wire("wy4", "T4", "oy", "y4", "");
  wire("wW", "T3", "oW", "T1", "i2");
  wire("wV", "T3", "oV", "T2", "i2");
  wire("wy1", "T1", "o1", "y1", "");
  wire("wZ", "T1", "oZ", "T2", "i1");
  wire("wy2", "T2", "o1", "y2", "");
  wire("wy3", "T2", "o2", "y3", "");
  wire("wy5", "T5", "o1", "y5", "");
  Filling f;
  for (const auto& w : g.wires) f.wire_systems[w.id] = {2, Kind::classical};
  auto fill = [&](const std::string& box, std::vector<Port> in, std::vector<Port> out) {
    RMatrix t = rng.stochastic_table(Interface(out).total_dim(), Interface(in).total_dim());
    f.box_channels[box] = primitive_causal(Channel(ClassicalChannel::from_table(out, in, t)));
  };
  fill("T4", {}, {cbit("oU"), cbit("oy"), cbit("oS")});
  fill("T3", {cbit("i1"), cbit("i2")}, {cbit("oW"), cbit("oV")});
  fill("T1", {cbit("i1"), cbit("i2")}, {cbit("o1"), cbit("oZ")});
  fill("T2", {cbit("i1"), cbit("i2")}, {cbit("o1"), cbit("o2")});
  fill("T5", {cbit("i1"), cbit("i2")}, {cbit("o1")});
  return {g, f};
}

} // namespace

TEST_CASE("generic five-box stencil: ancestry specification") {
  Rng rng(409);
  auto [g, f] = generic_five_box(rng);
  CausalChannel v = evaluate_stencil(g, f);
  REQUIRE(v.spec.of("y1") == std::set<std::string>({"x1", "x2"}));
  REQUIRE(v.spec.of("y2") == std::set<std::string>({"x1", "x2"}));
  REQUIRE(v.spec.of("y3") == std::set<std::string>({"x1", "x2"}));
  REQUIRE(v.spec.of("y4") == std::set<std::string>{});
  REQUIRE(v.spec.of("y5") == std::set<std::string>{"x3"});
  REQUIRE(validate_causal(v).pass);
}

TEST_CASE("evaluation is invariant under the topological order") {
  Rng rng(419);
  auto [g, f] = generic_five_box(rng);
  CausalChannel v1 = evaluate_stencil(g, f);
  std::vector<std::string> order{"T4", "T5", "T3", "T1", "T2"};
  CausalChannel v2 = evaluate_stencil(g, f, order);
  REQUIRE(channel_dist(v1.channel, v2.channel) < 1e-10);
  std::vector<std::string> order3{"T4", "T3", "T5", "T1", "T2"};
  CausalChannel v3 = evaluate_stencil(g, f, order3);
  REQUIRE(channel_dist(v1.channel, v3.channel) < 1e-10);
}

namespace {

// Parallel pair (A: x -> p) (x) (B: q -> y) as a four-box stencil.
struct ParallelPairRep {
  Stencil g;
  Filling f;
};

ParallelPairRep pair_rep(const Channel& leg_a1, const Channel& leg_a2, const Channel& leg_b1,
                         const Channel& leg_b2, Kind kind, int dim) {
  ParallelPairRep r;
  r.g.boxes = {"A1", "A2", "B1", "B2"};
  r.g.in_ports = {"x", "q"};
  r.g.out_ports = {"p", "y"};
  r.g.wires.push_back({"wa0", "x", "A1", "", "in"});
  r.g.wires.push_back({"wa1", "A1", "A2", "out", "in"});
  r.g.wires.push_back({"wa2", "A2", "p", "out", ""});
  r.g.wires.push_back({"wb0", "q", "B1", "", "in"});
  r.g.wires.push_back({"wb1", "B1", "B2", "out", "in"});
  r.g.wires.push_back({"wb2", "B2", "y", "out", ""});
  for (const auto& w : r.g.wires) r.f.wire_systems[w.id] = {dim, kind};
  r.f.box_channels["A1"] = primitive_causal(leg_a1);
  r.f.box_channels["A2"] = primitive_causal(leg_a2);
  r.f.box_channels["B1"] = primitive_causal(leg_b1);
  r.f.box_channels["B2"] = primitive_causal(leg_b2);
  return r;
}

Channel classical_box(Rng& rng, int dim) {
  return ClassicalChannel::from_table({Port{"out", dim, Kind::classical}},
                                      {Port{"in", dim, Kind::classical}},
                                      rng.stochastic_table(dim, dim));
}

Channel quantum_box(Rng& rng, int dim) {
  CMatrix s = rng.haar_isometry(dim * 2, dim);
  Channel conj = isometry_channel(
      s, {Port{"out", dim, Kind::quantum}, Port{"~e", 2, Kind::quantum}},
      {Port{"in", dim, Kind::quantum}});
  return marginal(conj, {"out"});
}

Channel id_box(Kind k, int d) {
  Channel c = make_identity(Interface(std::vector<Port>{Port{"in", d, k}}));
  return rename_ports(c, {}, {{"in", "out"}});
}

} // namespace

TEST_CASE("contraction is independent of the stencil representation") {
  Rng rng(421);
  for (int fixture = 0; fixture < 3; ++fixture) {
    Kind kind = (fixture == 0) ? Kind::classical : Kind::quantum;
    int dim = 2;
    Channel a1 = (kind == Kind::classical) ? classical_box(rng, dim) : quantum_box(rng, dim);
    Channel a2 = (kind == Kind::classical) ? classical_box(rng, dim) : quantum_box(rng, dim);
    Channel b1 = (kind == Kind::classical) ? classical_box(rng, dim) : quantum_box(rng, dim);
    Channel b2 = (kind == Kind::classical) ? classical_box(rng, dim) : quantum_box(rng, dim);
    // rep1: A split into two boxes, B merged; rep2: A merged, B split
    Channel b = serial(rename_ports(b2, {{"in", "mid"}}, {}),
                       rename_ports(b1, {}, {{"out", "mid"}}));
    ParallelPairRep rep1 = pair_rep(a1, a2, b, id_box(kind, dim), kind, dim);
    Channel a = serial(rename_ports(a2, {{"in", "mid"}}, {}),
                       rename_ports(a1, {}, {{"out", "mid"}}));
    ParallelPairRep rep2 = pair_rep(a, id_box(kind, dim), b1, b2, kind, dim);
    CausalChannel v1 = evaluate_stencil(rep1.g, rep1.f);
    CausalChannel v2 = evaluate_stencil(rep2.g, rep2.f);
    REQUIRE(channel_dist(v1.channel, v2.channel) < 1e-9);
    auto c1 = contract(rep1.g, rep1.f, {{"p", "q"}});
    auto c2 = contract(rep2.g, rep2.f, {{"p", "q"}});
    REQUIRE(channel_dist(c1.value.channel, c2.value.channel) < 1e-9);
    REQUIRE(c1.value.spec.of("y") == c2.value.spec.of("y"));
  }
}

TEST_CASE("contracting an output into its own ancestry fails") {
  Rng rng(431);
  RMatrix t = rng.stochastic_table(2, 4);
  Channel a = ClassicalChannel::from_table({cbit("po")}, {cbit("xi"), cbit("qi")}, t);
  Stencil g;
  g.boxes = {"A"};
  g.in_ports = {"x", "q"};
  g.out_ports = {"p"};
  g.wires.push_back({"w0", "x", "A", "", "xi"});
  g.wires.push_back({"w1", "q", "A", "", "qi"});
  g.wires.push_back({"w2", "A", "p", "po", ""});
  Filling f;
  for (const auto& w : g.wires) f.wire_systems[w.id] = {2, Kind::classical};
  f.box_channels["A"] = primitive_causal(a);
  CausalChannel v = evaluate_stencil(g, f);
  REQUIRE(v.spec.of("p").count("q") == 1); // q in C(p): not seemingly contractible
  REQUIRE_THROWS_AS(contract(g, f, {{"p", "q"}}), std::invalid_argument);
}

namespace {

// The near-dilation network: y = d xor k, e = x xor k with a shared uniform
// key bit; visible ports (x, y), hidden ports (d, e).
std::pair<Stencil, Filling> near_dilation_network() {
  Stencil g;
  g.boxes = {"KAP", "XOR1", "XOR2"};
  g.in_ports = {"d", "x"};
  g.out_ports = {"y", "e"};
  g.wires.push_back({"wd", "d", "XOR1", "", "a"});
  g.wires.push_back({"wk1", "KAP", "XOR1", "k1", "b"});
  g.wires.push_back({"wk2", "KAP", "XOR2", "k2", "b"});
  g.wires.push_back({"wx", "x", "XOR2", "", "a"});
  g.wires.push_back({"wy", "XOR1", "y", "out", ""});
  g.wires.push_back({"we", "XOR2", "e", "out", ""});
  Filling f;
  for (const auto& w : g.wires) f.wire_systems[w.id] = {2, Kind::classical};
  f.box_channels["KAP"] = primitive_causal(Channel(kappa("k1", "k2")));
  f.box_channels["XOR1"] = primitive_causal(Channel(xor_gate("a", "b", "out")));
  f.box_channels["XOR2"] = primitive_causal(Channel(xor_gate("a", "b", "out")));
  return {g, f};
}

CausalChannel bit_refresh_causal() {
  RMatrix t = RMatrix::Constant(2, 2, 0.5);
  Channel c = ClassicalChannel::from_table({cbit("y")}, {cbit("x")}, t);
  CausalSpec s;
  s.set("y", {"x"});
  return CausalChannel(c, s);
}

} // namespace

TEST_CASE("near-dilation counterexample") {
  auto [g, f] = near_dilation_network();
  CausalChannel l = evaluate_stencil(g, f);
  CausalChannel base = bit_refresh_causal();

  auto chk = is_causal_dilation(l, base, {"d"}, {"e"}, 1e-9);
  REQUIRE(chk.channel_ok);
  // ancestry gives y the hidden cause d, so the spec clause fails
  REQUIRE(l.spec.of("y") == std::set<std::string>{"d"});
  REQUIRE_FALSE(chk.spec_ok);
  REQUIRE_FALSE(chk.ok);

  // contracting the hidden pair yields the identity, which no longer
  // dilates the bit refreshment even at channel level
  auto ctr = contract(g, f, {{"e", "d"}});
  Channel idxy = ClassicalChannel::from_table({cbit("y")}, {cbit("x")}, RMatrix::Identity(2, 2));
  REQUIRE(channel_dist(ctr.value.channel, idxy) < 1e-10);
  auto chk2 = is_causal_dilation(ctr.value, base, {}, {}, 1e-9);
  REQUIRE_FALSE(chk2.channel_ok);
}

TEST_CASE("bit refreshment dilation (random bit drawn early)") {
  Stencil g;
  g.boxes = {"R", "CPY", "ID"};
  g.in_ports = {"x"};
  g.out_ports = {"y", "xkeep", "rkeep"};
  g.wires.push_back({"w0", "x", "CPY", "", "in"});
  g.wires.push_back({"w1", "CPY", "xkeep", "c1", ""});
  g.wires.push_back({"w2", "CPY", "ID", "c2", "stall"});
  g.wires.push_back({"w3", "R", "ID", "r1", "val"});
  g.wires.push_back({"w4", "R", "rkeep", "r2", ""});
  g.wires.push_back({"w5", "ID", "y", "out", ""});
  Filling f;
  f.wire_systems["w0"] = {2, Kind::classical};
  f.wire_systems["w1"] = {2, Kind::classical};
  f.wire_systems["w2"] = {1, Kind::classical}; // trivial stalling system
  f.wire_systems["w3"] = {2, Kind::classical};
  f.wire_systems["w4"] = {2, Kind::classical};
  f.wire_systems["w5"] = {2, Kind::classical};
  RMatrix cpy2 = RMatrix::Zero(2 * 1, 2);
  cpy2(0, 0) = 1;
  cpy2(1, 1) = 1;
  f.box_channels["CPY"] = primitive_causal(Channel(ClassicalChannel::from_table(
      {cbit("c1"), Port{"c2", 1, Kind::classical}}, {cbit("in")}, cpy2)));
  f.box_channels["R"] = primitive_causal(Channel(kappa("r1", "r2")));
  RMatrix idt = RMatrix::Identity(2, 2);
  f.box_channels["ID"] = primitive_causal(Channel(ClassicalChannel::from_table(
      {cbit("out")}, {Port{"stall", 1, Kind::classical}, cbit("val")}, idt)));
  CausalChannel l = evaluate_stencil(g, f);

  CausalChannel base = bit_refresh_causal();
  auto chk = is_causal_dilation(l, base, {}, {"xkeep", "rkeep"}, 1e-9);
  REQUIRE(chk.ok);
  REQUIRE(l.spec.of("y") == std::set<std::string>{"x"});
  REQUIRE(l.spec.of("rkeep") == std::set<std::string>{});
  REQUIRE(l.spec.of("xkeep") == std::set<std::string>{"x"});

  auto ac = acausal_ports(l, {}, {"xkeep", "rkeep"});
  REQUIRE(ac == std::set<std::string>{"rkeep"});

  // declaring a hidden cause for y breaks the spec clause
  CausalChannel bad = l;
  bad.spec.set("y", {"x", "rkeep"});
  REQUIRE_FALSE(is_causal_dilation(bad, base, {}, {"xkeep", "rkeep"}, 1e-9).ok);
}

TEST_CASE("acausal ports of trivial parallel dilations") {
  Rng rng(433);
  ClassicalChannel t = random_classical(rng, "x", "y");
  ClassicalChannel s = random_classical(rng, "d", "e");
  CausalChannel dil = causal_parallel(primitive_causal(Channel(t)), primitive_causal(Channel(s)));
  auto ac = acausal_ports(dil, {"d"}, {"e"});
  REQUIRE(ac == std::set<std::string>{"e"});
}

TEST_CASE("hidden contraction stability (randomized)") {
  Rng rng(439);
  for (int trial = 0; trial < 25; ++trial) {
    bool quantum = trial % 2;
    int dim = 2;
    Channel t = quantum ? quantum_box(rng, dim) : classical_box(rng, dim);
    Channel m = quantum ? quantum_box(rng, dim) : classical_box(rng, dim);
    Kind kind = quantum ? Kind::quantum : Kind::classical;
    RVector pv = rng.probability_vector(dim);
    Channel s = quantum ? make_quantum_state(rng.density_matrix(dim),
                                             Interface(std::vector<Port>{Port{"sv", dim, kind}}))
                        : make_classical_state(pv, Interface(std::vector<Port>{Port{"sv", dim, kind}}));

    Stencil g;
    g.boxes = {"T", "M", "S"};
    g.in_ports = {"x", "d"};
    g.out_ports = {"y", "e1", "e2"};
    g.wires.push_back({"w0", "x", "T", "", "in"});
    g.wires.push_back({"w1", "T", "y", "out", ""});
    g.wires.push_back({"w2", "d", "M", "", "in"});
    g.wires.push_back({"w3", "M", "e1", "out", ""});
    g.wires.push_back({"w4", "S", "e2", "sv", ""});
    Filling f;
    for (const auto& w : g.wires) f.wire_systems[w.id] = {dim, kind};
    f.box_channels["T"] = primitive_causal(t);
    f.box_channels["M"] = primitive_causal(m);
    f.box_channels["S"] = primitive_causal(s);
    CausalChannel l = evaluate_stencil(g, f);

    CausalSpec bs;
    bs.set("y", {"x"});
    CausalChannel base(rename_ports(t, {{"in", "x"}}, {{"out", "y"}}), bs);
    REQUIRE(is_causal_dilation(l, base, {"d"}, {"e1", "e2"}, 1e-8).ok);

    // the pair (e2, d) is contractible; the contraction stays a dilation
    auto ctr = contract(g, f, {{"e2", "d"}});
    REQUIRE(is_causal_dilation(ctr.value, base, {}, {"e1"}, 1e-8).ok);
  }
}

TEST_CASE("accessible contraction coherence") {
  Rng rng(443);
  Channel a1 = classical_box(rng, 2), a2 = classical_box(rng, 2);
  Channel b1 = classical_box(rng, 2), b2 = classical_box(rng, 2);
  ParallelPairRep rep = pair_rep(a1, a2, b1, b2, Kind::classical, 2);
  CausalChannel base = evaluate_stencil(rep.g, rep.f);
  auto base_ctr = contract(rep.g, rep.f, {{"p", "q"}});

  ParallelPairRep dil = rep;
  dil.g.boxes.insert("H");
  dil.g.out_ports.insert("h");
  dil.g.wires.push_back({"wh", "H", "h", "sv", ""});
  dil.f.wire_systems["wh"] = {2, Kind::classical};
  dil.f.box_channels["H"] = primitive_causal(
      make_classical_state(rng.probability_vector(2), Interface(std::vector<Port>{cbit("sv")})));
  CausalChannel ldil = evaluate_stencil(dil.g, dil.f);
  REQUIRE(is_causal_dilation(ldil, base, {}, {"h"}, 1e-9).ok);

  auto dil_ctr = contract(dil.g, dil.f, {{"p", "q"}});
  REQUIRE(is_causal_dilation(dil_ctr.value, base_ctr.value, {}, {"h"}, 1e-9).ok);
}

TEST_CASE("parallel stability of causal dilations") {
  Rng rng(449);
  ClassicalChannel t1 = random_classical(rng, "x1", "y1");
  ClassicalChannel t2 = random_classical(rng, "x2", "y2");
  CausalChannel b1 = primitive_causal(Channel(t1));
  CausalChannel b2 = primitive_causal(Channel(t2));
  auto dilate = [&](const CausalChannel& b, const std::string& hname) {
    CausalChannel h = primitive_causal(make_classical_state(
        rng.probability_vector(2), Interface(std::vector<Port>{cbit(hname)})));
    return causal_parallel(b, h);
  };
  CausalChannel l1 = dilate(b1, "h1");
  CausalChannel l2 = dilate(b2, "h2");
  REQUIRE(is_causal_dilation(l1, b1, {}, {"h1"}, 1e-9).ok);
  REQUIRE(is_causal_dilation(l2, b2, {}, {"h2"}, 1e-9).ok);
  CausalChannel lpar = causal_parallel(l1, l2);
  CausalChannel bpar = causal_parallel(b1, b2);
  REQUIRE(is_causal_dilation(lpar, bpar, {}, {"h1", "h2"}, 1e-9).ok);
}

TEST_CASE("verify_env_derivation: serial post-processing") {
  Rng rng(457);
  ClassicalChannel base = random_classical(rng, "x", "y");
  Dilation comp = cit_complete_dilation(base);
  CausalDilation l;
  CausalSpec ls;
  ls.set("y", {"x"});
  ls.set("in_copy", {"x"});
  ls.set("out_copy", {"x"});
  l.cc = CausalChannel(comp.total, ls);
  CausalSpec bs;
  bs.set("y", {"x"});
  l.base = CausalChannel(Channel(base), bs);
  l.hidden_out = {"in_copy", "out_copy"};

  RMatrix par = RMatrix::Zero(2, 4);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) par(a ^ b, a * 2 + b) = 1.0;
  CausalChannel witness = primitive_causal(Channel(ClassicalChannel::from_table(
      {cbit("par")}, {cbit("in_copy"), cbit("out_copy")}, par)));

  Interface y2 = Interface::single("y", 2, Kind::classical);
  CausalDilation lp;
  lp.cc = causal_serial(causal_parallel(witness, CausalChannel(make_identity(y2),
                                                               CausalSpec::identity(y2))),
                        l.cc);
  lp.base = l.base;
  lp.hidden_out = {"par"};

  auto chk = verify_env_derivation(l, lp, witness, 1e-9);
  REQUIRE(chk.ok);

  RMatrix wrongt = RMatrix::Zero(2, 4);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) wrongt(1 ^ a ^ b, a * 2 + b) = 1.0;
  CausalChannel wrong = primitive_causal(Channel(ClassicalChannel::from_table(
      {cbit("par")}, {cbit("in_copy"), cbit("out_copy")}, wrongt)));
  REQUIRE_FALSE(verify_env_derivation(l, lp, wrong, 1e-9).ok);
}

TEST_CASE("verify_env_derivation: derivation by contraction") {
  Rng rng(461);
  ClassicalChannel tl = random_classical(rng, "x", "y");
  ClassicalChannel tm = random_classical(rng, "y2", "z");
  // L: copies its output to the hidden port e
  RMatrix lt = RMatrix::Zero(4, 2);
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) lt(y * 2 + y, x) += tl.table()(y, x);
  Channel ltotal = ClassicalChannel::from_table({cbit("y"), cbit("e")}, {cbit("x")}, lt);
  // M: z = tm(y2) xor d, keyed by the hidden input d
  RMatrix mt = RMatrix::Zero(2, 4);
  for (int d = 0; d < 2; ++d)
    for (int y2 = 0; y2 < 2; ++y2)
      for (int z = 0; z < 2; ++z) mt(z ^ d, d * 2 + y2) += tm.table()(z, y2);
  Channel mtotal = ClassicalChannel::from_table({cbit("z")}, {cbit("d"), cbit("y2")}, mt);

  // l = L (x) M as a two-box representation with open hidden wires
  RepresentedDilation l;
  l.g.boxes = {"L", "M"};
  l.g.in_ports = {"x", "y2", "d"};
  l.g.out_ports = {"y", "z", "e"};
  l.g.wires.push_back({"w0", "x", "L", "", "x"});
  l.g.wires.push_back({"w1", "L", "y", "y", ""});
  l.g.wires.push_back({"w2", "L", "e", "e", ""});
  l.g.wires.push_back({"w3", "y2", "M", "", "y2"});
  l.g.wires.push_back({"w4", "d", "M", "", "d"});
  l.g.wires.push_back({"w5", "M", "z", "z", ""});
  for (const auto& w : l.g.wires) l.f.wire_systems[w.id] = {2, Kind::classical};
  l.f.box_channels["L"] = primitive_causal(ltotal);
  l.f.box_channels["M"] = primitive_causal(mtotal);
  l.hidden_in = {"d"};
  l.hidden_out = {"e"};

  // lp = the contraction (the copy of y fed into M's key)
  Stencil g;
  g.boxes = {"L", "M"};
  g.in_ports = {"x", "y2"};
  g.out_ports = {"y", "z"};
  g.wires.push_back({"w0", "x", "L", "", "x"});
  g.wires.push_back({"w1", "L", "y", "y", ""});
  g.wires.push_back({"w2", "L", "M", "e", "d"});
  g.wires.push_back({"w3", "y2", "M", "", "y2"});
  g.wires.push_back({"w4", "M", "z", "z", ""});
  Filling f;
  for (const auto& w : g.wires) f.wire_systems[w.id] = {2, Kind::classical};
  f.box_channels["L"] = primitive_causal(ltotal);
  f.box_channels["M"] = primitive_causal(mtotal);
  CausalDilation lp;
  lp.cc = evaluate_stencil(g, f);

  Interface e2 = Interface::single("e", 2, Kind::classical);
  CausalSpec ws;
  ws.set("d", {"e"});
  CausalChannel witness(rename_ports(make_identity(e2), {}, {{"e", "d"}}), ws);
  auto chk = verify_env_derivation(l, lp, witness, 1e-9);
  REQUIRE(chk.channel_residual < 1e-9);
  REQUIRE(chk.ok);
}

TEST_CASE("search_bell_derivation: reflexive case verifies") {
  BellDenseDilation d;
  RMatrix tt = RMatrix::Zero(4, 1); // rows indexed (zA, e0)
  tt(0 * 2 + 0, 0) = 0.5;
  tt(1 * 2 + 1, 0) = 0.5;
  d.t = ClassicalChannel::from_table(
      {cbit("zA"), cbit("e0"), Port{"zB", 1, Kind::classical}}, {}, tt);
  RMatrix la = RMatrix::Zero(4, 4); // y = x xor z, eA = copy of x
  for (int x = 0; x < 2; ++x)
    for (int z = 0; z < 2; ++z) la((x ^ z) * 2 + x, x * 2 + z) = 1.0;
  d.la = ClassicalChannel::from_table({cbit("yA"), cbit("eA")}, {cbit("xA"), cbit("zA")}, la);
  RMatrix lbt = RMatrix::Ones(1, 1);
  d.lb = ClassicalChannel::from_table(
      {Port{"yB", 1, Kind::classical}, Port{"eB", 1, Kind::classical}},
      {Port{"xB", 1, Kind::classical}, Port{"zB", 1, Kind::classical}}, lbt);

  auto res = search_bell_derivation(d, d, 8, 1e-7);
  REQUIRE(res.status == BellSearchStatus::verified);
  REQUIRE(res.residual <= 1e-7);
}

TEST_CASE("search_bell_derivation: relabeled decomposition verifies") {
  BellDenseDilation d1;
  RMatrix tt = RMatrix::Zero(4, 1); // rows indexed (zA, e0)
  tt(0, 0) = 0.5;
  tt(1 * 2 + 1, 0) = 0.5;
  d1.t = ClassicalChannel::from_table(
      {cbit("zA"), cbit("e0"), Port{"zB", 1, Kind::classical}}, {}, tt);
  RMatrix la = RMatrix::Zero(4, 4);
  for (int x = 0; x < 2; ++x)
    for (int z = 0; z < 2; ++z) la((x ^ z) * 2 + x, x * 2 + z) = 1.0;
  d1.la = ClassicalChannel::from_table({cbit("yA"), cbit("eA")}, {cbit("xA"), cbit("zA")}, la);
  RMatrix lbt = RMatrix::Ones(1, 1);
  d1.lb = ClassicalChannel::from_table(
      {Port{"yB", 1, Kind::classical}, Port{"eB", 1, Kind::classical}},
      {Port{"xB", 1, Kind::classical}, Port{"zB", 1, Kind::classical}}, lbt);

  // relabel r -> 1-r in both the state and the function family
  BellDenseDilation d2 = d1;
  RMatrix tt2 = RMatrix::Zero(4, 1);
  tt2(1 * 2 + 0, 0) = 0.5;
  tt2(0 * 2 + 1, 0) = 0.5;
  d2.t = ClassicalChannel::from_table(
      {cbit("zA"), cbit("e0"), Port{"zB", 1, Kind::classical}}, {}, tt2);
  RMatrix la2 = RMatrix::Zero(4, 4);
  for (int x = 0; x < 2; ++x)
    for (int z = 0; z < 2; ++z) la2((x ^ z ^ 1) * 2 + x, x * 2 + z) = 1.0;
  d2.la = ClassicalChannel::from_table({cbit("yA"), cbit("eA")}, {cbit("xA"), cbit("zA")}, la2);

  REQUIRE(channel_dist(marginal(d1.assemble(), {"yA", "yB"}),
                       marginal(d2.assemble(), {"yA", "yB"})) < 1e-10);
  auto res = search_bell_derivation(d1, d2, 10, 1e-7);
  REQUIRE(res.status == BellSearchStatus::verified);
}

TEST_CASE("search_bell_derivation: inequivalent bit-refresh dilations stay inconclusive") {
  BellDenseDilation d1;
  RMatrix tt = RMatrix::Zero(4, 1); // rows indexed (zA, e0)
  tt(0, 0) = 0.5;
  tt(1 * 2 + 1, 0) = 0.5;
  d1.t = ClassicalChannel::from_table(
      {cbit("zA"), cbit("e0"), Port{"zB", 1, Kind::classical}}, {}, tt);
  RMatrix la1 = RMatrix::Zero(4, 4); // y = z: the {f0, f1} family
  for (int x = 0; x < 2; ++x)
    for (int z = 0; z < 2; ++z) la1(z * 2 + x, x * 2 + z) = 1.0;
  d1.la = ClassicalChannel::from_table({cbit("yA"), cbit("eA")}, {cbit("xA"), cbit("zA")}, la1);
  RMatrix lbt = RMatrix::Ones(1, 1);
  d1.lb = ClassicalChannel::from_table(
      {Port{"yB", 1, Kind::classical}, Port{"eB", 1, Kind::classical}},
      {Port{"xB", 1, Kind::classical}, Port{"zB", 1, Kind::classical}}, lbt);

  BellDenseDilation d2 = d1;
  RMatrix la2 = RMatrix::Zero(4, 4); // y = x xor z: the {id, NOT} family
  for (int x = 0; x < 2; ++x)
    for (int z = 0; z < 2; ++z) la2((x ^ z) * 2 + x, x * 2 + z) = 1.0;
  d2.la = ClassicalChannel::from_table({cbit("yA"), cbit("eA")}, {cbit("xA"), cbit("zA")}, la2);

  REQUIRE(channel_dist(marginal(d1.assemble(), {"yA", "yB"}),
                       marginal(d2.assemble(), {"yA", "yB"})) < 1e-10);
  auto res = search_bell_derivation(d1, d2, 6, 1e-7);
  REQUIRE(res.status == BellSearchStatus::inconclusive);
  REQUIRE(res.residual > 1e-4);
}

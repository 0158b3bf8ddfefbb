#pragma once

// Named fixtures: the PR box, one-time pad, bit refreshment, the canonical
// CHSH strategy and the generic five-box stencil, as ready-to-serialise
// objects and as file bundles for the CLI.

#include "dilatio/json_io.hpp"
#include "dilatio/rigidity.hpp"
#include "dilatio/rng.hpp"
#include "dilatio/stencil.hpp"

namespace dilatio {
namespace fixtures {

inline Port cport(const std::string& n, int d = 2) { return Port{n, d, Kind::classical}; }

inline ClassicalChannel pr_box() {
  RMatrix pr = RMatrix::Zero(4, 4);
  for (int xa = 0; xa < 2; ++xa)
    for (int xb = 0; xb < 2; ++xb)
      for (int ya = 0; ya < 2; ++ya)
        for (int yb = 0; yb < 2; ++yb)
          if ((ya ^ yb) == (xa & xb)) pr(ya * 2 + yb, xa * 2 + xb) = 0.5;
  return ClassicalChannel::from_table({cport("yA"), cport("yB")}, {cport("xA"), cport("xB")}, pr);
}

inline Behaviour pr_box_behaviour() { return Behaviour::from_channel(pr_box()); }

// c = m xor k with the key bit kept at the k-port.
inline ClassicalChannel one_time_pad() {
  RMatrix t = RMatrix::Zero(4, 2);
  for (int m = 0; m < 2; ++m)
    for (int k = 0; k < 2; ++k) t((m ^ k) * 2 + k, m) += 0.5;
  return ClassicalChannel::from_table({cport("c"), cport("k")}, {cport("m")}, t);
}

inline CausalSpec one_time_pad_spec() {
  CausalSpec s;
  s.set("c", {"m"});
  s.set("k", {});
  return s;
}

inline ClassicalChannel bit_refresh() {
  return ClassicalChannel::from_table({cport("y")}, {cport("x")}, RMatrix::Constant(2, 2, 0.5));
}

// The five-box network with a fixed (seeded) filling; its ancestry spec has
// C(y4) empty and C(y1) = {x1, x2}.
inline std::pair<Stencil, Filling> generic_stencil(std::uint64_t seed = 2026) {
  Rng rng(seed);
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
    Channel c = ClassicalChannel::from_table(out, in, t);
    f.box_channels[box] = CausalChannel(c, CausalSpec::primitive(Interface(in), Interface(out)));
  };
  fill("T4", {}, {cport("oU"), cport("oy"), cport("oS")});
  fill("T3", {cport("i1"), cport("i2")}, {cport("oW"), cport("oV")});
  fill("T1", {cport("i1"), cport("i2")}, {cport("o1"), cport("oZ")});
  fill("T2", {cport("i1"), cport("i2")}, {cport("o1"), cport("o2")});
  fill("T5", {cport("i1"), cport("i2")}, {cport("o1")});
  return {g, f};
}

// File bundle for a named fixture: filename -> json payload.
inline std::map<std::string, Json> bundle(const std::string& name) {
  std::map<std::string, Json> files;
  if (name == "pr-box") {
    files["pr-box.channel.json"] = to_json(Channel(pr_box()));
    files["pr-box.behaviour.json"] = to_json(pr_box_behaviour());
  } else if (name == "one-time-pad") {
    files["one-time-pad.channel.json"] = to_json(Channel(one_time_pad()));
    files["one-time-pad.spec.json"] = to_json(one_time_pad_spec());
  } else if (name == "bit-refresh") {
    files["bit-refresh.channel.json"] = to_json(Channel(bit_refresh()));
  } else if (name == "chsh-canonical") {
    files["chsh-canonical.strategy.json"] = to_json(canonical_chsh());
  } else if (name == "generic-stencil") {
    auto [g, f] = generic_stencil();
    files["generic-stencil.stencil.json"] = to_json(g, f);
    Json boxes = Json::object(), specs = Json::object();
    for (const auto& [id, cc] : f.box_channels) {
      const std::string fname = "generic-stencil." + id + ".channel.json";
      files[fname] = to_json(cc.channel);
      boxes[id] = fname;
      specs[id] = to_json(cc.spec);
    }
    files["generic-stencil.filling.json"] = Json{{"boxes", boxes}, {"specs", specs}};
  } else {
    throw std::invalid_argument("unknown fixture '" + name + "'");
  }
  return files;
}

inline std::vector<std::string> names() {
  return {"pr-box", "one-time-pad", "bit-refresh", "chsh-canonical", "generic-stencil"};
}

} // namespace fixtures
} // namespace dilatio

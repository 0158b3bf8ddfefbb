#pragma once

// Stencils (circuit DAGs of boxes and port vertices), fillings, evaluation
// by canonical topological composition, and contraction of output/input
// port pairs.

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dilatio/causal.hpp"

namespace dilatio {

struct WireSystem {
  int dim = 1;
  Kind kind = Kind::quantum;
  bool operator==(const WireSystem& o) const { return dim == o.dim && kind == o.kind; }
};

struct StencilWire {
  std::string id;
  std::string from, to;            // vertex ids (box or port vertex)
  std::string from_port, to_port;  // optional box-port bindings; "" = positional
};

// A directed acyclic graph of boxes and port vertices.  Input wires leave
// source port vertices, output wires enter sink port vertices.
struct Stencil {
  std::set<std::string> boxes;
  std::set<std::string> in_ports, out_ports; // port-vertex ids
  std::vector<StencilWire> wires;

  const StencilWire* wire(const std::string& id) const {
    for (const auto& w : wires)
      if (w.id == id) return &w;
    return nullptr;
  }

  std::vector<const StencilWire*> wires_into(const std::string& vertex) const {
    std::vector<const StencilWire*> v;
    for (const auto& w : wires)
      if (w.to == vertex) v.push_back(&w);
    return v;
  }

  std::vector<const StencilWire*> wires_from(const std::string& vertex) const {
    std::vector<const StencilWire*> v;
    for (const auto& w : wires)
      if (w.from == vertex) v.push_back(&w);
    return v;
  }

  void check() const {
    std::set<std::string> ids;
    for (const auto& w : wires) {
      if (!ids.insert(w.id).second) throw std::invalid_argument("Stencil: duplicate wire id " + w.id);
      auto known = [&](const std::string& v) {
        return boxes.count(v) || in_ports.count(v) || out_ports.count(v);
      };
      if (!known(w.from) || !known(w.to))
        throw std::invalid_argument("Stencil: wire " + w.id + " references unknown vertex");
    }
    for (const auto& p : in_ports) {
      if (!wires_into(p).empty() || wires_from(p).size() != 1)
        throw std::invalid_argument("Stencil: input port " + p + " must be a source with one wire");
    }
    for (const auto& p : out_ports) {
      if (!wires_from(p).empty() || wires_into(p).size() != 1)
        throw std::invalid_argument("Stencil: output port " + p + " must be a sink with one wire");
    }
    for (const auto& b : boxes)
      if (wires_into(b).empty() && wires_from(b).empty())
        throw std::invalid_argument("Stencil: isolated box " + b);
    topological_order(); // throws on cycles
  }

  // Kahn's algorithm, lexicographically smallest ready box first.
  std::vector<std::string> topological_order() const {
    std::map<std::string, int> indeg;
    for (const auto& b : boxes) indeg[b] = 0;
    for (const auto& w : wires)
      if (boxes.count(w.from) && boxes.count(w.to)) ++indeg[w.to];
    std::set<std::string> ready;
    for (const auto& [b, d] : indeg)
      if (d == 0) ready.insert(b);
    std::vector<std::string> order;
    while (!ready.empty()) {
      std::string b = *ready.begin();
      ready.erase(ready.begin());
      order.push_back(b);
      for (const auto& w : wires)
        if (w.from == b && boxes.count(w.to) && --indeg[w.to] == 0) ready.insert(w.to);
    }
    if (order.size() != boxes.size()) throw std::invalid_argument("Stencil: cycle detected");
    return order;
  }
};

struct Filling {
  std::map<std::string, WireSystem> wire_systems;   // wire id -> system
  std::map<std::string, CausalChannel> box_channels; // box id -> causal channel
};

namespace stdetail {

// Binds a box's wires (incoming or outgoing) to the ports of its channel
// interface: explicit "vertex:port" bindings first, the rest positionally by
// wire id against the remaining ports in canonical order.  Returns wire id ->
// port name.
inline std::map<std::string, std::string> bind_wires(const std::vector<const StencilWire*>& ws,
                                                     const Interface& iface, const Filling& f,
                                                     bool incoming, const std::string& box) {
  std::map<std::string, std::string> binding;
  std::set<std::string> taken;
  std::vector<const StencilWire*> unbound;
  for (const auto* w : ws) {
    const std::string& pname = incoming ? w->to_port : w->from_port;
    if (!pname.empty()) {
      if (!iface.has(pname))
        throw std::invalid_argument("Filling: box " + box + " has no port '" + pname + "'");
      binding[w->id] = pname;
      taken.insert(pname);
    } else {
      unbound.push_back(w);
    }
  }
  std::sort(unbound.begin(), unbound.end(),
            [](const StencilWire* a, const StencilWire* b) { return a->id < b->id; });
  std::vector<const Port*> remaining;
  for (const Port& p : iface.ports())
    if (!taken.count(p.name)) remaining.push_back(&p);
  if (unbound.size() != remaining.size())
    throw std::invalid_argument("Filling: wire/port count mismatch at box " + box);
  for (size_t k = 0; k < unbound.size(); ++k) binding[unbound[k]->id] = remaining[k]->name;
  for (const auto* w : ws) {
    auto sys = f.wire_systems.find(w->id);
    if (sys == f.wire_systems.end())
      throw std::invalid_argument("Filling: wire " + w->id + " has no system");
    const Port* p = iface.find(binding[w->id]);
    if (p->dim != sys->second.dim || p->kind != sys->second.kind)
      throw std::invalid_argument("Filling: system mismatch on wire " + w->id + " at box " + box);
  }
  return binding;
}

} // namespace stdetail

// Evaluates the filled stencil to the causal channel from the input-port
// interface to the output-port interface. Wire alignment happens through the
// named-port canonicalisation of the channel layer. The result is
// independent of the chosen topological order (tested, not assumed); the
// canonical order is used unless one is supplied.
inline CausalChannel evaluate_stencil(const Stencil& g, const Filling& f,
                                      const std::vector<std::string>& order = {}) {
  g.check();
  std::vector<std::string> topo = order.empty() ? g.topological_order() : order;
  if (std::set<std::string>(topo.begin(), topo.end()) != g.boxes)
    throw std::invalid_argument("evaluate_stencil: order does not enumerate the boxes");

  // Running name of each wire: its in-port id if it leaves an input port,
  // its out-port id if it enters an output port (pass-through wires use the
  // output name and start as a renaming channel), else the wire id.
  auto running_name = [&](const StencilWire& w) -> std::string {
    if (g.out_ports.count(w.to)) return w.to;
    if (g.in_ports.count(w.from)) return w.from;
    return w.id;
  };

  auto system_of = [&](const std::string& wire_id) -> const WireSystem& {
    auto it = f.wire_systems.find(wire_id);
    if (it == f.wire_systems.end())
      throw std::invalid_argument("evaluate_stencil: wire " + wire_id + " has no system");
    return it->second;
  };

  // Initial channel: for each input wire a (possibly renaming) identity from
  // the in-port name to the wire's running name.
  CausalChannel acc(make_identity(Interface{}), CausalSpec{});
  for (const auto& p : g.in_ports) {
    const StencilWire& w = *g.wires_from(p)[0];
    const WireSystem& sys = system_of(w.id);
    Channel line = (sys.kind == Kind::classical)
        ? Channel(ClassicalChannel::from_table({Port{running_name(w), sys.dim, sys.kind}},
                                               {Port{p, sys.dim, sys.kind}},
                                               RMatrix::Identity(sys.dim, sys.dim)))
        : Channel(QuantumChannel::from_choi(
              {Port{running_name(w), sys.dim, sys.kind}}, {Port{p, sys.dim, sys.kind}},
              std::get<QuantumChannel>(make_identity(Interface::single(p, sys.dim, sys.kind)))
                  .choi()));
    CausalSpec sp;
    sp.set(running_name(w), {p});
    acc = causal_parallel(acc, CausalChannel(line, sp));
  }

  for (const auto& b : topo) {
    auto it = f.box_channels.find(b);
    if (it == f.box_channels.end())
      throw std::invalid_argument("evaluate_stencil: box " + b + " is unfilled");
    const CausalChannel& box = it->second;
    auto in_binding = stdetail::bind_wires(g.wires_into(b), input_of(box.channel), f, true, b);
    auto out_binding = stdetail::bind_wires(g.wires_from(b), output_of(box.channel), f, false, b);
    std::map<std::string, std::string> in_rename, out_rename;
    for (const auto& [wid, pname] : in_binding) in_rename[pname] = running_name(*g.wire(wid));
    for (const auto& [wid, pname] : out_binding) out_rename[pname] = running_name(*g.wire(wid));
    CausalChannel staged = causal_rename(box, in_rename, out_rename);
    // identity on the open wires the box does not consume
    std::set<std::string> consumed;
    for (const auto& [wid, pname] : in_binding) consumed.insert(running_name(*g.wire(wid)));
    std::vector<Port> rest;
    for (const Port& p : output_of(acc.channel).ports())
      if (!consumed.count(p.name)) rest.push_back(p);
    CausalChannel id_rest(make_identity(Interface(rest)), CausalSpec::identity(Interface(rest)));
    acc = causal_serial(causal_parallel(staged, id_rest), acc);
  }
  return acc;
}

// Adjoins output-port/input-port pairs: the wire entering each output port
// is fused with the wire leaving the paired input port. Fails if the fused
// graph acquires a cycle or the systems differ.
struct ContractionResult {
  Stencil stencil;
  Filling filling;
  CausalChannel value;
};

inline ContractionResult contract(const Stencil& g, const Filling& f,
                                  const std::vector<std::pair<std::string, std::string>>& pairs) {
  Stencil h = g;
  Filling ff = f;
  for (const auto& [out_p, in_p] : pairs) {
    if (!h.out_ports.count(out_p))
      throw std::invalid_argument("contract: unknown output port " + out_p);
    if (!h.in_ports.count(in_p)) throw std::invalid_argument("contract: unknown input port " + in_p);
    StencilWire wo, wi;
    for (const auto& w : h.wires) {
      if (w.to == out_p) wo = w;
      if (w.from == in_p) wi = w;
    }
    if (wo.id == wi.id)
      throw std::invalid_argument("contract: cycle detected (direct pass-through pair)");
    if (!(ff.wire_systems.at(wo.id) == ff.wire_systems.at(wi.id)))
      throw std::invalid_argument("contract: system mismatch at pair " + out_p + "=" + in_p);
    StencilWire merged;
    merged.id = "ctr:" + out_p + "=" + in_p;
    merged.from = wo.from;
    merged.from_port = wo.from_port;
    merged.to = wi.to;
    merged.to_port = wi.to_port;
    ff.wire_systems[merged.id] = ff.wire_systems.at(wo.id);
    std::vector<StencilWire> wires;
    for (const auto& w : h.wires)
      if (w.id != wo.id && w.id != wi.id) wires.push_back(w);
    wires.push_back(merged);
    h.wires = wires;
    h.out_ports.erase(out_p);
    h.in_ports.erase(in_p);
    ff.wire_systems.erase(wo.id);
    ff.wire_systems.erase(wi.id);
  }
  h.topological_order(); // throws on cycles
  ContractionResult r;
  r.stencil = h;
  r.filling = ff;
  r.value = evaluate_stencil(h, ff);
  return r;
}

} // namespace dilatio

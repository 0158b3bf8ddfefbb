#pragma once

// JSON serialisation of channels, dilations, stencils/fillings, strategies
// and behaviours. Doubles round-trip bit-exactly (shortest-representation
// printing); complex entries are [re, im] pairs.

#include <fstream>

#include <nlohmann/json.hpp>

#include "dilatio/behaviour.hpp"
#include "dilatio/dilation.hpp"
#include "dilatio/selftest.hpp"
#include "dilatio/stencil.hpp"

namespace dilatio {

using Json = nlohmann::json;

inline Json to_json(const CMatrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      row.push_back(Json::array({m(i, j).real(), m(i, j).imag()}));
    rows.push_back(row);
  }
  return rows;
}

inline Json to_json(const RMatrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

inline CMatrix cmatrix_from_json(const Json& j) {
  const auto rows = j.size();
  if (rows == 0) return CMatrix(0, 0);
  const auto cols = j.at(0).size();
  CMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (size_t i = 0; i < rows; ++i)
    for (size_t c = 0; c < cols; ++c) {
      const Json& e = j.at(i).at(c);
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          Complex(e.at(0).get<double>(), e.at(1).get<double>());
    }
  return m;
}

inline RMatrix rmatrix_from_json(const Json& j) {
  const auto rows = j.size();
  if (rows == 0) return RMatrix(0, 0);
  const auto cols = j.at(0).size();
  RMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (size_t i = 0; i < rows; ++i)
    for (size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = j.at(i).at(c).get<double>();
  return m;
}

inline Json to_json(const Interface& iface) {
  Json ports = Json::array();
  for (const Port& p : iface.ports())
    ports.push_back(Json{{"name", p.name},
                         {"dim", p.dim},
                         {"kind", p.kind == Kind::classical ? "classical" : "quantum"}});
  return ports;
}

inline std::vector<Port> ports_from_json(const Json& j) {
  std::vector<Port> ports;
  for (const auto& e : j) {
    Port p;
    p.name = e.at("name").get<std::string>();
    p.dim = e.at("dim").get<int>();
    const std::string kind = e.at("kind").get<std::string>();
    if (kind == "classical") p.kind = Kind::classical;
    else if (kind == "quantum") p.kind = Kind::quantum;
    else throw std::invalid_argument("ports_from_json: unknown kind '" + kind + "'");
    ports.push_back(p);
  }
  return ports;
}

inline Json to_json(const Channel& c) {
  Json j;
  j["input"] = to_json(input_of(c));
  j["output"] = to_json(output_of(c));
  if (is_classical(c)) {
    j["kind"] = "classical";
    j["data"] = to_json(std::get<ClassicalChannel>(c).table());
  } else {
    j["kind"] = "quantum";
    j["data"] = to_json(std::get<QuantumChannel>(c).choi());
  }
  return j;
}

inline Channel channel_from_json(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  auto in = ports_from_json(j.at("input"));
  auto out = ports_from_json(j.at("output"));
  if (kind == "classical")
    return ClassicalChannel::from_table(out, in, rmatrix_from_json(j.at("data")));
  if (kind == "quantum")
    return QuantumChannel::from_choi(out, in, cmatrix_from_json(j.at("data")));
  throw std::invalid_argument("channel_from_json: unknown kind '" + kind + "'");
}

inline Json to_json(const Dilation& d) {
  Json j;
  j["base"] = to_json(d.base);
  j["total"] = to_json(d.total);
  j["hiddenIn"] = Json(d.hidden_in);
  j["hiddenOut"] = Json(d.hidden_out);
  return j;
}

inline Dilation dilation_from_json(const Json& j) {
  Dilation d;
  d.base = channel_from_json(j.at("base"));
  d.total = channel_from_json(j.at("total"));
  for (const auto& n : j.at("hiddenIn")) d.hidden_in.insert(n.get<std::string>());
  for (const auto& n : j.at("hiddenOut")) d.hidden_out.insert(n.get<std::string>());
  return d;
}

inline Json to_json(const CausalSpec& s) {
  Json j = Json::object();
  for (const auto& [y, xs] : s.causes()) j[y] = Json(xs);
  return j;
}

inline CausalSpec causal_spec_from_json(const Json& j) {
  std::map<std::string, std::set<std::string>> causes;
  for (auto it = j.begin(); it != j.end(); ++it) {
    std::set<std::string> xs;
    for (const auto& x : it.value()) xs.insert(x.get<std::string>());
    causes[it.key()] = xs;
  }
  return CausalSpec(causes);
}

// Stencil schema: vertices carry {"id","kind":"box|port"}; wires carry
// {"from","to","dim","kind"} with endpoints optionally qualified as
// "vertex:port" to bind a named box port, and an optional "id".  "win" and
// "wout" list the input/output port-vertex ids.
inline Json to_json(const Stencil& g, const Filling& f) {
  Json j;
  Json vertices = Json::array();
  for (const auto& b : g.boxes) vertices.push_back(Json{{"id", b}, {"kind", "box"}});
  for (const auto& p : g.in_ports) vertices.push_back(Json{{"id", p}, {"kind", "port"}});
  for (const auto& p : g.out_ports) vertices.push_back(Json{{"id", p}, {"kind", "port"}});
  j["vertices"] = vertices;
  Json wires = Json::array();
  for (const auto& w : g.wires) {
    const WireSystem& sys = f.wire_systems.at(w.id);
    Json wj;
    wj["id"] = w.id;
    wj["from"] = w.from_port.empty() ? w.from : w.from + ":" + w.from_port;
    wj["to"] = w.to_port.empty() ? w.to : w.to + ":" + w.to_port;
    wj["dim"] = sys.dim;
    wj["kind"] = sys.kind == Kind::classical ? "classical" : "quantum";
    wires.push_back(wj);
  }
  j["wires"] = wires;
  j["win"] = Json(g.in_ports);
  j["wout"] = Json(g.out_ports);
  return j;
}

inline std::pair<Stencil, Filling> stencil_from_json(const Json& j) {
  Stencil g;
  Filling f;
  std::set<std::string> ports;
  for (const auto& v : j.at("vertices")) {
    const std::string id = v.at("id").get<std::string>();
    const std::string kind = v.at("kind").get<std::string>();
    if (kind == "box") g.boxes.insert(id);
    else if (kind == "port") ports.insert(id);
    else throw std::invalid_argument("stencil_from_json: unknown vertex kind");
  }
  for (const auto& p : j.at("win")) g.in_ports.insert(p.get<std::string>());
  for (const auto& p : j.at("wout")) g.out_ports.insert(p.get<std::string>());
  for (const auto& p : g.in_ports)
    if (!ports.count(p)) throw std::invalid_argument("stencil_from_json: win references non-port " + p);
  for (const auto& p : g.out_ports)
    if (!ports.count(p)) throw std::invalid_argument("stencil_from_json: wout references non-port " + p);
  int k = 0;
  for (const auto& wj : j.at("wires")) {
    StencilWire w;
    auto split = [](const std::string& s) -> std::pair<std::string, std::string> {
      auto pos = s.find(':');
      if (pos == std::string::npos) return {s, ""};
      return {s.substr(0, pos), s.substr(pos + 1)};
    };
    std::tie(w.from, w.from_port) = split(wj.at("from").get<std::string>());
    std::tie(w.to, w.to_port) = split(wj.at("to").get<std::string>());
    w.id = wj.contains("id") ? wj.at("id").get<std::string>() : ("w" + std::to_string(k));
    ++k;
    g.wires.push_back(w);
    WireSystem sys;
    sys.dim = wj.at("dim").get<int>();
    sys.kind = wj.at("kind").get<std::string>() == "classical" ? Kind::classical : Kind::quantum;
    f.wire_systems[w.id] = sys;
  }
  return {g, f};
}

// Filling JSON: {"boxes": {boxId: channel-file-path | inline channel},
// "specs": {boxId: spec}}; boxes without a spec get the primitive one.
inline void filling_from_json(const Json& j, Filling& f, const std::string& base_dir = "") {
  for (auto it = j.at("boxes").begin(); it != j.at("boxes").end(); ++it) {
    Channel c = [&] {
      if (it.value().is_string()) {
        std::string path = it.value().get<std::string>();
        if (!base_dir.empty() && !path.empty() && path[0] != '/') path = base_dir + "/" + path;
        std::ifstream in(path);
        if (!in) throw std::invalid_argument("filling_from_json: cannot open " + path);
        Json cj;
        in >> cj;
        return channel_from_json(cj);
      }
      return channel_from_json(it.value());
    }();
    CausalSpec spec = CausalSpec::primitive(input_of(c), output_of(c));
    if (j.contains("specs") && j.at("specs").contains(it.key()))
      spec = causal_spec_from_json(j.at("specs").at(it.key()));
    f.box_channels[it.key()] = CausalChannel(c, spec);
  }
}

inline Json to_json(const Strategy& s) {
  Json j;
  j["state"] = to_json(s.state);
  j["dims"] = Json::array({s.da, s.db});
  Json pa = Json::object(), pb = Json::object();
  for (size_t x = 0; x < s.pvms_a.size(); ++x) {
    Json fam = Json::array();
    for (const auto& p : s.pvms_a[x]) fam.push_back(to_json(p));
    pa[std::to_string(x)] = fam;
  }
  for (size_t x = 0; x < s.pvms_b.size(); ++x) {
    Json fam = Json::array();
    for (const auto& p : s.pvms_b[x]) fam.push_back(to_json(p));
    pb[std::to_string(x)] = fam;
  }
  j["pvms"] = Json{{"A", pa}, {"B", pb}};
  return j;
}

inline Strategy strategy_from_json(const Json& j) {
  Strategy s;
  s.state = cmatrix_from_json(j.at("state"));
  s.da = j.at("dims").at(0).get<int>();
  s.db = j.at("dims").at(1).get<int>();
  auto read_site = [](const Json& site) {
    std::vector<std::vector<CMatrix>> pvms(site.size());
    for (auto it = site.begin(); it != site.end(); ++it) {
      size_t x = std::stoul(it.key());
      if (x >= pvms.size()) throw std::invalid_argument("strategy_from_json: input keys not contiguous");
      std::vector<CMatrix> fam;
      for (const auto& p : it.value()) fam.push_back(cmatrix_from_json(p));
      pvms[x] = fam;
    }
    return pvms;
  };
  s.pvms_a = read_site(j.at("pvms").at("A"));
  s.pvms_b = read_site(j.at("pvms").at("B"));
  return s;
}

inline Json to_json(const Behaviour& b) {
  Json j;
  j["scenario"] = Json{{"xA", b.sc.nxa}, {"xB", b.sc.nxb}, {"yA", b.sc.nya}, {"yB", b.sc.nyb}};
  j["table"] = to_json(b.p);
  return j;
}

inline Behaviour behaviour_from_json(const Json& j) {
  Behaviour b;
  b.sc.nxa = j.at("scenario").at("xA").get<int>();
  b.sc.nxb = j.at("scenario").at("xB").get<int>();
  b.sc.nya = j.at("scenario").at("yA").get<int>();
  b.sc.nyb = j.at("scenario").at("yB").get<int>();
  b.p = rmatrix_from_json(j.at("table"));
  return b;
}

inline Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  Json j;
  in >> j;
  return j;
}

inline void save_json(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write " + path);
  out << j.dump(1) << "\n";
}

} // namespace dilatio

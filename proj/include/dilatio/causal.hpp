#pragma once

// Causal specifications and causal channels: additive cause-set maps over
// named ports, per-output-port non-signalling compatibility, serial and
// parallel composition of specs, causal dilations and acausal ports.

#include "dilatio/channel.hpp"

namespace dilatio {

// Additive map output-port -> set of input-port causes; stored on singletons,
// set queries take unions.
class CausalSpec {
 public:
  CausalSpec() = default;
  explicit CausalSpec(std::map<std::string, std::set<std::string>> causes)
      : causes_(std::move(causes)) {}

  static CausalSpec primitive(const Interface& in, const Interface& out) {
    std::map<std::string, std::set<std::string>> c;
    for (const Port& y : out.ports()) c[y.name] = in.names();
    return CausalSpec(std::move(c));
  }

  static CausalSpec identity(const Interface& io) {
    std::map<std::string, std::set<std::string>> c;
    for (const Port& y : io.ports()) c[y.name] = {y.name};
    return CausalSpec(std::move(c));
  }

  const std::set<std::string>& of(const std::string& out_port) const {
    auto it = causes_.find(out_port);
    if (it == causes_.end())
      throw std::invalid_argument("CausalSpec: unknown output port '" + out_port + "'");
    return it->second;
  }

  std::set<std::string> of(const std::set<std::string>& out_ports) const {
    std::set<std::string> u;
    for (const auto& y : out_ports) {
      const auto& c = of(y);
      u.insert(c.begin(), c.end());
    }
    return u;
  }

  const std::map<std::string, std::set<std::string>>& causes() const { return causes_; }

  void set(const std::string& out_port, std::set<std::string> c) {
    causes_[out_port] = std::move(c);
  }

  CausalSpec restricted_to(const std::set<std::string>& out_ports) const {
    std::map<std::string, std::set<std::string>> c;
    for (const auto& y : out_ports) c[y] = of(y);
    return CausalSpec(std::move(c));
  }

  CausalSpec renamed(const std::map<std::string, std::string>& in_names,
                     const std::map<std::string, std::string>& out_names) const {
    auto rn = [](const std::map<std::string, std::string>& m, const std::string& n) {
      auto it = m.find(n);
      return it == m.end() ? n : it->second;
    };
    std::map<std::string, std::set<std::string>> c;
    for (const auto& [y, xs] : causes_) {
      std::set<std::string> r;
      for (const auto& x : xs) r.insert(rn(in_names, x));
      c[rn(out_names, y)] = std::move(r);
    }
    return CausalSpec(std::move(c));
  }

  CausalSpec renamed(const std::map<std::string, std::string>& names) const {
    return renamed(names, names);
  }

  bool operator==(const CausalSpec& o) const { return causes_ == o.causes_; }

 private:
  std::map<std::string, std::set<std::string>> causes_;
};

struct CausalChannel {
  Channel channel;
  CausalSpec spec;

  CausalChannel() = default;
  CausalChannel(Channel c, CausalSpec s) : channel(std::move(c)), spec(std::move(s)) {}
};

struct CausalDiagnostics {
  bool pass = false;
  std::map<std::string, double> port_residuals; // per-output-port NS residual
  double worst = 0;
};

// Compatibility: for each output port y the channel must be non-signalling
// from inputs outside causes(y) to {y}.  Checking singletons suffices in CIT
// and QIT (states exist on every system); full-subset auditing available.
inline CausalDiagnostics validate_causal(const CausalChannel& cc, double tol = 1e-8,
                                         bool all_subsets = false) {
  CausalDiagnostics d;
  const Interface& in = input_of(cc.channel);
  const Interface& out = output_of(cc.channel);
  d.pass = true;
  for (const Port& y : out.ports()) {
    std::set<std::string> from;
    for (const Port& x : in.ports())
      if (!cc.spec.of(y.name).count(x.name)) from.insert(x.name);
    auto r = is_nonsignalling(cc.channel, from, {y.name}, tol);
    d.port_residuals[y.name] = r.residual;
    d.worst = std::max(d.worst, r.residual);
    if (!r.nonsignalling) d.pass = false;
  }
  if (all_subsets) {
    const auto& ports = out.ports();
    const int n = static_cast<int>(ports.size());
    for (int mask = 1; mask < (1 << n); ++mask) {
      std::set<std::string> ys;
      for (int k = 0; k < n; ++k)
        if (mask & (1 << k)) ys.insert(ports[static_cast<size_t>(k)].name);
      std::set<std::string> causes = cc.spec.of(ys), from;
      for (const Port& x : in.ports())
        if (!causes.count(x.name)) from.insert(x.name);
      auto r = is_nonsignalling(cc.channel, from, ys, tol);
      d.worst = std::max(d.worst, r.residual);
      if (!r.nonsignalling) d.pass = false;
    }
  }
  return d;
}

// (D o C)(J) = C(D(J)): causes propagate through the middle interface.
inline CausalChannel causal_serial(const CausalChannel& b, const CausalChannel& a) {
  CausalChannel out;
  out.channel = serial(b.channel, a.channel);
  std::map<std::string, std::set<std::string>> c;
  for (const Port& z : output_of(b.channel).ports()) c[z.name] = a.spec.of(b.spec.of(z.name));
  out.spec = CausalSpec(std::move(c));
  return out;
}

inline CausalChannel causal_parallel(const CausalChannel& a, const CausalChannel& b) {
  CausalChannel out;
  out.channel = parallel(a.channel, b.channel);
  std::map<std::string, std::set<std::string>> c = a.spec.causes();
  for (const auto& [y, xs] : b.spec.causes()) c[y] = xs;
  out.spec = CausalSpec(std::move(c));
  return out;
}

inline CausalChannel causal_rename(const CausalChannel& cc,
                                   const std::map<std::string, std::string>& in_names,
                                   const std::map<std::string, std::string>& out_names) {
  return CausalChannel(rename_ports(cc.channel, in_names, out_names),
                       cc.spec.renamed(in_names, out_names));
}

inline CausalChannel causal_rename(const CausalChannel& cc,
                                   const std::map<std::string, std::string>& names) {
  return causal_rename(cc, names, names);
}

// ---------------------------------------------------------------------------
// Causal dilations

struct CausalDilationCheck {
  bool ok = false;
  bool channel_ok = false; // channel-level dilation condition
  bool spec_ok = false;    // visible causes equal the base spec exactly
  double residual = 0;
};

inline CausalDilationCheck is_causal_dilation(const CausalChannel& cd, const CausalChannel& base,
                                              const std::set<std::string>& hidden_in,
                                              const std::set<std::string>& hidden_out,
                                              double tol = 1e-8) {
  CausalDilationCheck r;
  std::set<std::string> visible;
  for (const Port& p : output_of(cd.channel).ports())
    if (!hidden_out.count(p.name)) visible.insert(p.name);
  Channel lhs = marginal(cd.channel, visible);
  Channel rhs = base.channel;
  if (!hidden_in.empty())
    rhs = parallel(rhs, make_trash(input_of(cd.channel).sub(hidden_in)));
  r.residual = channel_dist(lhs, rhs);
  r.channel_ok = r.residual <= tol;
  r.spec_ok = true;
  for (const auto& y : visible)
    if (cd.spec.of(y) != base.spec.of(y)) r.spec_ok = false;
  r.ok = r.channel_ok && r.spec_ok;
  return r;
}

struct CausalDilation {
  CausalChannel cc;
  CausalChannel base;
  std::set<std::string> hidden_in, hidden_out;

  std::set<std::string> visible_in() const {
    std::set<std::string> v;
    for (const Port& p : input_of(cc.channel).ports())
      if (!hidden_in.count(p.name)) v.insert(p.name);
    return v;
  }
  std::set<std::string> visible_out() const {
    std::set<std::string> v;
    for (const Port& p : output_of(cc.channel).ports())
      if (!hidden_out.count(p.name)) v.insert(p.name);
    return v;
  }
};

inline CausalDilationCheck is_causal_dilation(const CausalDilation& d, double tol = 1e-8) {
  return is_causal_dilation(d.cc, d.base, d.hidden_in, d.hidden_out, tol);
}

// Hidden output ports whose cause sets avoid every visible input.
inline std::set<std::string> acausal_ports(const CausalChannel& cd,
                                           const std::set<std::string>& hidden_in,
                                           const std::set<std::string>& hidden_out) {
  std::set<std::string> visible_in;
  for (const Port& p : input_of(cd.channel).ports())
    if (!hidden_in.count(p.name)) visible_in.insert(p.name);
  std::set<std::string> out;
  for (const auto& e : hidden_out) {
    bool acausal = true;
    for (const auto& x : cd.spec.of(e))
      if (visible_in.count(x)) acausal = false;
    if (acausal) out.insert(e);
  }
  return out;
}

} // namespace dilatio

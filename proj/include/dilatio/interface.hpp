#pragma once

// Named-port interfaces. Ports are held in canonical (lexicographic) order;
// the matrix layout of every channel follows that order, so port alignment
// during composition reduces to factor permutations.

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "dilatio/tensor.hpp"

namespace dilatio {

enum class Kind { classical, quantum };

struct Port {
  std::string name;
  int dim = 1;
  Kind kind = Kind::quantum;

  bool operator==(const Port& o) const {
    return name == o.name && dim == o.dim && kind == o.kind;
  }
};

class Interface {
 public:
  Interface() = default;
  explicit Interface(std::vector<Port> ports) : ports_(std::move(ports)) {
    std::sort(ports_.begin(), ports_.end(),
              [](const Port& a, const Port& b) { return a.name < b.name; });
    for (size_t i = 0; i + 1 < ports_.size(); ++i)
      if (ports_[i].name == ports_[i + 1].name)
        throw std::invalid_argument("Interface: duplicate port name '" + ports_[i].name + "'");
    for (const Port& p : ports_)
      if (p.dim < 1) throw std::invalid_argument("Interface: port dim must be >= 1");
  }

  static Interface single(const std::string& name, int dim, Kind kind) {
    return Interface({Port{name, dim, kind}});
  }

  int size() const { return static_cast<int>(ports_.size()); }
  bool empty() const { return ports_.empty(); }
  const Port& port(int i) const { return ports_[static_cast<size_t>(i)]; }
  const std::vector<Port>& ports() const { return ports_; }

  int total_dim() const {
    int d = 1;
    for (const Port& p : ports_) d *= p.dim;
    return d;
  }

  std::vector<int> dims() const {
    std::vector<int> d;
    for (const Port& p : ports_) d.push_back(p.dim);
    return d;
  }

  bool all_classical() const {
    for (const Port& p : ports_)
      if (p.kind != Kind::classical) return false;
    return true;
  }

  bool has(const std::string& name) const { return find(name) != nullptr; }

  const Port* find(const std::string& name) const {
    for (const Port& p : ports_)
      if (p.name == name) return &p;
    return nullptr;
  }

  int index_of(const std::string& name) const {
    for (int i = 0; i < size(); ++i)
      if (ports_[static_cast<size_t>(i)].name == name) return i;
    throw std::invalid_argument("Interface: unknown port '" + name + "'");
  }

  std::set<std::string> names() const {
    std::set<std::string> s;
    for (const Port& p : ports_) s.insert(p.name);
    return s;
  }

  Interface sub(const std::set<std::string>& keep) const {
    std::vector<Port> ps;
    for (const Port& p : ports_)
      if (keep.count(p.name)) ps.push_back(p);
    if (ps.size() != keep.size())
      throw std::invalid_argument("Interface::sub: unknown port in selection");
    return Interface(ps);
  }

  Interface complement(const std::set<std::string>& drop) const {
    std::vector<Port> ps;
    for (const Port& p : ports_)
      if (!drop.count(p.name)) ps.push_back(p);
    return Interface(ps);
  }

  static Interface disjoint_union(const Interface& a, const Interface& b) {
    std::vector<Port> ps = a.ports_;
    for (const Port& p : b.ports_) {
      if (a.has(p.name))
        throw std::invalid_argument("Interface: port name clash '" + p.name + "'");
      ps.push_back(p);
    }
    return Interface(ps);
  }

  bool operator==(const Interface& o) const { return ports_ == o.ports_; }
  bool operator!=(const Interface& o) const { return !(*this == o); }

  // Matches names and dims but ignores the classical/quantum flags.
  bool same_shape(const Interface& o) const {
    if (size() != o.size()) return false;
    for (int i = 0; i < size(); ++i)
      if (ports_[static_cast<size_t>(i)].name != o.ports_[static_cast<size_t>(i)].name ||
          ports_[static_cast<size_t>(i)].dim != o.ports_[static_cast<size_t>(i)].dim)
        return false;
    return true;
  }

 private:
  std::vector<Port> ports_;
};

// Permutation taking the user-supplied `layout` order to canonical order:
// perm[k] = position in layout of the k-th canonically sorted port.
inline std::vector<int> canonical_permutation(const std::vector<Port>& layout) {
  std::vector<int> idx(layout.size());
  for (size_t i = 0; i < layout.size(); ++i) idx[i] = static_cast<int>(i);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    return layout[static_cast<size_t>(a)].name < layout[static_cast<size_t>(b)].name;
  });
  return idx;
}

inline std::vector<int> port_dims(const std::vector<Port>& ports) {
  std::vector<int> d;
  for (const Port& p : ports) d.push_back(p.dim);
  return d;
}

} // namespace dilatio

#pragma once

// Bell-scenario behaviours: conditional tables P^x(y) with per-site input
// and output alphabets, normalisation/non-signalling diagnostics and the
// CHSH functional (double and exact-rational variants).

#include <numeric>

#include "dilatio/channel.hpp"

namespace dilatio {

struct BellScenario {
  int nxa = 2, nxb = 2, nya = 2, nyb = 2;
};

struct Behaviour {
  BellScenario sc;
  RMatrix p; // rows (ya, yb), cols (xa, xb)

  double normalization_residual() const {
    double worst = 0;
    for (int x = 0; x < p.cols(); ++x) worst = std::max(worst, std::abs(p.col(x).sum() - 1.0));
    return std::max(worst, std::max(0.0, -p.minCoeff()));
  }

  // max deviation of the A-marginal from xb-independence and vice versa
  double ns_residual() const {
    double worst = 0;
    for (int xa = 0; xa < sc.nxa; ++xa)
      for (int ya = 0; ya < sc.nya; ++ya) {
        double ref = 0;
        for (int yb = 0; yb < sc.nyb; ++yb) ref += p(ya * sc.nyb + yb, xa * sc.nxb + 0);
        for (int xb = 1; xb < sc.nxb; ++xb) {
          double v = 0;
          for (int yb = 0; yb < sc.nyb; ++yb) v += p(ya * sc.nyb + yb, xa * sc.nxb + xb);
          worst = std::max(worst, std::abs(v - ref));
        }
      }
    for (int xb = 0; xb < sc.nxb; ++xb)
      for (int yb = 0; yb < sc.nyb; ++yb) {
        double ref = 0;
        for (int ya = 0; ya < sc.nya; ++ya) ref += p(ya * sc.nyb + yb, 0 * sc.nxb + xb);
        for (int xa = 1; xa < sc.nxa; ++xa) {
          double v = 0;
          for (int ya = 0; ya < sc.nya; ++ya) v += p(ya * sc.nyb + yb, xa * sc.nxb + xb);
          worst = std::max(worst, std::abs(v - ref));
        }
      }
    return worst;
  }

  bool valid(double norm_tol = 1e-10, double ns_tol = 1e-8) const {
    return normalization_residual() <= norm_tol && ns_residual() <= ns_tol;
  }

  ClassicalChannel as_channel() const {
    return ClassicalChannel::from_table(
        {Port{"yA", sc.nya, Kind::classical}, Port{"yB", sc.nyb, Kind::classical}},
        {Port{"xA", sc.nxa, Kind::classical}, Port{"xB", sc.nxb, Kind::classical}}, p);
  }

  static Behaviour from_channel(const ClassicalChannel& c) {
    Behaviour b;
    if (c.input().size() != 2 || c.output().size() != 2)
      throw std::invalid_argument("Behaviour: need two input and two output ports");
    b.sc.nxa = c.input().port(0).dim;
    b.sc.nxb = c.input().port(1).dim;
    b.sc.nya = c.output().port(0).dim;
    b.sc.nyb = c.output().port(1).dim;
    b.p = c.table();
    return b;
  }
};

// CHSH with outcomes mapped 0 -> +1, 1 -> -1:
// sum_x (-1)^{xa xb} E_x, E_x = sum_y ya yb P^x(y).
inline double classical_chsh(const Behaviour& b) {
  if (b.sc.nxa != 2 || b.sc.nxb != 2 || b.sc.nya != 2 || b.sc.nyb != 2)
    throw std::invalid_argument("classical_chsh: 2x2x2x2 scenario required");
  double total = 0;
  for (int xa = 0; xa < 2; ++xa)
    for (int xb = 0; xb < 2; ++xb) {
      double e = 0;
      for (int ya = 0; ya < 2; ++ya)
        for (int yb = 0; yb < 2; ++yb)
          e += (ya ? -1.0 : 1.0) * (yb ? -1.0 : 1.0) * b.p(ya * 2 + yb, xa * 2 + xb);
      total += ((xa & xb) ? -1.0 : 1.0) * e;
    }
  return total;
}

// Exact arithmetic for tables with small rational entries.
struct Rational {
  long long num = 0;
  long long den = 1;

  Rational() = default;
  Rational(long long n, long long d = 1) : num(n), den(d) { reduce(); }

  void reduce() {
    if (den < 0) { num = -num; den = -den; }
    long long g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) { num /= g; den /= g; }
    if (num == 0) den = 1;
  }

  Rational operator+(const Rational& o) const { return Rational(num * o.den + o.num * den, den * o.den); }
  Rational operator-(const Rational& o) const { return Rational(num * o.den - o.num * den, den * o.den); }
  Rational operator*(const Rational& o) const { return Rational(num * o.num, den * o.den); }
  bool operator==(const Rational& o) const { return num == o.num && den == o.den; }
};

inline Rational classical_chsh_exact(const std::vector<std::vector<Rational>>& table) {
  // table[y][x] with y = ya*2 + yb, x = xa*2 + xb
  if (table.size() != 4) throw std::invalid_argument("classical_chsh_exact: 4x4 table required");
  Rational total(0);
  for (int xa = 0; xa < 2; ++xa)
    for (int xb = 0; xb < 2; ++xb) {
      Rational e(0);
      for (int ya = 0; ya < 2; ++ya)
        for (int yb = 0; yb < 2; ++yb) {
          long long sign = ((ya ? -1 : 1) * (yb ? -1 : 1));
          e = e + Rational(sign) * table[static_cast<size_t>(ya * 2 + yb)][static_cast<size_t>(xa * 2 + xb)];
        }
      total = total + Rational((xa & xb) ? -1 : 1) * e;
    }
  return total;
}

} // namespace dilatio

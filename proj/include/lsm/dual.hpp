#pragma once

#include <cmath>

namespace lsm {

/// Forward-mode dual number carrying one directional derivative.
struct Dual
{
  double v = 0.0;
  double d = 0.0;

  constexpr Dual() = default;
  constexpr Dual(double value, double deriv = 0.0)
    : v{value}
    , d{deriv}
  {
  }

  static constexpr auto Variable(double value) -> Dual { return {value, 1.0}; }

  constexpr auto operator+=(Dual const &o) -> Dual &
  {
    v += o.v;
    d += o.d;
    return *this;
  }
  constexpr auto operator-=(Dual const &o) -> Dual &
  {
    v -= o.v;
    d -= o.d;
    return *this;
  }
  constexpr auto operator*=(Dual const &o) -> Dual &
  {
    d = d * o.v + v * o.d;
    v *= o.v;
    return *this;
  }
  constexpr auto operator*=(double s) -> Dual &
  {
    v *= s;
    d *= s;
    return *this;
  }
};

constexpr auto operator-(Dual const &a) -> Dual { return {-a.v, -a.d}; }
constexpr auto operator+(Dual a, Dual const &b) -> Dual { return a += b; }
constexpr auto operator-(Dual a, Dual const &b) -> Dual { return a -= b; }
constexpr auto operator*(Dual a, Dual const &b) -> Dual { return a *= b; }
constexpr auto operator*(Dual a, double s) -> Dual { return a *= s; }
constexpr auto operator*(double s, Dual a) -> Dual { return a *= s; }
constexpr auto operator+(Dual a, double s) -> Dual { return {a.v + s, a.d}; }
constexpr auto operator+(double s, Dual a) -> Dual { return {a.v + s, a.d}; }
constexpr auto operator-(Dual a, double s) -> Dual { return {a.v - s, a.d}; }
constexpr auto operator-(double s, Dual a) -> Dual { return {s - a.v, -a.d}; }
constexpr auto operator/(Dual const &a, Dual const &b) -> Dual
{
  return {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)};
}
constexpr auto operator/(double s, Dual const &b) -> Dual { return {s / b.v, -s * b.d / (b.v * b.v)}; }
constexpr auto operator/(Dual const &a, double s) -> Dual { return {a.v / s, a.d / s}; }

inline auto exp(Dual const &a) -> Dual
{
  double const e = std::exp(a.v);
  return {e, e * a.d};
}

// The derivative of sqrt at 0 is taken as 0 so that an all-zero echo (no
// refocusing) has a finite derivative.
inline auto sqrt(Dual const &a) -> Dual
{
  double const s = std::sqrt(a.v);
  return {s, s > 0.0 ? a.d / (2.0 * s) : 0.0};
}

inline auto Value(double x) -> double { return x; }
inline auto Value(Dual const &x) -> double { return x.v; }

} // namespace lsm

#pragma once

#include <cmath>

namespace cxrprior {

// Forward-mode dual number: value plus derivative along one direction.
struct Dual {
  double value = 0.0;
  double deriv = 0.0;

  constexpr Dual() = default;
  constexpr Dual(double v, double d = 0.0) : value(v), deriv(d) {}

  Dual& operator+=(const Dual& o) {
    value += o.value;
    deriv += o.deriv;
    return *this;
  }
};

inline Dual operator+(Dual a, Dual b) { return {a.value + b.value, a.deriv + b.deriv}; }
inline Dual operator-(Dual a, Dual b) { return {a.value - b.value, a.deriv - b.deriv}; }
inline Dual operator-(Dual a) { return {-a.value, -a.deriv}; }
inline Dual operator*(Dual a, Dual b) {
  return {a.value * b.value, a.deriv * b.value + a.value * b.deriv};
}
inline Dual operator/(Dual a, Dual b) {
  return {a.value / b.value, (a.deriv * b.value - a.value * b.deriv) / (b.value * b.value)};
}
inline Dual exp(Dual a) {
  const double e = std::exp(a.value);
  return {e, e * a.deriv};
}
inline Dual tanh(Dual a) {
  const double t = std::tanh(a.value);
  return {t, (1.0 - t * t) * a.deriv};
}

inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.value; }

}  // namespace cxrprior

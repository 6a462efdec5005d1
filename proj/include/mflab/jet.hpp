#pragma once

#include <array>
#include <cmath>

namespace mflab {

// Truncated Taylor series c0 + c1 e + c2 e^2 + c3 e^3.
struct Jet {
  std::array<double, 4> c{0.0, 0.0, 0.0, 0.0};

  static Jet constant(double v) { return Jet{{v, 0.0, 0.0, 0.0}}; }
  static Jet variable(double v) { return Jet{{v, 1.0, 0.0, 0.0}}; }
  double value() const { return c[0]; }
  // k-th derivative.
  double derivative(int k) const {
    static constexpr double fact[4] = {1.0, 1.0, 2.0, 6.0};
    return c[k] * fact[k];
  }
  Jet abs_coeffs() const {
    Jet r;
    for (int i = 0; i < 4; ++i) r.c[i] = std::fabs(c[i]);
    return r;
  }
};

inline Jet operator+(const Jet& a, const Jet& b) {
  Jet r;
  for (int i = 0; i < 4; ++i) r.c[i] = a.c[i] + b.c[i];
  return r;
}
inline Jet operator-(const Jet& a, const Jet& b) {
  Jet r;
  for (int i = 0; i < 4; ++i) r.c[i] = a.c[i] - b.c[i];
  return r;
}
inline Jet operator*(double s, const Jet& a) {
  Jet r;
  for (int i = 0; i < 4; ++i) r.c[i] = s * a.c[i];
  return r;
}
inline Jet operator*(const Jet& a, const Jet& b) {
  Jet r;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; i + j < 4; ++j) r.c[i + j] += a.c[i] * b.c[j];
  return r;
}
inline Jet reciprocal(const Jet& a) {
  Jet r;
  r.c[0] = 1.0 / a.c[0];
  for (int k = 1; k < 4; ++k) {
    double s = 0.0;
    for (int j = 1; j <= k; ++j) s += a.c[j] * r.c[k - j];
    r.c[k] = -s / a.c[0];
  }
  return r;
}
inline Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }

inline Jet jet_pow(Jet base, unsigned e) {
  Jet r = Jet::constant(1.0);
  while (e) {
    if (e & 1u) r = r * base;
    base = base * base;
    e >>= 1u;
  }
  return r;
}

}  // namespace mflab

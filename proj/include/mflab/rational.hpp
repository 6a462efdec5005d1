#pragma once

#include <gmpxx.h>

#include <string>
#include <vector>

namespace mflab {

using Rational = mpq_class;
using BigInt = mpz_class;

// Parses "3/4", "0.15", "1e-3" or an integer exactly.
Rational parse_rational(const std::string& text);

// Exact binary value of a double.
Rational rational_from_double(double v);

double to_double(const Rational& q);
std::string to_string(const Rational& q);

Rational rational_pow(const Rational& base, unsigned e);

// Dense polynomial with exact coefficients, coeffs[k] multiplies x^k.
struct RationalPoly {
  std::vector<Rational> coeffs;

  int degree() const { return static_cast<int>(coeffs.size()) - 1; }
  Rational eval(const Rational& x) const;
  double eval(double x) const;
  RationalPoly derivative() const;
  void trim();
};

RationalPoly operator+(const RationalPoly& a, const RationalPoly& b);
RationalPoly operator-(const RationalPoly& a, const RationalPoly& b);
RationalPoly operator*(const RationalPoly& a, const RationalPoly& b);
RationalPoly scale(const RationalPoly& a, const Rational& s);
// Keeps terms of degree <= n.
RationalPoly truncate(const RationalPoly& a, int n);

}  // namespace mflab

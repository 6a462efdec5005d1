#include "mflab/rational.hpp"

#include <cmath>
#include <stdexcept>

namespace mflab {

Rational parse_rational(const std::string& text) {
  std::string s;
  for (char c : text)
    if (c != ' ') s.push_back(c);
  if (s.empty()) throw std::invalid_argument("empty rational");
  auto slash = s.find('/');
  if (slash != std::string::npos) {
    Rational q(BigInt(s.substr(0, slash)), BigInt(s.substr(slash + 1)));
    q.canonicalize();
    return q;
  }
  long exp10 = 0;
  auto e = s.find_first_of("eE");
  if (e != std::string::npos) {
    exp10 = std::stol(s.substr(e + 1));
    s = s.substr(0, e);
  }
  bool neg = false;
  if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
    neg = s[0] == '-';
    s = s.substr(1);
  }
  std::string digits;
  long frac = 0;
  bool seen_dot = false;
  for (char c : s) {
    if (c == '.') {
      if (seen_dot) throw std::invalid_argument("bad rational: " + text);
      seen_dot = true;
    } else if (c >= '0' && c <= '9') {
      digits.push_back(c);
      if (seen_dot) ++frac;
    } else {
      throw std::invalid_argument("bad rational: " + text);
    }
  }
  if (digits.empty()) throw std::invalid_argument("bad rational: " + text);
  BigInt num(digits);
  long shift = exp10 - frac;
  BigInt p10;
  mpz_ui_pow_ui(p10.get_mpz_t(), 10, static_cast<unsigned long>(std::labs(shift)));
  Rational q = shift >= 0 ? Rational(num * p10) : Rational(num, p10);
  q.canonicalize();
  return neg ? Rational(-q) : q;
}

Rational rational_from_double(double v) {
  if (!std::isfinite(v)) throw std::invalid_argument("non-finite value has no rational form");
  Rational q;
  mpq_set_d(q.get_mpq_t(), v);
  return q;
}

double to_double(const Rational& q) { return q.get_d(); }

std::string to_string(const Rational& q) { return q.get_str(); }

Rational rational_pow(const Rational& base, unsigned e) {
  Rational r;
  mpz_pow_ui(r.get_num_mpz_t(), base.get_num_mpz_t(), e);
  mpz_pow_ui(r.get_den_mpz_t(), base.get_den_mpz_t(), e);
  r.canonicalize();
  return r;
}

Rational RationalPoly::eval(const Rational& x) const {
  Rational acc = 0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * x + *it;
  return acc;
}

double RationalPoly::eval(double x) const {
  double acc = 0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * x + it->get_d();
  return acc;
}

RationalPoly RationalPoly::derivative() const {
  RationalPoly d;
  for (size_t k = 1; k < coeffs.size(); ++k) d.coeffs.push_back(coeffs[k] * static_cast<long>(k));
  return d;
}

void RationalPoly::trim() {
  while (!coeffs.empty() && coeffs.back() == 0) coeffs.pop_back();
}

RationalPoly operator+(const RationalPoly& a, const RationalPoly& b) {
  RationalPoly r;
  r.coeffs.resize(std::max(a.coeffs.size(), b.coeffs.size()));
  for (size_t i = 0; i < a.coeffs.size(); ++i) r.coeffs[i] += a.coeffs[i];
  for (size_t i = 0; i < b.coeffs.size(); ++i) r.coeffs[i] += b.coeffs[i];
  return r;
}

RationalPoly operator-(const RationalPoly& a, const RationalPoly& b) {
  return a + scale(b, Rational(-1));
}

RationalPoly operator*(const RationalPoly& a, const RationalPoly& b) {
  RationalPoly r;
  if (a.coeffs.empty() || b.coeffs.empty()) return r;
  r.coeffs.assign(a.coeffs.size() + b.coeffs.size() - 1, Rational(0));
  for (size_t i = 0; i < a.coeffs.size(); ++i) {
    if (a.coeffs[i] == 0) continue;
    for (size_t j = 0; j < b.coeffs.size(); ++j) r.coeffs[i + j] += a.coeffs[i] * b.coeffs[j];
  }
  return r;
}

RationalPoly scale(const RationalPoly& a, const Rational& s) {
  RationalPoly r = a;
  for (auto& c : r.coeffs) c *= s;
  return r;
}

RationalPoly truncate(const RationalPoly& a, int n) {
  RationalPoly r = a;
  if (static_cast<int>(r.coeffs.size()) > n + 1) r.coeffs.resize(n + 1);
  return r;
}

}  // namespace mflab

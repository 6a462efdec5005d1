#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mflab/kernels.hpp"
#include "mflab/rational.hpp"
#include "mflab/report.hpp"

namespace mflab {

// c_n(x) = sum over n-step walks 0 -> x of J^gamma rho(gamma), n <= N, for a
// kernel that is uniform on its support (weight w). Walk counts are kept per
// number k of coincident time pairs, so c_n(x) = w^n sum_k count * (1-lambda)^k.
struct SawSeries {
  AdmissibleKernel kernel;
  int d = 1;
  int N = 0;
  int L = 0;  // N R
  Rational lambda;
  Rational weight;
  std::uint64_t nodes = 0;
  // counts[n]: (site index on Λ_L, counts by k), sorted by site index.
  std::vector<std::vector<std::pair<std::size_t, std::vector<std::uint64_t>>>> counts;

  Rational coefficient(int n, const Point& x) const;
  Rational total(int n) const;
  std::vector<LatticeField> fields() const;  // c_n as doubles on Λ_L
  double lambda_value() const { return to_double(lambda); }
};

class CostGuardExceeded : public std::runtime_error {
 public:
  CostGuardExceeded(const std::string& what, double estimate)
      : std::runtime_error(what), estimated_nodes(estimate) {}
  double estimated_nodes;
};

double saw_cost_estimate(const AdmissibleKernel& J, const Rational& lambda, int N);

SawSeries saw_enumerate(const AdmissibleKernel& J, const Rational& lambda, int N, double max_nodes = 1e9);

LatticeField saw_eval(const SawSeries& s, double beta);
// Partial sums only: lo is the truncated value, hi = +inf.
Interval saw_chi(const SawSeries& s, double beta);
// (G * J * G)(0) from the truncated fields.
Interval saw_bubble(const SawSeries& s, double beta);

struct CriticalEstimate {
  double beta_c_lower = 0.0;  // max_n c_n^{-1/n}
  double beta_c_ratio = 0.0;  // c_{N-1} / c_N, not a bound
  int source_degree = 0;
  std::vector<double> roots;  // c_n^{1/n}
};

CriticalEstimate saw_critical(const SawSeries& s);

// Per-walk splitting is length preserving, so every monomial beta'^a beta^b
// must satisfy c_{a+b+1}(x) <= (c_a * J * c_b)(x); checked exactly, and the
// degree-matched inequality is evaluated exactly at (beta', beta).
InequalityReport saw_check_I1(const SawSeries& s, const Rational& beta_low, const Rational& beta_high);
// n c_n(x) >= sum_{a+b=n-1} (c_a*J*c_b)(x) - lambda sum_{p+q=n-1} B_p (c*c)_q(x),
// the degree-n-1 part of dG >= G*J*G - G*H*G with H = lambda B delta_0.
InequalityReport saw_check_I2(const SawSeries& s, const Rational& beta);

// c_{m+n} <= c_m c_n for m + n <= N.
InequalityReport saw_submultiplicativity(const SawSeries& s);

// Open bubble coefficients B_p = sum_{a+b=p} (c_a*J*c_b)(0), p <= N-1, exact.
std::vector<Rational> saw_open_bubble_coefficients(const SawSeries& s);

std::string saw_series_to_json(const SawSeries& s, bool exact);
SawSeries saw_series_from_json(const std::string& text);

}  // namespace mflab

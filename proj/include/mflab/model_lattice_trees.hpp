#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mflab/kernels.hpp"
#include "mflab/model_saw.hpp"  // CostGuardExceeded
#include "mflab/rational.hpp"
#include "mflab/report.hpp"

namespace mflab {

// Lattice trees with at most B bonds for a kernel uniform on its support
// (weight w). Everything is stored as integer counts by number of bonds k;
// the p-coefficient of a k-bond tree is count * w^k, so with q = w p all
// generating functions are integer polynomials in q.
//
// Two enumerators fill the tables:
//   grown: trees containing 0, built level by level with hash dedupe -> g_counts
//   rooted: trees whose lexicographically least vertex is 0, each visited once
//           (Redelmeier order) -> rho, t1, animal_counts
struct TreeSeries {
  AdmissibleKernel kernel;
  int d = 1;
  int B = 0;
  int L = 0;  // B R, radius of the site tables
  Rational weight;
  std::vector<BigInt> g_counts;       // trees containing 0 with k bonds
  std::vector<BigInt> animal_counts;  // trees rooted at their least vertex
  // Per site on Λ_L (LatticeField layout), counts by k.
  std::vector<std::vector<BigInt>> rho;  // trees containing 0 and x
  std::vector<std::vector<BigInt>> t1;   // deg_T(x) = 1 (x != 0); t1(0) = {1}
  std::uint64_t grown_nodes = 0;
  std::uint64_t rooted_nodes = 0;

  std::size_t site_index(const Point& x) const;  // throws outside Λ_L
  RationalPoly g_poly() const;                   // g_p
  RationalPoly chi_poly() const;                 // sum_x rho_p(x)
  RationalPoly beta_poly() const;                // p g_p
  RationalPoly rho_poly(const Point& x) const;
  RationalPoly two_point_poly(const Point& x) const;  // reduced T^1 two-point function
  LatticeField rho_field(double p) const;
  LatticeField two_point_field_p(double p) const;
};

double lt_cost_estimate(const AdmissibleKernel& J, int B);
TreeSeries lt_enumerate(const AdmissibleKernel& J, int B, double max_trees = 5e7);

// beta(p) = p g_p from the truncated series. Monotone (positive coefficients);
// the stored range stops at half the ratio estimate of the radius of
// convergence of chi-hat, beyond which the truncation is not trusted.
struct BetaMap {
  RationalPoly beta;
  double p_max = 0.0;
  double beta_max = 0.0;
  double p_of(double beta) const;  // throws std::domain_error outside [0, beta_max]
  double beta_of(double p) const { return beta.eval(p); }
};

BetaMap lt_beta_map(const TreeSeries& s);
LatticeField lt_two_point_beta(const TreeSeries& s, const BetaMap& m, double beta);

// d(p g_p)/dp = chi-hat(p) coefficientwise for degrees 0..B. The left side
// comes from the grown enumeration and the right side from the rooted one.
InequalityReport lt_check_dg(const TreeSeries& s);
// rho and t1 invariant under the hyperoctahedral group.
InequalityReport lt_check_symmetry(const TreeSeries& s);

// (I.1) in the p variable. Exact part: the divided difference
// (G_q - G_q')/(q - q') is dominated monomial by monomial in (q, q') by
// DD(beta) (G_q' * 1_S * G_q) up to total degree B-1. Numerical part: the
// inequality at every pair of a beta grid from the truncated series.
InequalityReport lt_check_I1(const TreeSeries& s, const std::vector<double>& beta_grid, double tol = 1e-10);
// (I.2) with the lattice-tree H. Multiplying by chi-hat turns it into
// R_x(q) = G'_q(x) - X(q) [A(x) - (G*Hq*G)(x)] >= 0 with integer
// coefficients, exact through degree B-1. The lowest nonzero coefficient of
// each R_x must be positive; the truncated R_x is also evaluated on the grid.
InequalityReport lt_check_I2(const TreeSeries& s, const std::vector<double>& beta_grid, double tol = 1e-10);
// G <= rho coefficientwise, and rho <= G (1 + max_{J_z>0} G(z))^{(2R+1)^d} on the grid.
InequalityReport lt_check_sandwich(const TreeSeries& s, const std::vector<double>& beta_grid, double tol = 1e-10);

std::vector<double> lt_beta_grid(const BetaMap& m, int n);

std::string lt_series_to_json(const TreeSeries& s);

}  // namespace mflab

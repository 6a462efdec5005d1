#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mflab/jet.hpp"
#include "mflab/kernels.hpp"
#include "mflab/report.hpp"

namespace mflab {

// C_beta = sum_n beta^n J^{*n}, truncated at order K and stored on Λ_L.
// field.tail_bound is the exact missing mass (series tail plus mass that left
// the box), so chi and xi^2 upper endpoints are exact for beta < 1.
struct GreenField {
  AdmissibleKernel kernel;
  double beta = 0.0;
  LatticeField field;
  int order = 0;
  double truncation_error = 0.0;  // series tail beta^{K+1}/(1-beta)
  bool certified = true;          // false at beta = 1
  Interval chi;
  Interval xi_sq;

  // Bound on true(x) - field(x) for x in the box (x != 0 not required).
  double pointwise_error() const;
};

// K = ceil(log(eps (1-beta)) / log beta).
int order_for_tail(double beta, double eps);

// Largest radius with (2L+1)^d <= site_budget, capped at K R.
int green_radius(const AdmissibleKernel& J, int K, std::size_t site_budget = 1500000);

// One pass over P_n = J^{*n} capped at Λ_L, accumulating every beta at once.
struct GreenLadder {
  int K = 0;
  int L = 0;
  std::vector<double> betas;
  std::vector<LatticeField> G;   // sum beta^n P_n
  std::vector<LatticeField> dG;  // sum n beta^{n-1} P_n (when requested)
  std::vector<double> series_tail;
  std::vector<double> series_tail_d;
  std::vector<double> ghost;  // mass of P_n outside Λ_L, n = 0..K
};

GreenLadder green_ladder(const AdmissibleKernel& J, const std::vector<double>& betas, int K, int L,
                         bool derivative);
// Derivative fields only where mask[b] != 0 (others left on Λ_0).
GreenLadder green_ladder(const AdmissibleKernel& J, const std::vector<double>& betas, int K, int L,
                         const std::vector<char>& derivative_mask);

// kappa with beta E_J[exp(kappa x_1)] = 1, the exponential decay rate of C_beta.
double decay_rate(const AdmissibleKernel& J, double beta);
// Radius where the mass of C_beta beyond it is about eps, within the site budget.
int green_radius_for(const AdmissibleKernel& J, double beta, double eps, std::size_t site_budget = 1500000);

GreenField green_function(const AdmissibleKernel& J, double beta, int order, int radius = -1);

// chi = ||J * C||_1 and xi^2 = ||x|^2 (J*C)||_1 / chi from a stored field.
void green_observables(const AdmissibleKernel& J, const LatticeField& G, Interval& chi, Interval& xi_sq);

// P[X_n = 0] for the J-walk, n = 0..n_max (nearest-neighbour via binomial
// mixing of one-dimensional return probabilities; other kernels via a capped
// ladder of radius n_max R).
std::vector<double> return_probabilities(const AdmissibleKernel& J, int n_max);

// C_beta(0) with three beta-derivatives, and the origin diagrams
//   bubble   (C*J*C)(0)     = C'
//   triangle (C*J*C*C)(0)   = C' + beta C''/2
//   square   (C*C*J*C*C)(0) = C' + beta C'' + beta^2 C'''/6
struct OriginDiagrams {
  double beta = 0.0;
  int order = 0;
  Jet g0;
  Jet tail;  // coefficientwise bound on the truncated part of g0
  double value = 0.0, bubble = 0.0, triangle = 0.0, square = 0.0;
  double bubble_err = 0.0, triangle_err = 0.0, square_err = 0.0;
  std::string route;
};

OriginDiagrams green_origin_diagrams(const AdmissibleKernel& J, double beta, double eps = 1e-12);

// C_1(0) for d > 2 from partial sums at K and 4K with Richardson exponent d/2-1.
struct CriticalOrigin {
  int K = 0;
  double partial_K = 0.0;
  double partial_4K = 0.0;
  double extrapolated = 0.0;
  double exponent = 0.0;
};

CriticalOrigin green_origin_critical(const AdmissibleKernel& J, int K);

// C_beta - C_beta' = (beta-beta') C_beta' * J * C_beta and dC = C*J*C, pointwise
// on the box, with residual compared against the combined truncation bound.
InequalityReport green_identity_check(const AdmissibleKernel& J, double beta_low, double beta_high, int order = -1,
                                      int radius = -1, double tail_eps = 1e-10);

// One ladder for several (beta', beta) pairs.
std::vector<InequalityReport> green_identity_suite(const AdmissibleKernel& J,
                                                   const std::vector<std::pair<double, double>>& pairs,
                                                   int order = -1, int radius = -1, double tail_eps = 1e-10);

// Fitted (c, C) for the J-walk anti-concentration bound and the Green bound.
struct JWalkFit {
  std::vector<double> c_grid;
  std::vector<double> C_anti;        // up to m_max
  std::vector<double> C_anti_double; // up to 2 m_max
  std::vector<double> C_green;
  std::vector<double> C_total;
  FittedConstants selected;
  double critical_origin = 0.0;  // C_1(0) - 1 when available
};

JWalkFit jwalk_fit(const AdmissibleKernel& J, double beta, int m_max, std::size_t site_budget = 2500000);

InequalityReport jwalk_estimates_check(const AdmissibleKernel& J, double beta, int m_max);

// Same fit over several kernels: C at a common c must agree within a factor 2.
InequalityReport jwalk_kernel_scan(const std::vector<AdmissibleKernel>& kernels, double beta, int m_max);

}  // namespace mflab

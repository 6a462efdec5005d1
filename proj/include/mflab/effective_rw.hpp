#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mflab/green.hpp"
#include "mflab/kernels.hpp"
#include "mflab/lattice.hpp"
#include "mflab/report.hpp"

namespace mflab {

// Law of X_1 for the effective walk: F_beta / chi(beta), stepping in lattice
// units, with xi(beta) as its spread.
struct StepDistribution {
  LatticeField field;
  double sigma_eff = 0.0;  // sqrt of xi_sq.est
  Interval xi_sq;
  std::string source;
  int support_radius = 0;  // largest |x|_inf with nonzero mass

  int d() const { return field.d; }
};

// beta = 0: the J-walk itself.
StepDistribution step_from_kernel(const AdmissibleKernel& J);
// Normalises a nonnegative two-point field F (already J*G where relevant).
// xi_sq overrides the moment computed from the field when given.
StepDistribution step_from_two_point(const LatticeField& F, const std::string& source,
                                     const Interval* xi_sq = nullptr);
// Effective walk of the Green-function model, F = J * C_beta.
StepDistribution step_from_green(const AdmissibleKernel& J, double beta, double tail_eps = 1e-10);
// +-N e_i with probability 1/(2d) each.
StepDistribution step_axis_walk(int d, int N);

class MgfOverflow : public std::domain_error {
 public:
  MgfOverflow(double s, double s_max);
  double s_max;
};

// E[exp(s x_1 / sigma_eff)] over the stored field.
double step_mgf(const StepDistribution& step, double s);
double step_mgf_max_argument(const StepDistribution& step);
// Same at the two ends of the xi interval (lower/upper in that order).
Interval step_mgf_sensitivity(const StepDistribution& step, double s);

// (1 - beta) Jhat(t) / (1 - beta Jhat(t)) with t = s / xi(beta), the closed
// form of the Green-model MGF.
double green_model_mgf(const AdmissibleKernel& J, double beta, double s);

struct RegularityCertificate {
  double c_reg = 0.0;
  double C_reg = 0.0;
  double mgf_value = 0.0;
  double grid_floor = 0.0;
  nlohmann::json to_json() const;
};

class CertificateNotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Largest s with M(s) <= C_target, from a log grid refined by bisection.
RegularityCertificate certify_regular(const StepDistribution& step, double C_target = 3.0,
                                      double grid_floor = 1e-3, double grid_ceiling = 50.0);

// M_J(2) <= exp(2 / c0) for the J-walk.
InequalityReport jwalk_regularity_check(const std::vector<AdmissibleKernel>& kernels);

// Box B_sigma(y) on Z^d is Λ_r(y) with r = floor(sigma); centres are taken on
// the lattice of spacing max(1, r), so the sup is a lower bound on the sup
// over all y.
struct BoxOccupancy {
  int m = 0;
  std::uint64_t trials = 0;  // 0 for exact
  std::uint64_t seed = 0;
  int box_radius = 0;
  int spacing = 1;
  double sup = 0.0;
  double stderr_sup = 0.0;
  Point argmax;
  std::vector<std::pair<Point, double>> boxes;  // centre -> probability, sorted by centre
  nlohmann::json to_json(std::size_t max_boxes = 64) const;
};

BoxOccupancy empirical_box_occupancy(const StepDistribution& step, int m, std::uint64_t trials,
                                     std::uint64_t seed, int box_radius = -1);
BoxOccupancy exact_box_occupancy(const StepDistribution& step, int m, int box_radius = -1);

// Σ_{|z - y| <= r} f(z), on the same box as f.
LatticeField box_sums(const LatticeField& f, int r);

// G_mu(B_sigma(y)) = Σ_m mu^m P[X_m in B_sigma(y)] from m-step convolutions
// capped at radius `cap`. hi is +inf at mu = 1.
struct BoxGreenValue {
  Interval value;
  int order = 0;
  int box_radius = 0;
  Point y;
};

std::vector<BoxGreenValue> green_box_average(const StepDistribution& step, double mu,
                                             const std::vector<Point>& ys, int order, int box_radius = -1,
                                             int cap = -1);

// Fit of G_mu(B_sigma(y)) <= C (sigma / (sigma v |y|))^{d-2} exp(-c sqrt(1-mu) |y| / sigma)
// over y = k e_1.
struct BoxGreenFit {
  std::vector<BoxGreenValue> values;
  FittedConstants selected;
};

BoxGreenFit green_box_fit(const StepDistribution& step, double mu, const std::vector<int>& ks, int order,
                          int cap = -1);

// MC occupancy across m: m^{d/2} sup must stay within `max_ratio`.
InequalityReport occupancy_scaling_check(const StepDistribution& step, const std::vector<int>& ms,
                                         std::uint64_t trials, std::uint64_t seed, double max_ratio);

// MC against exact convolution occupancy for small m, within 3 standard errors.
InequalityReport occupancy_exact_check(const StepDistribution& step, const std::vector<int>& ms,
                                       std::uint64_t trials, std::uint64_t seed);

// M_beta(s) <= chi'/chi M'(s xi'/xi) / (1 - Z M'(s xi'/xi)) for the Green model,
// evaluated on the stored step fields.
InequalityReport mgf_iteration_check(const AdmissibleKernel& J, const std::vector<std::pair<double, double>>& pairs,
                                     const std::vector<double>& s_grid);

// Symmetry facts of a step: odd first moment, E[x_1^2]/xi^2 = 1/d, M(s) = M(-s).
InequalityReport step_symmetry_check(const StepDistribution& step, double tol = 1e-10);

}  // namespace mflab

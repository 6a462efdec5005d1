#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "mflab/interval.hpp"
#include "mflab/kernels.hpp"
#include "mflab/lattice.hpp"
#include "mflab/model_lattice_trees.hpp"
#include "mflab/model_percolation.hpp"
#include "mflab/model_saw.hpp"
#include "mflab/model_spin.hpp"
#include "mflab/report.hpp"

namespace mflab {

enum class ModelKind { Green, Saw, Percolation, Ising, LatticeTrees };

std::string model_kind_name(ModelKind k);

// G_beta with whatever is known about the part that was not computed.
struct ModelPoint {
  double beta = 0.0;
  LatticeField G;
  // Tail handling: "exact" (finite volume), "dominated" (SAW: c_n <= J^{*n}
  // coefficientwise, so the missing part is bounded by the same diagram of the
  // random walk minus its truncation), "green" (certified series tail), or
  // "none" (upper endpoints are +inf).
  std::string tail = "none";
  LatticeField C_trunc;  // dominated: random-walk series truncated at the same order
};

struct ModelSource {
  ModelKind kind = ModelKind::Green;
  std::string label;
  AdmissibleKernel kernel;
  double lambda = 0.0;    // SAW repulsion
  double A = 1.0;         // G_0(0)
  double beta_max = 1.0;  // validity edge of the computed data
  int period = 0;         // torus side for periodic finite volumes
  std::function<ModelPoint(double)> at;
};

// Field on Λ_{period/2} representing a function on the torus Z_period^d:
// sums f over each residue class and spreads the sum evenly over the box
// points of that class (two of them per coordinate equal to period/2 when
// the period is even).
LatticeField torus_fold(const LatticeField& f, int period);

ModelSource green_source(const AdmissibleKernel& J, double tail_eps = 1e-10);
ModelSource saw_source(std::shared_ptr<const SawSeries> s);
// Coordinates of the graph give the lattice positions; J is the kernel the
// graph was cut from.
ModelSource perc_source(std::shared_ptr<const ExactPerc> ex, const AdmissibleKernel& J);
ModelSource ising_source(std::shared_ptr<const IsingExact> ex);
ModelSource lt_source(std::shared_ptr<const TreeSeries> s);

struct Observables {
  std::string model;
  std::string label;
  double beta = 0.0;
  Interval chi, xi_sq;
  Interval bubble, triangle, square;  // NaN estimate when over the site budget
  LatticeField H;
  Interval H_l1, H_m2;
  Interval E0_point, E2_point;  // at this beta
  Interval E0, E2, E;           // running sup over the grid prefix
  Interval Z;                   // (beta - beta_prev) chi(beta_prev); Z_{0,0} = 0
  double A = 1.0;
  std::string tail;
  nlohmann::json to_json(bool with_fields = false) const;
};

Observables compute_observables(const ModelSource& src, double beta);
// Grid points evaluate independently; E and Z are filled in grid order.
std::vector<Observables> observe_grid(const ModelSource& src, const std::vector<double>& grid);

// 0 followed by n-1 log-spaced points from beta_max/1000 to beta_max.
std::vector<double> default_beta_grid(double beta_max, int n = 64);

std::string observables_csv(const std::vector<Observables>& rows);

struct BetaOfDelta {
  double beta = 0.0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  bool saturated = false;
  bool certified = false;  // true when E upper endpoints were used
  nlohmann::json to_json() const;
};

// Largest grid beta with E(beta) < delta (upper endpoints when finite).
BetaOfDelta beta_of_delta(const std::vector<Observables>& rows, double delta);

struct ZFactor {
  double beta_low = 0.0;
  double beta_high = 0.0;
  Interval value;
};

ZFactor z_factor(const Observables& low, double beta_high);

struct ScalingFit {
  int d = 0;
  double beta = 0.0;
  std::string diagram;
  std::vector<int> Rs;
  std::vector<double> sigmas;
  std::vector<double> values;
  double slope = 0.0;
  double intercept = 0.0;
  nlohmann::json to_json() const;
};

// Origin diagram of C_beta for spread-out kernels over a list of ranges;
// least-squares slope of log value against log sigma_J.
ScalingFit sigma_scaling_scan(int d, const std::vector<int>& Rs, double beta, const std::string& diagram = "bubble");
InequalityReport sigma_scaling_check(const ScalingFit& fit, double slope_lo, double slope_hi);

// ||x|^2 G||_1 = ||x|^2 F||_1 - sigma^2 chi on every grid point.
InequalityReport moment_identity_check(const ModelSource& src, const std::vector<double>& grid, double tol = 1e-10);
// H_0 = 0.
InequalityReport h_zero_check(const ModelSource& src, double tol = 1e-12);
// E at the grid end from n and 2n-1 points agree within 5%.
InequalityReport e_refinement_check(const ModelSource& src, double beta_end, int n, double rel = 0.05);

}  // namespace mflab

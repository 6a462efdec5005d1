#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mflab/observables.hpp"
#include "mflab/report.hpp"

namespace mflab {

// Checks below take rows from observe_grid (grid order, E already the running
// sup). Interval data is used in the weakest form consistent with the
// intervals: each residual is the largest value of rhs - lhs over the interval
// corners, and the residual of the point estimates goes into details.
// Float tolerance: 1e-9 relative.
inline constexpr double kVerifyRelTol = 1e-9;

// (beta-beta')(1-E(beta)) <= 1/chi(beta') - 1/chi(beta) <= beta-beta', all pairs.
InequalityReport check_chi_sandwich(const std::vector<Observables>& rows);

// (chi'/chi)^{(1+E)/(1-E)} <= (xi'/xi)^2 <= (chi'/chi)^{1-2E} where E(beta) < 1,
// and chi'/(2chi) <= (xi'/xi)^2 <= 2chi'/chi where E <= 1/2 and
// E <= chi'/(4chi) v (xi'/xi)^2/4.
InequalityReport check_xi_chi_comparison(const std::vector<Observables>& rows);

// Z = (beta-beta')chi(beta'):
//   1 - chi'/chi <= Z <= (1 - chi'/chi) / (1 - 1^E)             (E < 1)
//   1 - chi'/chi <= Z <= 1 - chi'/(2chi)                         (E <= chi'/(4chi))
//   1 - 2(xi'/xi)^2 <= Z <= 1 - (xi'/xi)^2/4                     (E <= (xi'/xi)^2/8 ^ 1/2)
// and Z_{0,beta} = beta.
InequalityReport check_Z_bounds(const std::vector<Observables>& rows);

// G_beta(x) <= sum_{k<T} Z^k E'[G_beta'(x - X_k)] + Z^T E'[G_beta(x - X_T)]
// with X the effective walk of law F_beta'/chi(beta'), by k-step convolutions
// on the stored box. T = 0 requests the infinite form, which needs Z < 1.
// Checked for G and for F = J*G.
InequalityReport check_iterated_SL(const ModelSource& src, double beta_low, double beta_high, int T);

struct BoundConstants {
  double c_fit = 0.0;
  double C_fit = 0.0;
  double epsilon = 0.0;
  std::string scope;
  std::vector<double> c_grid;
  std::vector<double> C_grid;  // sup f over the whole scope, per c
  std::vector<double> betas;
  std::vector<double> profile;  // sup_x f(beta; x) at c_fit
  double max_profile_jump = 0.0;  // largest ratio of neighbouring profile values
  int profile_radius = 0;
  nlohmann::json to_json() const;
};

// f(beta; x) = F_beta(x) sigma^d ((sigma v |x|)/sigma)^{d-2-eps} exp(c |x| / xi(beta))
// over the stored boxes.
BoundConstants fit_main_bound(const ModelSource& src, const std::vector<double>& betas, double epsilon,
                              const std::vector<double>& c_grid = {});
// max_profile_jump <= max_jump and C finite.
InequalityReport main_bound_report(const BoundConstants& b, double max_jump = 2.0);

// Constants (c, C) for C_beta(x) <= delta_0(x) + C/sigma^d (sigma/(sigma v |x|))^{d-2}
// exp(-c sqrt(1-beta) |x| / sigma), fitted on the Green model over betas.
FittedConstants fit_green_constants(const AdmissibleKernel& J, const std::vector<double>& betas);
// G_beta(x) <= delta_0 + 2C/sigma^d (sigma/(sigma v |x|))^{d-2} exp(-(c/2)|x|/xi(beta))
// for beta <= (1-delta) ^ beta(delta) on the grid.
InequalityReport check_initialisation(const ModelSource& src, const std::vector<Observables>& rows,
                                      const FittedConstants& green, double delta);

// chi_k(beta) = sum_{Λ_k} F_beta at k = ceil(xi(beta')) for every pair beta' <= beta.
// Reports C_stab = max chi_k(beta)/chi(beta') in details; the recorded
// residuals are chi(beta) - chi_k(beta) >= 0 and, when C_max is finite,
// C_max - chi_k(beta)/chi(beta').
InequalityReport check_stability(const ModelSource& src, const std::vector<double>& betas,
                                 double C_max = kInf);

// Convolution lemmas of the appendix in dimension d, with n random parameter
// draws each. Fields are envelope times uniform(0,1) per site.
struct ConvolutionLemmaConfig {
  int d = 3;
  int draws = 50;
  std::uint64_t seed = 1;
  int points_per_draw = 6;
};
// sum_{y not in Λ_{mu xi}} f(y) g(x-y) bound for |x| >= 2(sigma v xi).
InequalityReport check_convolution_lemma_fg(const ConvolutionLemmaConfig& cfg);
// (f1*f2)(x) bound and each of its three parts, for |x| >= 1.
InequalityReport check_convolution_lemma_ff(const ConvolutionLemmaConfig& cfg);
// (2/mu)^{d-2} sum_k exp(-a 2^k mu) 2^{k(2+eps)}, with mu replaced by 1/2 when mu >= 1.
double conv_constant(double a, double mu, int d, double eps);

// Sandwiches that hold at beta(delta) without a critical-point limit, with
// beta(delta) = last grid point:
//   1/(1/chi(bd) + (bd-beta)) <= chi(beta) <= 1/(1/chi(bd) + (bd-beta)(1-E))
//   chi^{1-2E} <= xi^2/sigma^2 <= chi^{(1+E)/(1-E)}
// and for the Green model chi(1-beta) = 1, xi^2(1-beta)/sigma^2 = 1 and
// 1 <= beta_c = 1 <= 1/(1-E).
InequalityReport gamma_nu_check(const ModelSource& src, const std::vector<Observables>& rows, double tol = 1e-8);

// Run configuration ---------------------------------------------------------

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& msg)
      : std::runtime_error(path + ": " + msg), field_path(std::move(path)) {}
  std::string field_path;
};

struct RunConfig {
  int schema = 1;
  std::string suite = "all";
  std::uint64_t seed = 20240101;
  unsigned workers = 0;  // 0: leave the pool as it is
  std::vector<std::string> models;  // empty: the suite's defaults
  int grid_points = 16;
  std::uint64_t mc_trials = 100000;
  std::uint64_t rw_trials = 1000000;
  int appendix_draws = 50;
  std::string out;  // optional output directory
  nlohmann::json raw;  // validated config, including per-model sections
};

// Validates every field before any work starts; throws ConfigError with the
// offending field path.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

std::vector<std::string> suite_names();

// One check of a suite with the (module, operation, parameters) it came from.
struct SuiteEntry {
  std::string module;
  std::string operation;
  nlohmann::json params = nlohmann::json::object();
  InequalityReport report;
};

struct SuiteResult {
  std::vector<SuiteEntry> entries;
  // Long-format tables: file name -> CSV content, with their provenance.
  std::vector<std::pair<std::string, std::string>> csv_tables;
  nlohmann::json table_provenance = nlohmann::json::object();
  // Checks that could not run (suite name -> message).
  std::vector<std::pair<std::string, std::string>> failures;
  double seconds = 0.0;
  bool pass() const;
};

// Runs one named suite ("none", "all", or a name from suite_names()).
// Timing goes to `seconds` only; nothing time-dependent reaches the entries.
SuiteResult run_suite(const std::string& suite, const RunConfig& cfg);

// Model named in a config ("green", "saw", "perc", "ising", "lt") with its
// configured parameters, and the grid end used for it.
struct ConfiguredModel {
  ModelSource source;
  double beta_end = 0.0;
  nlohmann::json params;
};
ConfiguredModel configured_model(const std::string& name, const RunConfig& cfg);

}  // namespace mflab

#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mflab/lattice.hpp"
#include "mflab/rational.hpp"

namespace mflab {

enum class KernelFamily { NearestNeighbour, SpreadOut, Custom };

// Step distribution J with range R_J, spread sigma_J and the tightest c0 with
// c0 R_J <= sigma_J and J_x <= 1/(c0 R_J^d).
struct AdmissibleKernel {
  KernelFamily family = KernelFamily::Custom;
  int d = 1;
  int R = 1;
  Rational weight;    // common value on the support (built-ins); 0 otherwise
  Rational sigma_sq_exact;
  double sigma = 0.0;
  double sigma_sq = 0.0;
  double c0 = 0.0;
  double max_value = 0.0;
  std::size_t support_size = 0;
  std::shared_ptr<const LatticeField> field_ptr;  // null when too large to store

  bool uniform() const { return weight > 0; }
  bool has_field() const { return static_cast<bool>(field_ptr); }
  const LatticeField& field() const;
  // Nonzero offsets with their values.
  std::vector<std::pair<Point, double>> support() const;
  double value(const Point& x) const;
  std::string name() const;
};

struct KernelViolation {
  std::string clause;
  std::string detail;
};

class KernelValidationError : public std::runtime_error {
 public:
  explicit KernelValidationError(std::vector<KernelViolation> v);
  const std::vector<KernelViolation>& violations() const { return violations_; }

 private:
  std::vector<KernelViolation> violations_;
};

AdmissibleKernel nearest_neighbour(int d);
AdmissibleKernel uniform_spread_out(int d, int R);
AdmissibleKernel validate(const LatticeField& field);
// family is "nn" or "spread_out".
AdmissibleKernel make_kernel(const std::string& family, int d, int R = 1);

// J * v with the same tail bookkeeping as convolve().
LatticeField kernel_apply(const AdmissibleKernel& J, const LatticeField& v, int cap = -1);

// E_J[exp(t x_1)].
double kernel_axis_mgf(const AdmissibleKernel& J, double t);

}  // namespace mflab

#pragma once

#include <limits>
#include <string>
#include <vector>

#include "json.hpp"

namespace mflab {

// Outcome of one named inequality over a parameter grid.
// pass <=> worst_residual >= -tolerance (a vacuous report passes).
struct InequalityReport {
  std::string name;
  std::string anchor;
  std::string grid;
  bool pass = true;
  double worst_residual = std::numeric_limits<double>::infinity();
  std::string worst_location;
  double tolerance = 0.0;
  bool vacuous = false;
  bool certified = true;
  std::size_t checked = 0;
  nlohmann::json details = nlohmann::json::object();

  // Records residual = rhs - lhs (>= 0 when the inequality holds).
  void record(double residual, const std::string& location);
  // Same, building the location string only for a new worst case.
  template <class F>
  void record_with(double residual, F&& where) {
    if (residual < worst_residual || residual != residual) {
      record(residual, where());
    } else {
      ++checked;
    }
  }
  void finalize();
  nlohmann::json to_json() const;
};

InequalityReport make_report(std::string name, std::string anchor, double tolerance);

// Merge of sub-reports: worst residual over all, pass iff all pass.
InequalityReport combine(std::string name, std::string anchor, const std::vector<InequalityReport>& parts);

// Constant pair (c, C) with its provenance.
struct FittedConstants {
  double c = 0.0;
  double C = 0.0;
  std::vector<double> c_grid;
  std::vector<double> C_grid;
  std::string rule;
  nlohmann::json to_json() const;
};

// Picks the largest grid c whose C stays within `factor` of the C at the
// smallest grid c.
FittedConstants select_constants(const std::vector<double>& c_grid, const std::vector<double>& C_grid,
                                 double factor = 2.0);

std::vector<double> log_grid(double lo, double hi, int n);
std::string fmt(double v);

}  // namespace mflab

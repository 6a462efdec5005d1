#include "mflab/report.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace mflab {

void InequalityReport::record(double residual, const std::string& location) {
  ++checked;
  if (std::isnan(residual)) {
    worst_residual = -std::numeric_limits<double>::infinity();
    worst_location = location + " (NaN)";
    return;
  }
  if (residual < worst_residual) {
    worst_residual = residual;
    worst_location = location;
  }
}

void InequalityReport::finalize() {
  if (checked == 0) vacuous = true;
  pass = vacuous || worst_residual >= -tolerance;
}

nlohmann::json InequalityReport::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  j["anchor"] = anchor;
  j["grid"] = grid;
  j["pass"] = pass;
  j["worst_residual"] = std::isfinite(worst_residual) ? nlohmann::json(worst_residual) : nlohmann::json(fmt(worst_residual));
  j["worst_location"] = worst_location;
  j["tolerance"] = tolerance;
  j["vacuous"] = vacuous;
  j["certified"] = certified;
  j["checked"] = checked;
  j["details"] = details;
  return j;
}

InequalityReport make_report(std::string name, std::string anchor, double tolerance) {
  InequalityReport r;
  r.name = std::move(name);
  r.anchor = std::move(anchor);
  r.tolerance = tolerance;
  return r;
}

InequalityReport combine(std::string name, std::string anchor, const std::vector<InequalityReport>& parts) {
  InequalityReport r = make_report(std::move(name), std::move(anchor), 0.0);
  bool all_vacuous = !parts.empty();
  r.pass = true;
  nlohmann::json sub = nlohmann::json::array();
  for (const auto& p : parts) {
    sub.push_back(p.to_json());
    r.checked += p.checked;
    r.certified = r.certified && p.certified;
    all_vacuous = all_vacuous && p.vacuous;
    if (!p.vacuous && p.worst_residual + p.tolerance < r.worst_residual + r.tolerance) {
      r.worst_residual = p.worst_residual;
      r.worst_location = p.name + ": " + p.worst_location;
      r.tolerance = p.tolerance;
    }
    r.pass = r.pass && p.pass;
  }
  r.vacuous = all_vacuous;
  r.details["parts"] = sub;
  return r;
}

nlohmann::json FittedConstants::to_json() const {
  return {{"c", c}, {"C", C}, {"c_grid", c_grid}, {"C_grid", C_grid}, {"rule", rule}};
}

FittedConstants select_constants(const std::vector<double>& c_grid, const std::vector<double>& C_grid,
                                 double factor) {
  if (c_grid.empty() || c_grid.size() != C_grid.size()) throw std::invalid_argument("select_constants: bad grid");
  FittedConstants f;
  f.c_grid = c_grid;
  f.C_grid = C_grid;
  f.c = c_grid.front();
  f.C = C_grid.front();
  for (std::size_t i = 0; i < c_grid.size(); ++i) {
    if (C_grid[i] <= factor * C_grid.front()) {
      f.c = c_grid[i];
      f.C = C_grid[i];
    }
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "largest c with C(c) <= %g * C(c_min)", factor);
  f.rule = buf;
  return f;
}

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> g;
  if (n <= 1) return {lo};
  for (int i = 0; i < n; ++i) g.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
  return g;
}

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace mflab

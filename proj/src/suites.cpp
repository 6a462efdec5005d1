#include <chrono>
#include <cmath>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include "mflab/effective_rw.hpp"
#include "mflab/green.hpp"
#include "mflab/verifier.hpp"

namespace mflab {

using nlohmann::json;

bool SuiteResult::pass() const {
  if (!failures.empty()) return false;
  for (const auto& e : entries)
    if (!e.report.pass) return false;
  return true;
}

// Config ---------------------------------------------------------------------

namespace {

struct Field {
  const json& j;
  std::string path;

  Field at(const std::string& key) const { return {j.at(key), path.empty() ? key : path + "." + key}; }

  [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(path, msg); }

  long long integer(long long lo, long long hi) const {
    if (!j.is_number_integer()) fail("expected an integer");
    long long v = j.get<long long>();
    if (v < lo || v > hi) fail("must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return v;
  }
  double number(double lo, double hi, bool open_lo = false, bool open_hi = false) const {
    if (!j.is_number()) fail("expected a number");
    double v = j.get<double>();
    bool ok = std::isfinite(v) && (open_lo ? v > lo : v >= lo) && (open_hi ? v < hi : v <= hi);
    if (!ok) fail(std::string("must lie in ") + (open_lo ? "(" : "[") + fmt(lo) + ", " + fmt(hi) + (open_hi ? ")" : "]"));
    return v;
  }
  std::string string() const {
    if (!j.is_string()) fail("expected a string");
    return j.get<std::string>();
  }
  Rational rational(const Rational& lo, const Rational& hi) const {
    Rational q;
    if (j.is_string()) {
      try {
        q = parse_rational(j.get<std::string>());
      } catch (const std::exception&) {
        fail("not a rational number");
      }
    } else if (j.is_number()) {
      double v = j.get<double>();
      if (!std::isfinite(v)) fail("not a finite number");
      q = rational_from_double(v);
    } else {
      fail("expected a number or a string \"p/q\"");
    }
    if (q < lo || q > hi) fail("must lie in [" + to_string(lo) + ", " + to_string(hi) + "]");
    return q;
  }
  void object_with(const std::set<std::string>& keys) const {
    if (!j.is_object()) fail("expected an object");
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!keys.count(it.key())) at(it.key()).fail("unknown key");
  }
};

const std::vector<std::string> kModels = {"green", "saw", "perc", "ising", "lt"};

json model_defaults(const std::string& m) {
  if (m == "green") return {{"d", 3}, {"kernel", "nn"}, {"R", 1}, {"beta", 0.9}, {"tail_eps", 1e-9}};
  if (m == "saw") return {{"d", 5}, {"kernel", "nn"}, {"R", 1}, {"lambda", "1/10"}, {"N", 6}, {"beta", 0.3}};
  if (m == "perc") return {{"d", 1}, {"kernel", "nn"}, {"R", 1}, {"L", 3}, {"beta", 0.5}};
  if (m == "ising") return {{"d", 1}, {"kernel", "nn"}, {"R", 1}, {"shape", "8p"}, {"beta", 0.6}};
  return {{"d", 2}, {"kernel", "nn"}, {"R", 1}, {"B", 4}, {"beta", 0.9}};
}

AdmissibleKernel section_kernel(const Field& sec, const json& m) {
  std::string fam = m.at("kernel").get<std::string>();
  int d = m.at("d").get<int>(), R = m.at("R").get<int>();
  try {
    return make_kernel(fam, d, fam == "nn" ? 1 : R);
  } catch (const std::exception& e) {
    sec.fail(e.what());
  }
}

// Validates one model section (merged over the defaults) and returns it.
json validate_model(const std::string& name, const json* given, const std::string& path) {
  json m = model_defaults(name);
  std::set<std::string> keys;
  for (auto it = m.begin(); it != m.end(); ++it) keys.insert(it.key());
  if (given) {
    Field f{*given, path};
    f.object_with(keys);
    for (auto it = given->begin(); it != given->end(); ++it) m[it.key()] = it.value();
  }
  json merged = m;
  Field f{merged, path};
  int dmax = name == "green" ? 8 : name == "saw" ? 6 : name == "perc" ? 3 : name == "ising" ? 3 : 4;
  int d = static_cast<int>(f.at("d").integer(1, dmax));
  std::string fam = f.at("kernel").string();
  if (fam != "nn" && fam != "spread_out") f.at("kernel").fail("expected \"nn\" or \"spread_out\"");
  f.at("R").integer(1, 8);
  AdmissibleKernel J = section_kernel(f, merged);
  if (name == "green") {
    f.at("beta").number(0.0, 1.0, true, true);
    f.at("tail_eps").number(0.0, 1e-3, true, false);
    if (d < 3) f.at("d").fail("the Green model is only set up for d >= 3");
  } else if (name == "saw") {
    Rational lam = f.at("lambda").rational(Rational(0), Rational(1));
    int N = static_cast<int>(f.at("N").integer(1, 14));
    double cost = saw_cost_estimate(J, lam, N);
    if (cost > 1e8) f.at("N").fail("enumeration too large (about " + fmt(cost) + " nodes, limit 1e8)");
    f.at("beta").number(0.0, 0.99, true, false);
    merged["lambda"] = to_string(lam);
  } else if (name == "perc") {
    int L = static_cast<int>(f.at("L").integer(1, 64));
    if (L <= 2 * J.R) f.at("L").fail("torus side must exceed 2R");
    double edges = std::pow(static_cast<double>(L), d) * static_cast<double>(J.support_size) / 2.0;
    if (edges > 24) f.at("L").fail("exact enumeration needs at most 24 edges, this torus has " + fmt(edges));
    f.at("beta").number(0.0, 1.0, true, true);  // fraction of the largest admissible beta
  } else if (name == "ising") {
    std::string shape = f.at("shape").string();
    try {
      IsingVolume v = ising_shape(J, shape);
      if (static_cast<std::size_t>(v.size()) > ising_site_limit())
        f.at("shape").fail("more than " + std::to_string(ising_site_limit()) + " sites");
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      f.at("shape").fail(e.what());
    }
    f.at("beta").number(0.0, 1.0, true, false);
  } else {
    int B = static_cast<int>(f.at("B").integer(1, 10));
    double cost = lt_cost_estimate(J, B);
    if (cost > 5e7) f.at("B").fail("enumeration too large (about " + fmt(cost) + " trees, limit 5e7)");
    f.at("beta").number(0.0, 1.0, true, true);  // fraction of the trusted beta range
  }
  return merged;
}

}  // namespace

std::vector<std::string> suite_names() {
  return {"green-identities", "saw",     "percolation", "ising",       "lattice-trees", "effective-rw",
          "scaling",          "gamma-nu", "appendix-b",  "observables", "bounds"};
}

RunConfig parse_run_config(const json& j) {
  Field root{j, ""};
  root.object_with({"schema", "suite", "seed", "workers", "models", "grid_points", "mc_trials", "rw_trials",
                    "appendix_draws", "out", "green", "saw", "perc", "ising", "lt"});
  RunConfig c;
  if (!j.contains("schema")) throw ConfigError("schema", "missing (expected 1)");
  c.schema = static_cast<int>(root.at("schema").integer(1, 1));
  if (j.contains("suite")) {
    c.suite = root.at("suite").string();
    auto names = suite_names();
    if (c.suite != "all" && c.suite != "none" && std::find(names.begin(), names.end(), c.suite) == names.end())
      root.at("suite").fail("unknown suite '" + c.suite + "'");
  }
  if (j.contains("seed")) c.seed = static_cast<std::uint64_t>(root.at("seed").integer(0, (1LL << 62)));
  if (j.contains("workers")) c.workers = static_cast<unsigned>(root.at("workers").integer(0, 256));
  if (j.contains("models")) {
    Field m = root.at("models");
    if (!m.j.is_array()) m.fail("expected an array of model names");
    for (std::size_t i = 0; i < m.j.size(); ++i) {
      Field e{m.j[i], m.path + "[" + std::to_string(i) + "]"};
      std::string name = e.string();
      if (std::find(kModels.begin(), kModels.end(), name) == kModels.end()) e.fail("unknown model '" + name + "'");
      c.models.push_back(name);
    }
  }
  if (j.contains("grid_points")) c.grid_points = static_cast<int>(root.at("grid_points").integer(4, 256));
  if (j.contains("mc_trials")) c.mc_trials = static_cast<std::uint64_t>(root.at("mc_trials").integer(100, 100000000));
  if (j.contains("rw_trials")) c.rw_trials = static_cast<std::uint64_t>(root.at("rw_trials").integer(1000, 100000000));
  if (j.contains("appendix_draws")) c.appendix_draws = static_cast<int>(root.at("appendix_draws").integer(1, 10000));
  if (j.contains("out")) c.out = root.at("out").string();
  json raw = j;
  for (const auto& m : kModels) raw[m] = validate_model(m, j.contains(m) ? &j.at(m) : nullptr, m);
  c.raw = raw;
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("not valid JSON: ") + e.what());
  }
  return parse_run_config(j);
}

// Models ---------------------------------------------------------------------

ConfiguredModel configured_model(const std::string& name, const RunConfig& cfg) {
  json m = cfg.raw.contains(name) ? cfg.raw.at(name) : validate_model(name, nullptr, name);
  std::string fam = m.at("kernel").get<std::string>();
  int d = m.at("d").get<int>();
  AdmissibleKernel J = make_kernel(fam, d, fam == "nn" ? 1 : m.at("R").get<int>());
  ConfiguredModel out;
  out.params = m;
  out.params["model"] = name;
  double b = m.at("beta").get<double>();
  if (name == "green") {
    out.source = green_source(J, m.at("tail_eps").get<double>());
    out.beta_end = b;
  } else if (name == "saw") {
    auto s = std::make_shared<SawSeries>(
        saw_enumerate(J, parse_rational(m.at("lambda").get<std::string>()), m.at("N").get<int>()));
    out.source = saw_source(s);
    out.beta_end = b;
  } else if (name == "perc") {
    auto ex = std::make_shared<ExactPerc>(perc_exact(torus_graph(J, m.at("L").get<int>()), false));
    out.source = perc_source(ex, J);
    out.beta_end = b * out.source.beta_max;
  } else if (name == "ising") {
    auto ex = std::make_shared<IsingExact>(ising_exact(ising_shape(J, m.at("shape").get<std::string>())));
    out.source = ising_source(ex);
    out.beta_end = b;
  } else if (name == "lt") {
    auto s = std::make_shared<TreeSeries>(lt_enumerate(J, m.at("B").get<int>()));
    out.source = lt_source(s);
    out.beta_end = b * out.source.beta_max;
  } else {
    throw std::invalid_argument("unknown model '" + name + "'");
  }
  return out;
}

// Suites ---------------------------------------------------------------------

namespace {

struct Builder {
  SuiteResult& res;
  void add(std::string module, std::string op, json params, InequalityReport r) {
    res.entries.push_back({std::move(module), std::move(op), std::move(params), std::move(r)});
  }
  void table(const std::string& file, const std::string& module, const std::string& op, json params,
             std::string content) {
    res.csv_tables.emplace_back(file, std::move(content));
    res.table_provenance[file] = {{"module", module}, {"operation", op}, {"parameters", std::move(params)}};
  }
};

std::string kernel_tag(const AdmissibleKernel& J) { return J.name(); }

std::vector<AdmissibleKernel> identity_kernels() {
  return {nearest_neighbour(3), uniform_spread_out(3, 2), nearest_neighbour(4), uniform_spread_out(4, 2)};
}

const std::vector<std::pair<double, double>> kGreenPairs = {{0.0, 0.5}, {0.3, 0.7}, {0.6, 0.9}};

void suite_green_identities(Builder& b, const RunConfig&) {
  for (const auto& J : identity_kernels()) {
    auto reps = green_identity_suite(J, kGreenPairs, -1, -1, 1e-10);
    for (std::size_t i = 0; i < reps.size(); ++i) {
      json p = {{"kernel", kernel_tag(J)}, {"tail_eps", 1e-10}};
      if (i < kGreenPairs.size()) p["pair"] = {kGreenPairs[i].first, kGreenPairs[i].second};
      b.add("green", "green_identity_check", p, reps[i]);
    }
    // chi = 1/(1-beta) and xi^2 = sigma^2/(1-beta), from the ladder fields
    // the identity checks used.
    InequalityReport r = make_report("green_moments", "chi(1-beta) = 1 and xi^2(1-beta)/sigma^2 = 1", 1e-8);
    json rows = json::array();
    for (std::size_t i = 0; i < reps.size() && i < kGreenPairs.size(); ++i) {
      for (int side = 0; side < 2; ++side) {
        double beta = side ? kGreenPairs[i].second : kGreenPairs[i].first;
        double chi = reps[i].details.at(side ? "chi_high" : "chi_low").get<double>();
        double xi_sq = reps[i].details.at(side ? "xi_sq_high" : "xi_sq_low").get<double>();
        double e1 = std::abs(chi * (1.0 - beta) - 1.0);
        double e2 = std::abs(xi_sq * (1.0 - beta) / J.sigma_sq - 1.0);
        r.record(-e1, "chi at beta=" + fmt(beta));
        r.record(-e2, "xi^2 at beta=" + fmt(beta));
        rows.push_back({{"beta", beta}, {"chi", chi}, {"xi_sq", xi_sq}, {"chi_rel_err", e1}, {"xi_sq_rel_err", e2}});
      }
    }
    r.details["rows"] = rows;
    r.finalize();
    b.add("green", "green_observables", {{"kernel", kernel_tag(J)}, {"tail_eps", 1e-10}}, r);
  }
}

// chi(1-beta) = 1 and xi^2(1-beta)/sigma^2 = 1, plus the sandwich at beta(delta).
void suite_gamma_nu(Builder& b, const RunConfig&) {
  std::vector<double> grid = {0.0, 0.3, 0.5, 0.6, 0.7, 0.9};
  for (const auto& J : identity_kernels()) {
    ModelSource src = green_source(J, 1e-10);
    auto rows = observe_grid(src, grid);
    b.add("verifier", "gamma_nu_check", {{"kernel", kernel_tag(J)}, {"betas", grid}, {"tol", 1e-8}},
          gamma_nu_check(src, rows, 1e-8));
  }
}

void suite_saw(Builder& b, const RunConfig&) {
  const std::vector<std::pair<Rational, Rational>> pairs = {
      {Rational(0), Rational(1, 4)}, {Rational(1, 10), Rational(1, 5)}, {Rational(1, 5), Rational(1, 2)}};
  const std::vector<Rational> singles = {Rational(1, 10), Rational(1, 4), Rational(1, 2)};
  for (int d : {2, 3}) {
    for (Rational lam : {Rational(1, 2), Rational(1)}) {
      AdmissibleKernel J = nearest_neighbour(d);
      SawSeries s = saw_enumerate(J, lam, 8);
      json base = {{"kernel", kernel_tag(J)}, {"lambda", to_string(lam)}, {"N", 8}};
      for (const auto& [lo, hi] : pairs) {
        json p = base;
        p["pair"] = {to_string(lo), to_string(hi)};
        b.add("model_saw", "check_I1_truncated", p, saw_check_I1(s, lo, hi));
      }
      for (const auto& be : singles) {
        json p = base;
        p["beta"] = to_string(be);
        b.add("model_saw", "check_I2_truncated", p, saw_check_I2(s, be));
      }
      // sum_x c_2(x): (2d)(2d-1) non-backtracking two-step walks and 2d
      // returns, each return carrying (1-lambda).
      InequalityReport r = make_report("saw_c2_total", "two-step total (2d-1)/(2d) + (1-lambda)/(2d)", 0.0);
      Rational want = Rational(2 * d - 1, 2 * d) + (Rational(1) - lam) / Rational(2 * d);
      want.canonicalize();
      Rational got = s.total(2);
      r.record(got == want ? 0.0 : -std::abs(to_double(got - want)) - 1.0, "n=2");
      r.details["total"] = to_string(got);
      r.details["closed_form"] = to_string(want);
      r.finalize();
      b.add("model_saw", "c2_closed_form", base, r);
      b.add("model_saw", "submultiplicativity", base, saw_submultiplicativity(s));
    }
  }
}

PercGraph triangle_graph() {
  PercGraph g;
  g.name = "triangle";
  g.n = 3;
  g.edges = {{0, 1}, {1, 2}, {0, 2}};
  g.J = {Rational(1), Rational(1), Rational(1)};
  return g;
}

void suite_percolation(Builder& b, const RunConfig& cfg) {
  {
    // P[0 <-> 1] = p + p^2 - p^3 on the triangle with open probability p.
    ExactPerc ex = perc_exact(triangle_graph());
    RationalPoly want{{Rational(0), Rational(1), Rational(1), Rational(-1)}};
    RationalPoly diff = ex.at(0, 1) - want;
    diff.trim();
    InequalityReport r = make_report("perc_triangle_exact", "triangle two-point function p + p^2 - p^3", 0.0);
    bool zero = true;
    for (const auto& q : diff.coeffs) zero = zero && q == 0;
    r.record(zero ? 0.0 : -1.0, "G(0,1)");
    json coeffs = json::array();
    for (const auto& q : ex.at(0, 1).coeffs) coeffs.push_back(to_string(q));
    r.details["coefficients"] = coeffs;
    r.finalize();
    b.add("model_percolation", "perc_exact", {{"graph", "triangle"}}, r);
  }
  std::vector<PercGraph> graphs = {triangle_graph(), patch_graph(nearest_neighbour(2), 3),
                                   torus_graph(nearest_neighbour(1), 6)};
  std::vector<double> betas = {0.2, 0.5};
  json names = json::array();
  for (const auto& g : graphs) names.push_back(g.name);
  b.add("model_percolation", "perc_mc_oracle_check",
        {{"graphs", names}, {"betas", betas}, {"trials", cfg.mc_trials}, {"seed", cfg.seed}},
        perc_mc_oracle_check(graphs, betas, cfg.mc_trials, cfg.seed));
  for (const auto& g : graphs) {
    ExactPerc ex = perc_exact(g, true);
    auto grid = perc_beta_grid(g, 16);
    json p = {{"graph", g.name}, {"grid_points", 16}, {"tol", 1e-12}};
    b.add("model_percolation", "check_I1_exact", p, perc_check_I1_exact(ex, grid, 1e-12));
    b.add("model_percolation", "check_I2_exact", p, perc_check_I2_exact(ex, grid, 1e-12));
  }
}

void suite_ising(Builder& b, const RunConfig&) {
  {
    IsingVolume v = ising_shape(nearest_neighbour(1), "2");
    double Jv = to_double(Rational(1, 2));
    InequalityReport r = make_report("ising_two_site", "two-site <s0 s1> = tanh(beta J)", 1e-12);
    for (int i = 0; i <= 20; ++i) {
      double beta = 0.25 * i;
      double got = ising_two_point(v, {1}, beta);
      double want = std::tanh(beta * Jv);
      r.record(-std::abs(got - want), "beta=" + fmt(beta));
    }
    r.finalize();
    b.add("model_spin", "ising_two_point", {{"shape", "2"}, {"J", 0.5}, {"betas", "0:0.25:5"}}, r);
  }
  for (auto [d, shape] : std::vector<std::pair<int, std::string>>{{2, "2x2"}, {1, "6"}}) {
    IsingExact ex = ising_exact(ising_shape(nearest_neighbour(d), shape));
    auto grid = ising_beta_grid(2.0, 16);
    json p = {{"shape", shape}, {"kernel", nearest_neighbour(d).name()}, {"beta_max", 2.0}, {"grid_points", 16}};
    json pl = p;
    pl["form"] = "lemma";
    b.add("model_spin", "check_I1", pl, ising_check_I1(ex, grid, true));
    json pa = p;
    pa["form"] = "assumption";
    b.add("model_spin", "check_I1", pa, ising_check_I1(ex, grid, false));
    b.add("model_spin", "check_I2", p, ising_check_I2(ex, grid));
    b.add("model_spin", "griffiths", p, ising_check_griffiths(ex, grid));
  }
}

void suite_lattice_trees(Builder& b, const RunConfig&) {
  {
    TreeSeries s = lt_enumerate(nearest_neighbour(1), 2);
    RationalPoly g = s.g_poly();
    RationalPoly want{{Rational(1), Rational(1), Rational(3, 4)}};
    RationalPoly diff = g - want;
    diff.trim();
    bool zero = true;
    for (const auto& q : diff.coeffs) zero = zero && q == 0;
    InequalityReport r = make_report("lt_g_d1_B2", "d=1 nn: g_p = 1 + p + 3p^2/4", 0.0);
    r.record(zero ? 0.0 : -1.0, "g_p");
    json c = json::array();
    for (const auto& q : g.coeffs) c.push_back(to_string(q));
    r.details["coefficients"] = c;
    r.finalize();
    b.add("model_lattice_trees", "g_poly", {{"kernel", "nn d=1"}, {"B", 2}}, r);
  }
  for (int d : {1, 2}) {
    for (int B = 1; B <= 4; ++B) {
      AdmissibleKernel J = nearest_neighbour(d);
      TreeSeries s = lt_enumerate(J, B);
      json p = {{"kernel", kernel_tag(J)}, {"B", B}};
      b.add("model_lattice_trees", "check_dg_identity", p, lt_check_dg(s));
      if (B == 4) {
        BetaMap m = lt_beta_map(s);
        auto grid = lt_beta_grid(m, 8);
        b.add("model_lattice_trees", "check_symmetry", p, lt_check_symmetry(s));
        b.add("model_lattice_trees", "check_I1", p, lt_check_I1(s, grid));
        b.add("model_lattice_trees", "check_I2", p, lt_check_I2(s, grid));
        b.add("model_lattice_trees", "check_sandwich", p, lt_check_sandwich(s, grid));
      }
    }
  }
}

void suite_effective_rw(Builder& b, const RunConfig& cfg) {
  std::vector<AdmissibleKernel> ks = {nearest_neighbour(1), nearest_neighbour(2), nearest_neighbour(3),
                                      nearest_neighbour(4), nearest_neighbour(5), uniform_spread_out(1, 3),
                                      uniform_spread_out(2, 2), uniform_spread_out(3, 2), uniform_spread_out(4, 1),
                                      uniform_spread_out(5, 1)};
  json names = json::array();
  for (const auto& J : ks) names.push_back(J.name());
  b.add("effective_rw", "jwalk_regularity_check", {{"kernels", names}}, jwalk_regularity_check(ks));
  std::vector<int> ms = {4, 16, 64};
  b.add("effective_rw", "occupancy_scaling_check",
        {{"kernel", "nn d=3"}, {"m", ms}, {"trials", cfg.rw_trials}, {"seed", cfg.seed}, {"max_ratio", 2.5}},
        occupancy_scaling_check(step_from_kernel(nearest_neighbour(3)), ms, cfg.rw_trials, cfg.seed, 2.5));
}

void suite_scaling(Builder& b, const RunConfig&) {
  std::vector<int> Rs = {1, 2, 4, 8};
  ScalingFit fit = sigma_scaling_scan(5, Rs, 0.9, "bubble");
  InequalityReport r = sigma_scaling_check(fit, -6.0, -4.0);
  b.add("observables", "sigma_scaling_scan", {{"d", 5}, {"R", Rs}, {"beta", 0.9}, {"diagram", "bubble"}}, r);
  std::ostringstream csv;
  csv << "d,beta,diagram,R,sigma,value\n";
  csv.precision(17);
  for (std::size_t i = 0; i < fit.Rs.size(); ++i)
    csv << fit.d << "," << fit.beta << "," << fit.diagram << "," << fit.Rs[i] << "," << fit.sigmas[i] << ","
        << fit.values[i] << "\n";
  b.table("sigma_scaling.csv", "observables", "sigma_scaling_scan",
          {{"d", 5}, {"R", Rs}, {"beta", 0.9}, {"diagram", "bubble"}}, csv.str());
}

void suite_appendix_b(Builder& b, const RunConfig& cfg) {
  ConvolutionLemmaConfig c;
  c.d = 3;
  c.draws = cfg.appendix_draws;
  c.seed = cfg.seed;
  json p = {{"d", 3}, {"draws", c.draws}, {"seed", c.seed}, {"points_per_draw", c.points_per_draw}};
  b.add("verifier", "convolution_lemma_fg", p, check_convolution_lemma_fg(c));
  b.add("verifier", "convolution_lemma_ff", p, check_convolution_lemma_ff(c));
}

std::vector<std::string> models_of(const RunConfig& cfg) { return cfg.models.empty() ? kModels : cfg.models; }

std::string beta_of_delta_csv(const std::vector<Observables>& rows) {
  std::ostringstream o;
  o.precision(17);
  o << "delta,beta,bracket_lo,bracket_hi,saturated,certified\n";
  for (double delta : {0.05, 0.1, 0.25, 0.5}) {
    BetaOfDelta bd = beta_of_delta(rows, delta);
    o << delta << "," << bd.beta << "," << bd.bracket_lo << "," << bd.bracket_hi << "," << (bd.saturated ? 1 : 0)
      << "," << (bd.certified ? 1 : 0) << "\n";
  }
  return o.str();
}

void suite_observables(Builder& b, const RunConfig& cfg) {
  for (const auto& name : models_of(cfg)) {
    ConfiguredModel m = configured_model(name, cfg);
    auto grid = default_beta_grid(m.beta_end, cfg.grid_points);
    auto rows = observe_grid(m.source, grid);
    json p = m.params;
    p["beta_end"] = m.beta_end;
    p["grid_points"] = cfg.grid_points;
    b.table("observables_" + name + ".csv", "observables", "observe_grid", p, observables_csv(rows));
    b.table("beta_of_delta_" + name + ".csv", "observables", "beta_of_delta", p, beta_of_delta_csv(rows));
    std::vector<double> mid = {grid[grid.size() / 4], grid[grid.size() / 2], grid.back()};
    b.add("observables", "moment_identity_check", p, moment_identity_check(m.source, mid));
    b.add("observables", "h_zero_check", p, h_zero_check(m.source));
    json pe = p;
    pe["n"] = 6;
    b.add("observables", "e_refinement_check", pe, e_refinement_check(m.source, m.beta_end, 6));
  }
}

void suite_bounds(Builder& b, const RunConfig& cfg) {
  for (const auto& name : models_of(cfg)) {
    ConfiguredModel m = configured_model(name, cfg);
    const ModelSource& src = m.source;
    auto grid = default_beta_grid(m.beta_end, cfg.grid_points);
    auto rows = observe_grid(src, grid);
    json p = m.params;
    p["beta_end"] = m.beta_end;
    p["grid_points"] = cfg.grid_points;
    b.add("verifier", "check_chi_sandwich", p, check_chi_sandwich(rows));
    b.add("verifier", "check_xi_chi_comparison", p, check_xi_chi_comparison(rows));
    b.add("verifier", "check_Z_bounds", p, check_Z_bounds(rows));
    b.add("verifier", "gamma_nu_check", p, gamma_nu_check(src, rows));

    double lo = 0.3 * m.beta_end, hi = 0.6 * m.beta_end;
    json ps = p;
    ps["pair"] = {lo, hi};
    for (int T : {1, 3}) {
      ps["T"] = T;
      b.add("verifier", "check_iterated_SL", ps, check_iterated_SL(src, lo, hi, T));
    }
    ZFactor z = z_factor(compute_observables(src, lo), hi);
    if (z.value.hi < 1.0) {
      ps["T"] = "infinite";
      b.add("verifier", "check_iterated_SL", ps, check_iterated_SL(src, lo, hi, 0));
    }

    std::vector<double> sgrid = default_beta_grid(m.beta_end, std::min(cfg.grid_points, 10));
    b.add("verifier", "check_stability", p, check_stability(src, sgrid));
    for (double eps : {0.0, 0.5}) {
      BoundConstants bc = fit_main_bound(src, sgrid, eps);
      json pb = p;
      pb["epsilon"] = eps;
      InequalityReport r = main_bound_report(bc);
      r.details["constants"] = bc.to_json();
      b.add("verifier", "fit_main_bound", pb, r);
    }
    if (name == "green") {
      FittedConstants gc = fit_green_constants(src.kernel, {0.1, 0.5, 0.9});
      json pi = p;
      pi["delta"] = 0.25;
      pi["green_betas"] = {0.1, 0.5, 0.9};
      InequalityReport r = check_initialisation(src, rows, gc, 0.25);
      r.details["green_constants"] = gc.to_json();
      b.add("verifier", "check_initialisation", pi, r);
    }
  }
}

using SuiteFn = void (*)(Builder&, const RunConfig&);

SuiteFn suite_fn(const std::string& name) {
  if (name == "green-identities") return suite_green_identities;
  if (name == "saw") return suite_saw;
  if (name == "percolation") return suite_percolation;
  if (name == "ising") return suite_ising;
  if (name == "lattice-trees") return suite_lattice_trees;
  if (name == "effective-rw") return suite_effective_rw;
  if (name == "scaling") return suite_scaling;
  if (name == "gamma-nu") return suite_gamma_nu;
  if (name == "appendix-b") return suite_appendix_b;
  if (name == "observables") return suite_observables;
  if (name == "bounds") return suite_bounds;
  return nullptr;
}

}  // namespace

SuiteResult run_suite(const std::string& suite, const RunConfig& cfg) {
  SuiteResult res;
  auto t0 = std::chrono::steady_clock::now();
  std::vector<std::string> todo;
  if (suite == "all") {
    todo = suite_names();
  } else if (suite != "none") {
    if (!suite_fn(suite)) throw ConfigError("suite", "unknown suite '" + suite + "'");
    todo = {suite};
  }
  for (const auto& name : todo) {
    SuiteResult part;
    Builder b{part};
    try {
      suite_fn(name)(b, cfg);
    } catch (const std::exception& e) {
      part.failures.emplace_back(name, e.what());
    }
    // Keep what completed even when a later check threw.
    for (auto& e : part.entries) {
      e.params["suite"] = name;
      res.entries.push_back(std::move(e));
    }
    for (auto& t : part.csv_tables) res.csv_tables.push_back(std::move(t));
    for (auto it = part.table_provenance.begin(); it != part.table_provenance.end(); ++it)
      res.table_provenance[it.key()] = it.value();
    for (auto& f : part.failures) res.failures.push_back(std::move(f));
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace mflab

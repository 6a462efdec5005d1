// Python bindings. Structured results cross as JSON text and are decoded in
// mflab/__init__.py.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mflab/effective_rw.hpp"
#include "mflab/green.hpp"
#include "mflab/parallel.hpp"
#include "mflab/verifier.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace mflab;

namespace {

AdmissibleKernel kernel(const std::string& family, int d, int R) { return make_kernel(family, d, family == "nn" ? 1 : R); }

json ival(const Interval& v) { return {{"lo", v.lo}, {"hi", v.hi}, {"est", v.est}}; }

RunConfig config_from(const std::string& text) {
  json j = text.empty() ? json{{"schema", 1}} : json::parse(text);
  return parse_run_config(j);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "mflab core";
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("set_workers", [](unsigned n) { set_default_workers(n); });

  m.def("kernel_info", [](const std::string& family, int d, int R) {
    AdmissibleKernel J = kernel(family, d, R);
    return json{{"name", J.name()}, {"d", J.d}, {"R", J.R}, {"sigma_sq", J.sigma_sq}, {"c0", J.c0},
                {"support_size", J.support_size}}.dump();
  }, py::arg("family"), py::arg("d"), py::arg("R") = 1);

  m.def("green", [](const std::string& family, int d, int R, double beta, double tail_eps) {
    AdmissibleKernel J = kernel(family, d, R);
    int order = order_for_tail(beta, tail_eps);
    GreenField G = green_function(J, beta, order, green_radius_for(J, beta, tail_eps));
    return json{{"beta", beta}, {"order", order}, {"radius", G.field.L}, {"chi", ival(G.chi)},
                {"xi_sq", ival(G.xi_sq)}, {"G0", G.field.origin()}}.dump();
  }, py::arg("family"), py::arg("d"), py::arg("R"), py::arg("beta"), py::arg("tail_eps") = 1e-10);

  m.def("green_identity", [](const std::string& family, int d, int R, double lo, double hi) {
    return green_identity_check(kernel(family, d, R), lo, hi).to_json().dump();
  });

  m.def("saw_totals", [](int d, const std::string& lambda, int N) {
    SawSeries s = saw_enumerate(nearest_neighbour(d), parse_rational(lambda), N);
    std::vector<std::string> out;
    for (int n = 0; n <= N; ++n) out.push_back(to_string(s.total(n)));
    return out;
  });

  m.def("saw_checks", [](int d, const std::string& lambda, int N, const std::string& lo, const std::string& hi) {
    SawSeries s = saw_enumerate(nearest_neighbour(d), parse_rational(lambda), N);
    json out = json::array();
    out.push_back(saw_check_I1(s, parse_rational(lo), parse_rational(hi)).to_json());
    out.push_back(saw_check_I2(s, parse_rational(hi)).to_json());
    return out.dump();
  });

  m.def("perc_torus_two_point", [](int d, int L, double beta) {
    PercGraph g = torus_graph(nearest_neighbour(d), L);
    ExactPerc ex = perc_exact(g, false);
    std::vector<double> out;
    for (int x = 0; x < g.n; ++x) out.push_back(ex.at(0, x).eval(beta));
    return out;
  });

  m.def("perc_mc", [](int d, int L, double beta, std::uint64_t trials, std::uint64_t seed) {
    return perc_mc(torus_graph(nearest_neighbour(d), L), beta, trials, seed).to_json(true).dump();
  });

  m.def("ising_two_point", [](int d, const std::string& shape, std::vector<int> x, double beta) {
    return ising_two_point(ising_shape(nearest_neighbour(d), shape), x, beta);
  });

  m.def("lt_g_poly", [](int d, int B) {
    TreeSeries s = lt_enumerate(nearest_neighbour(d), B);
    std::vector<std::string> out;
    for (const auto& q : s.g_poly().coeffs) out.push_back(to_string(q));
    return out;
  });

  m.def("regularity", [](const std::string& family, int d, int R) {
    return jwalk_regularity_check({kernel(family, d, R)}).to_json().dump();
  });

  m.def("parse_config", [](const std::string& text) { return config_from(text).raw.dump(); });

  m.def("observe", [](const std::string& model, const std::string& config, int points, double beta_end) {
    RunConfig cfg = config_from(config);
    ConfiguredModel cm = configured_model(model, cfg);
    double end = beta_end > 0 ? beta_end : cm.beta_end;
    py::gil_scoped_release nogil;
    return observables_csv(observe_grid(cm.source, default_beta_grid(end, points)));
  }, py::arg("model"), py::arg("config") = "", py::arg("points") = 16, py::arg("beta_end") = -1.0);

  m.def("verify", [](const std::string& suite, const std::string& config) {
    RunConfig cfg = config_from(config);
    SuiteResult r;
    {
      py::gil_scoped_release nogil;
      r = run_suite(suite, cfg);
    }
    json out = json::array();
    for (const auto& e : r.entries)
      out.push_back({{"module", e.module}, {"operation", e.operation}, {"parameters", e.params}, {"report", e.report.to_json()}});
    json fails = json::array();
    for (const auto& [s, msg] : r.failures) fails.push_back({{"suite", s}, {"error", msg}});
    return json{{"entries", out}, {"failures", fails}, {"pass", r.pass()}}.dump();
  }, py::arg("suite"), py::arg("config") = "");

  m.def("suite_names", &suite_names);
}

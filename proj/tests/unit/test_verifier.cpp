#include <cmath>
#include <memory>

#include "doctest.h"
#include "mflab/verifier.hpp"

using namespace mflab;

TEST_CASE("report pass rule") {
  InequalityReport r = make_report("x", "a", 1e-9);
  r.record(-5e-10, "p");
  r.finalize();
  CHECK(r.pass);
  r.record(-2e-9, "q");
  r.finalize();
  CHECK_FALSE(r.pass);
  CHECK(r.worst_location == "q");
}

TEST_CASE("sandwiches on the Green model are tight") {
  ModelSource src = green_source(nearest_neighbour(3), 1e-10);
  auto rows = observe_grid(src, {0.0, 0.1, 0.3, 0.6});
  auto a = check_chi_sandwich(rows);
  auto b = check_xi_chi_comparison(rows);
  auto c = check_Z_bounds(rows);
  CHECK(a.pass);
  CHECK(b.pass);
  CHECK(c.pass);
  CHECK(std::abs(a.worst_residual) < 1e-8);
}

TEST_CASE("iterated Simon-Lieb on the Green model") {
  ModelSource src = green_source(nearest_neighbour(3), 1e-10);
  CHECK(check_iterated_SL(src, 0.2, 0.4, 1).pass);
  CHECK(check_iterated_SL(src, 0.2, 0.4, 3).pass);
  CHECK(check_iterated_SL(src, 0.2, 0.4, 0).pass);
}

TEST_CASE("iterated Simon-Lieb on a percolation torus") {
  auto pe = std::make_shared<ExactPerc>(perc_exact(torus_graph(nearest_neighbour(1), 5), false));
  ModelSource src = perc_source(pe, nearest_neighbour(1));
  CHECK(check_iterated_SL(src, 0.2, 0.5, 2).pass);
  // Z = (2 - 1) chi(1) > 1: the infinite form is rejected.
  CHECK_THROWS_AS(check_iterated_SL(src, 1.0, 2.0, 0), std::invalid_argument);
}

TEST_CASE("chi sandwich on an Ising ring") {
  auto is = std::make_shared<IsingExact>(ising_exact(ising_shape(nearest_neighbour(1), "8p")));
  auto rows = observe_grid(ising_source(is), default_beta_grid(0.6, 8));
  CHECK(check_chi_sandwich(rows).pass);
  CHECK(check_Z_bounds(rows).pass);
}

TEST_CASE("convolution constant") {
  // mu >= 1 is replaced by 1/2.
  CHECK(conv_constant(1.0, 2.0, 3, 0.0) == doctest::Approx(conv_constant(1.0, 0.5, 3, 0.0)));
  double s = 0.0;
  for (int k = 0; k < 200; ++k) s += std::exp(-0.7 * std::ldexp(1.0, k) * 0.25) * std::pow(2.0, k * 2.5);
  CHECK(conv_constant(0.7, 0.25, 4, 0.5) == doctest::Approx(std::pow(8.0, 2) * s).epsilon(1e-10));
}

TEST_CASE("appendix lemmas on a few draws") {
  ConvolutionLemmaConfig c;
  c.draws = 5;
  c.seed = 3;
  CHECK(check_convolution_lemma_fg(c).pass);
  CHECK(check_convolution_lemma_ff(c).pass);
}

TEST_CASE("run config validation reports field paths") {
  using nlohmann::json;
  auto path_of = [](const json& j) {
    try {
      parse_run_config(j);
    } catch (const ConfigError& e) {
      return e.field_path;
    }
    return std::string("<ok>");
  };
  CHECK(path_of({{"schema", 1}}) == "<ok>");
  CHECK(path_of(json::object()) == "schema");
  CHECK(path_of({{"schema", 2}}) == "schema");
  CHECK(path_of({{"schema", 1}, {"suite", {"saw"}}}) == "suite");
  CHECK(path_of({{"schema", 1}, {"suite", "nope"}}) == "suite");
  CHECK(path_of({{"schema", 1}, {"green", {{"beta", "x"}}}}) == "green.beta");
  CHECK(path_of({{"schema", 1}, {"green", {{"beta", 1.5}}}}) == "green.beta");
  CHECK(path_of({{"schema", 1}, {"saw", {{"lambda", "2"}}}}) == "saw.lambda");
  CHECK(path_of({{"schema", 1}, {"saw", {{"N", 30}}}}) == "saw.N");
  CHECK(path_of({{"schema", 1}, {"perc", {{"L", 2}}}}) == "perc.L");
  CHECK(path_of({{"schema", 1}, {"ising", {{"shape", "x3"}}}}) == "ising.shape");
  CHECK(path_of({{"schema", 1}, {"models", {"green", "potts"}}}) == "models[1]");
  CHECK(path_of({{"schema", 1}, {"extra", 1}}) == "extra");
  CHECK(path_of({{"schema", 1}, {"lt", {{"colour", 1}}}}) == "lt.colour");
  CHECK(path_of({{"schema", 1}, {"grid_points", 1}}) == "grid_points");
}

TEST_CASE("empty suite") {
  RunConfig cfg = parse_run_config({{"schema", 1}});
  SuiteResult r = run_suite("none", cfg);
  CHECK(r.entries.empty());
  CHECK(r.pass());
  CHECK_THROWS_AS(run_suite("nope", cfg), ConfigError);
}

#include <cmath>
#include <memory>

#include "doctest.h"
#include "mflab/observables.hpp"
#include "mflab/verifier.hpp"

using namespace mflab;

TEST_CASE("Green observables: chi and xi exact, E = 0") {
  ModelSource src = green_source(nearest_neighbour(3), 1e-10);
  auto rows = observe_grid(src, {0.0, 0.4, 0.8});
  for (const auto& r : rows) {
    CHECK(r.chi.est * (1 - r.beta) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(r.xi_sq.est * (1 - r.beta) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(r.E.est == 0.0);
  }
  // Z_{0,beta} = beta and Z_{beta',beta} = (beta-beta')/(1-beta').
  CHECK(rows[1].Z.est == doctest::Approx(0.4));
  CHECK(rows[2].Z.est == doctest::Approx(0.4 / 0.6).epsilon(1e-8));
}

TEST_CASE("torus fold preserves mass and symmetry") {
  LatticeField f(1, 5);
  for (int x = -5; x <= 5; ++x) f.set({x}, 1.0 + 0.1 * std::abs(x));
  LatticeField g = torus_fold(f, 4);
  CHECK(g.L == 2);
  CHECK(g.sum() == doctest::Approx(f.sum()));
  // Residue class of 2 mod 4 holds x = -2, 2 and the representatives +-2 share it.
  CHECK(g.at({2}) == doctest::Approx(g.at({-2})));
  CHECK(g.at({2}) + g.at({-2}) == doctest::Approx(f.at({2}) + f.at({-2})));
  // Class 0: x = -4, 0, 4.
  CHECK(g.at({0}) == doctest::Approx(f.at({-4}) + f.at({0}) + f.at({4})));
}

TEST_CASE("moment identity and H_0 for every model") {
  auto saw = std::make_shared<SawSeries>(saw_enumerate(nearest_neighbour(3), Rational(1, 2), 5));
  auto is = std::make_shared<IsingExact>(ising_exact(ising_shape(nearest_neighbour(1), "6p")));
  auto lt = std::make_shared<TreeSeries>(lt_enumerate(nearest_neighbour(2), 3));
  auto pe = std::make_shared<ExactPerc>(perc_exact(torus_graph(nearest_neighbour(1), 5), false));
  std::vector<ModelSource> srcs = {green_source(nearest_neighbour(3)), saw_source(saw), ising_source(is), lt_source(lt),
                                   perc_source(pe, nearest_neighbour(1))};
  for (const auto& s : srcs) {
    double b = 0.3 * s.beta_max;
    CHECK_MESSAGE(moment_identity_check(s, {0.5 * b, b}).pass, s.label);
    CHECK_MESSAGE(h_zero_check(s).pass, s.label);
  }
}

TEST_CASE("beta of delta picks the last grid point below delta") {
  ModelSource src = green_source(nearest_neighbour(3));
  auto rows = observe_grid(src, {0.0, 0.2, 0.5});
  BetaOfDelta b = beta_of_delta(rows, 0.1);
  CHECK(b.beta == 0.5);
  CHECK(b.saturated);
}

TEST_CASE("sigma scaling scan rejects low dimension") {
  CHECK_THROWS(sigma_scaling_scan(2, {1, 2}, 0.5));
  CHECK_THROWS(sigma_scaling_scan(5, {2, 2}, 0.5));
}

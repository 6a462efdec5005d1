#include <cmath>

#include "doctest.h"
#include "mflab/effective_rw.hpp"
#include "mflab/green.hpp"

using namespace mflab;

namespace {
double binom_return(int n) {  // P[X_{2n} = 0] for simple walk on Z: C(2n,n)/4^n
  double p = 1.0;
  for (int k = 1; k <= n; ++k) p *= (n + k) / (4.0 * k);
  return p;
}
}  // namespace

TEST_CASE("return probabilities of the simple walk on Z") {
  auto p = return_probabilities(nearest_neighbour(1), 20);
  for (int n = 0; n <= 20; ++n) {
    double want = n % 2 ? 0.0 : binom_return(n / 2);
    CHECK(p[n] == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("return probabilities in d=2 factorise") {
  // P[X_{2n} = 0] = (C(2n,n)/4^n)^2 for the simple walk on Z^2.
  auto p = return_probabilities(nearest_neighbour(2), 16);
  for (int n = 0; n <= 8; ++n) CHECK(p[2 * n] == doctest::Approx(std::pow(binom_return(n), 2)).epsilon(1e-12));
}

TEST_CASE("Green function moments are exact") {
  for (double beta : {0.2, 0.6}) {
    AdmissibleKernel J = nearest_neighbour(3);
    GreenField G = green_function(J, beta, order_for_tail(beta, 1e-12));
    CHECK(G.chi.est * (1 - beta) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(G.xi_sq.est * (1 - beta) == doctest::Approx(J.sigma_sq).epsilon(1e-9));
    CHECK(G.chi.lo <= G.chi.est);
    CHECK(G.chi.hi >= G.chi.est);
  }
}

TEST_CASE("Green identities at a single pair") {
  InequalityReport r = green_identity_check(nearest_neighbour(3), 0.2, 0.4, -1, -1, 1e-10);
  CHECK(r.pass);
  CHECK(r.worst_residual >= 0.0);
}

TEST_CASE("origin diagrams from the derivative route match a direct sum") {
  // Bubble (C*J*C)(0) = dC(0)/dbeta; for beta small the series is short.
  AdmissibleKernel J = nearest_neighbour(3);
  double beta = 0.3;
  OriginDiagrams od = green_origin_diagrams(J, beta, 1e-13);
  GreenField G = green_function(J, beta, order_for_tail(beta, 1e-13));
  LatticeField F = kernel_apply(J, G.field);
  double direct = 0.0;
  G.field.for_each([&](std::size_t i, const int* x) {
    Point mx(x, x + 3);
    for (auto& c : mx) c = -c;
    if (F.in_box(mx)) direct += G.field.values[i] * F.at(mx);
  });
  CHECK(od.bubble == doctest::Approx(direct).epsilon(1e-8));
}

TEST_CASE("regularity certificate for the simple walk") {
  InequalityReport r = jwalk_regularity_check({nearest_neighbour(1), nearest_neighbour(3), uniform_spread_out(2, 2)});
  CHECK(r.pass);
  // The nearest-neighbour step in d=1 has M(s) = cosh(s) along the axis.
  StepDistribution s = step_from_kernel(nearest_neighbour(1));
  CHECK(step_mgf(s, 0.7) == doctest::Approx(std::cosh(0.7)).epsilon(1e-12));
}

TEST_CASE("empirical box occupancy agrees with the exact law") {
  StepDistribution s = step_from_kernel(nearest_neighbour(1));
  BoxOccupancy ex = exact_box_occupancy(s, 6);
  BoxOccupancy mc = empirical_box_occupancy(s, 6, 200000, 5);
  CHECK(std::abs(ex.sup - mc.sup) <= 4.0 * mc.stderr_sup + 1e-12);
  // Boxes Λ_1(y) after 6 simple-walk steps: best is y = +-1, covering
  // P[X_6 = 0] + P[X_6 = 2] = (20 + 15)/64.
  CHECK(ex.sup == doctest::Approx(35.0 / 64.0));
}

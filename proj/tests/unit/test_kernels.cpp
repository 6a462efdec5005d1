#include <cmath>

#include "doctest.h"
#include "mflab/kernels.hpp"

using namespace mflab;

TEST_CASE("nearest-neighbour kernel") {
  for (int d = 1; d <= 5; ++d) {
    AdmissibleKernel J = nearest_neighbour(d);
    CHECK(J.support_size == static_cast<std::size_t>(2 * d));
    CHECK(J.value(Point(d, 0)) == 0.0);
    CHECK(J.weight == Rational(1, 2 * d));
    // sum |x|^2 J(x) = 1 for unit steps.
    CHECK(J.sigma_sq == doctest::Approx(1.0));
  }
}

TEST_CASE("spread-out kernel variance") {
  // Uniform on Λ_R \ {0}: sigma^2 = d * (sum_{|k|<=R} k^2) (2R+1)^{d-1} / ((2R+1)^d - 1).
  for (int d : {1, 2, 3}) {
    for (int R : {1, 2, 3}) {
      AdmissibleKernel J = uniform_spread_out(d, R);
      double n = std::pow(2 * R + 1, d) - 1;
      double s1 = 0;
      for (int k = -R; k <= R; ++k) s1 += k * k;
      double want = d * s1 * std::pow(2 * R + 1, d - 1) / n;
      CHECK(J.sigma_sq == doctest::Approx(want).epsilon(1e-12));
      CHECK(J.support_size == static_cast<std::size_t>(n));
    }
  }
}

TEST_CASE("validation rejects bad kernels") {
  LatticeField f(1, 1);
  f.set({1}, 0.5);
  f.set({-1}, 0.5);
  CHECK_NOTHROW(validate(f));
  LatticeField asym = f;
  asym.set({1}, 0.7);
  asym.set({-1}, 0.3);
  CHECK_THROWS_AS(validate(asym), KernelValidationError);
  LatticeField origin = f;
  origin.set({0}, 0.2);
  origin.set({1}, 0.4);
  origin.set({-1}, 0.4);
  CHECK_THROWS_AS(validate(origin), KernelValidationError);
  LatticeField unnorm = f;
  unnorm.set({1}, 0.6);
  unnorm.set({-1}, 0.6);
  CHECK_THROWS_AS(validate(unnorm), KernelValidationError);
  CHECK_THROWS(make_kernel("triangular", 2, 1));
}

TEST_CASE("kernel application is the one-step walk") {
  AdmissibleKernel J = nearest_neighbour(2);
  LatticeField v = LatticeField::delta(2);
  LatticeField w = kernel_apply(J, v);
  CHECK(w.sum() == doctest::Approx(1.0));
  CHECK(w.at({1, 0}) == doctest::Approx(0.25));
  CHECK(w.at({1, 1}) == 0.0);
}

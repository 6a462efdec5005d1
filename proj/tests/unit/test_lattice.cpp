#include <cmath>

#include "doctest.h"
#include "mflab/kernels.hpp"
#include "mflab/lattice.hpp"
#include "mflab/rng.hpp"

using namespace mflab;

TEST_CASE("philox known answers") {
  auto a = philox4x32({0, 0, 0, 0}, {0, 0});
  CHECK(a[0] == 0x6627e8d5u);
  CHECK(a[1] == 0xe169c58du);
  CHECK(a[2] == 0xbc57ac4cu);
  CHECK(a[3] == 0x9b00dbd8u);
  auto b = philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
  CHECK(b[0] == 0x408f276du);
  CHECK(b[1] == 0x41c83b0eu);
  CHECK(b[2] == 0xa20bc7c6u);
  CHECK(b[3] == 0x6d5451fdu);
}

TEST_CASE("counter rng streams are reproducible and independent of order") {
  CounterRng r1(7, 3), r2(7, 3), r3(7, 4);
  for (int i = 0; i < 100; ++i) {
    double u = r1.uniform();
    CHECK(u == r2.uniform());
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
  CHECK(CounterRng(7, 3).next_u64() != r3.next_u64());
}

TEST_CASE("field indexing round trip") {
  LatticeField f(3, 2);
  CHECK(f.size() == 125u);
  for (std::size_t i = 0; i < f.size(); i += 7) CHECK(f.index_of(f.point_of(i)) == i);
  f.set({1, -2, 0}, 3.5);
  CHECK(f.at({1, -2, 0}) == 3.5);
  CHECK(f.origin() == 0.0);
  CHECK(norm_inf({1, -4, 2}) == 4);
  CHECK(norm2_sq({1, -4, 2}) == 21);
}

TEST_CASE("direct and FFT convolution agree") {
  CounterRng rng(1, 1);
  LatticeField f(2, 3), g(2, 4);
  for (auto& v : f.values) v = rng.uniform();
  for (auto& v : g.values) v = rng.uniform();
  LatticeField a = convolve(f, g, {-1, ConvMethod::Direct});
  LatticeField b = convolve(f, g, {-1, ConvMethod::Fft});
  REQUIRE(a.L == 7);
  REQUIRE(b.L == 7);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.values[i] - b.values[i]));
  CHECK(worst < 1e-12);
  // Mass is multiplicative.
  CHECK(a.sum() == doctest::Approx(f.sum() * g.sum()).epsilon(1e-13));
}

TEST_CASE("truncated convolution moves mass to the tail") {
  LatticeField f(1, 3);
  for (auto& v : f.values) v = 1.0;
  LatticeField c = convolve(f, f, {2, ConvMethod::Direct});
  CHECK(c.L == 2);
  CHECK(c.sum() + c.tail_bound == doctest::Approx(49.0));
}

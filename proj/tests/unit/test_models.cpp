#include <cmath>

#include "doctest.h"
#include "mflab/model_lattice_trees.hpp"
#include "mflab/model_percolation.hpp"
#include "mflab/model_saw.hpp"
#include "mflab/model_spin.hpp"

using namespace mflab;

TEST_CASE("SAW counts on the square lattice") {
  // Self-avoiding walk counts c_n on Z^2: 1, 4, 12, 36, 100, 284, 780, 2172, 5916.
  const long counts[] = {1, 4, 12, 36, 100, 284, 780, 2172, 5916};
  SawSeries s = saw_enumerate(nearest_neighbour(2), Rational(1), 8);
  for (int n = 0; n <= 8; ++n) CHECK(s.total(n) == Rational(counts[n]) / rational_pow(Rational(4), n));
}

TEST_CASE("SAW with lambda = 0 is the simple random walk") {
  SawSeries s = saw_enumerate(nearest_neighbour(3), Rational(0), 5);
  for (int n = 0; n <= 5; ++n) CHECK(s.total(n) == Rational(1));
  // c_2(0) = 1/6 (step out and back).
  CHECK(s.coefficient(2, {0, 0, 0}) == Rational(1, 6));
}

TEST_CASE("SAW two-step total closed form") {
  for (int d : {1, 2, 3}) {
    for (Rational lam : {Rational(0), Rational(1, 3), Rational(1)}) {
      SawSeries s = saw_enumerate(nearest_neighbour(d), lam, 2);
      Rational want = Rational(2 * d - 1, 2 * d) + (Rational(1) - lam) / Rational(2 * d);
      CHECK(s.total(2) == want);
    }
  }
}

TEST_CASE("SAW inequalities hold exactly") {
  SawSeries s = saw_enumerate(nearest_neighbour(2), Rational(1, 2), 6);
  CHECK(saw_check_I1(s, Rational(1, 10), Rational(3, 10)).pass);
  CHECK(saw_check_I2(s, Rational(1, 5)).pass);
}

TEST_CASE("percolation on a single edge and a triangle") {
  ExactPerc e = perc_exact(single_edge_graph());
  CHECK(e.at(0, 1).eval(Rational(1, 3)) == Rational(1, 3));
  PercGraph t;
  t.name = "triangle";
  t.n = 3;
  t.edges = {{0, 1}, {1, 2}, {0, 2}};
  t.J = {Rational(1), Rational(1), Rational(1)};
  ExactPerc ex = perc_exact(t);
  for (Rational p : {Rational(1, 5), Rational(1, 2), Rational(9, 10)}) {
    Rational want = p + p * p - p * p * p;
    CHECK(ex.at(0, 1).eval(p) == want);
  }
}

TEST_CASE("percolation Monte Carlo matches the exact value") {
  PercGraph g = patch_graph(nearest_neighbour(2), 3);
  ExactPerc ex = perc_exact(g, false);
  double beta = 2.0;  // edge probability 1/2
  PercMc mc = perc_mc(g, beta, 40000, 99);
  for (int x = 1; x < g.n; ++x) {
    double exact = ex.at(0, x).eval(beta);
    CHECK(std::abs(mc.mean[x] - exact) <= 4.0 * mc.stderr_[x] + 1e-12);
  }
}

TEST_CASE("percolation exact inequalities") {
  PercGraph g = torus_graph(nearest_neighbour(1), 5);
  ExactPerc ex = perc_exact(g, true);
  auto grid = perc_beta_grid(g, 6);
  CHECK(perc_check_I1_exact(ex, grid).pass);
  CHECK(perc_check_I2_exact(ex, grid).pass);
  CHECK(perc_check_fkg(ex, grid).pass);
}

TEST_CASE("Ising free chain: <s0 sx> = tanh(beta J)^|x|") {
  IsingVolume v = ising_shape(nearest_neighbour(1), "6");
  double beta = 1.3, t = std::tanh(beta * 0.5);
  for (int x = 0; x < 6; ++x) CHECK(ising_two_point(v, {x}, beta) == doctest::Approx(std::pow(t, x)).epsilon(1e-12));
}

TEST_CASE("Ising ring: transfer matrix value") {
  // On a ring of n sites, <s0 sx> = (t^x + t^{n-x}) / (1 + t^n).
  IsingVolume v = ising_shape(nearest_neighbour(1), "8p");
  double beta = 0.9, t = std::tanh(beta * 0.5);
  IsingExact ex = ising_exact(v, false);
  for (int i = 0; i < v.size(); ++i) {
    int x = ((v.sites[i][0] % 8) + 8) % 8;
    double want = (std::pow(t, x) + std::pow(t, 8 - x)) / (1 + std::pow(t, 8));
    CHECK(ex.two_point(0, i, beta) == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("Ising inequalities on a small box") {
  IsingExact ex = ising_exact(ising_shape(nearest_neighbour(2), "2x2"));
  auto grid = ising_beta_grid(1.5, 6);
  CHECK(ising_check_I1(ex, grid, true).pass);
  CHECK(ising_check_I1(ex, grid, false).pass);
  CHECK(ising_check_I2(ex, grid).pass);
  CHECK(ising_check_griffiths(ex, grid).pass);
}

TEST_CASE("lattice tree counts on the square lattice") {
  // Trees with n bonds up to translation: 1, 2, 6, 22, 87. By hand for n = 4:
  // 50 paths (c_4/2), 1 plus-shape, 36 T-shapes with one arm extended.
  TreeSeries s = lt_enumerate(nearest_neighbour(2), 4);
  const long want[] = {1, 2, 6, 22, 87};
  for (int n = 0; n <= 4; ++n) CHECK(s.animal_counts[n] == BigInt(want[n]));
  CHECK(lt_check_dg(s).pass);
  CHECK(lt_check_symmetry(s).pass);
}

TEST_CASE("lattice trees in d=1") {
  TreeSeries s = lt_enumerate(nearest_neighbour(1), 2);
  RationalPoly g = s.g_poly();
  REQUIRE(g.coeffs.size() >= 3);
  CHECK(g.coeffs[0] == Rational(1));
  CHECK(g.coeffs[1] == Rational(1));
  CHECK(g.coeffs[2] == Rational(3, 4));
}

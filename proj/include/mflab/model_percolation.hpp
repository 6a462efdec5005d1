#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mflab/kernels.hpp"
#include "mflab/rational.hpp"
#include "mflab/report.hpp"

namespace mflab {

// Finite graph for bond percolation. Edge e is open with probability beta J_e.
// Vertex 0 plays the role of the origin.
struct PercGraph {
  std::string name;
  int n = 0;
  std::vector<std::array<int, 2>> edges;
  std::vector<Rational> J;
  std::vector<Point> coords;  // optional labels
  // Torus structure (vertex-transitive; enables translation averaging).
  bool torus = false;
  int d = 0;
  int L = 0;
  std::vector<Point> torus_offsets;  // per edge, the kernel offset v - u

  double max_beta() const;  // 1 / max J_e
  std::string to_json() const;
};

PercGraph single_edge_graph(const Rational& J = Rational(1));
// Side-L torus with edges {x, x+s} for the kernel support; L > 2 R required.
PercGraph torus_graph(const AdmissibleKernel& K, int L);
// Free-boundary box {0..side-1}^d with the kernel's edges inside it.
PercGraph patch_graph(const AdmissibleKernel& K, int side);
PercGraph perc_graph_from_json(const std::string& text);

// P[a <-> b] as exact polynomials in beta, for all pairs (|E| <= 20) or from
// vertex 0 only (|E| <= 24), plus P[0 <-> x, 0 <-> y].
struct ExactPerc {
  PercGraph graph;
  bool all_pairs = true;
  std::vector<RationalPoly> G;      // n*n row-major (source rows; only row 0 when !all_pairs)
  std::vector<RationalPoly> joint;  // n*n: P[0<->x, 0<->y]
  std::uint64_t configurations = 0;

  const RationalPoly& at(int a, int b) const { return G[static_cast<std::size_t>(a) * graph.n + b]; }
};

ExactPerc perc_exact(const PercGraph& g, bool all_pairs = true);
RationalPoly two_point_exact(const PercGraph& g, int x);

// beta grid 0 .. max_beta with n points.
std::vector<Rational> perc_beta_grid(const PercGraph& g, int n);

// G_b(a,x) - G_b'(a,x) <= (b-b') sum_{(u,v)} G_b'(a,u) J_uv G_b(v,x), every a, x,
// every grid pair b' < b; exact rational evaluation.
InequalityReport perc_check_I1_exact(const ExactPerc& ex, const std::vector<Rational>& grid, double tol = 1e-12);
// dG >= G J G - G H G with H(z,y) = (G J G)(z,y) G(z,y); also dG >= 0.
InequalityReport perc_check_I2_exact(const ExactPerc& ex, const std::vector<Rational>& grid, double tol = 1e-12);
// P[0<->x, 0<->y] >= P[0<->x] P[0<->y] on the grid.
InequalityReport perc_check_fkg(const ExactPerc& ex, const std::vector<Rational>& grid, double tol = 1e-12);

// Monte Carlo. For tori the estimator averages over translations.
struct PercMc {
  std::string graph;
  double beta = 0.0;
  std::uint64_t trials = 0;
  std::uint64_t seed = 0;
  // Per vertex (graphs) or per torus displacement (tori, vertex index = displacement).
  std::vector<double> mean;
  std::vector<double> stderr_;
  double chi = 0.0, chi_err = 0.0;
  double xi_sq = 0.0, xi_sq_err = 0.0;
  double open_triangle = 0.0, open_triangle_err = 0.0;  // tori only
  int blocks = 0;
  LatticeField field;  // tori only: mean on Λ_{L/2}
  nlohmann::json to_json(bool with_sites) const;
};

PercMc perc_mc(const PercGraph& g, double beta, std::uint64_t trials, std::uint64_t seed);

// MC chi within 3 standard errors of the exact chi = sum_x P[0<->x].
InequalityReport perc_mc_oracle_check(const std::vector<PercGraph>& graphs, const std::vector<double>& betas,
                                      std::uint64_t trials, std::uint64_t seed);

// Memory guard for tori.
std::size_t perc_torus_site_limit();

}  // namespace mflab

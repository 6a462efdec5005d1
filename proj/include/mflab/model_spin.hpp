#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mflab/kernels.hpp"
#include "mflab/report.hpp"

namespace mflab {

// Ising model on a finite site set with H = -(1/2) sum_{x,y} J_{y-x} s_x s_y,
// i.e. pair coupling J per unordered bond. The kernel must be uniform.
struct IsingVolume {
  std::string name;
  AdmissibleKernel kernel;
  std::vector<Point> sites;  // sites[0] is the origin of the two-point function
  std::vector<std::array<int, 2>> bonds;
  // Side of the torus when periodic (0: free boundary). Sites then carry
  // minimal-image coordinates and displacements wrap.
  int period = 0;

  int size() const { return static_cast<int>(sites.size()); }
  int index_of(const Point& x) const;  // -1 if absent
  Point displacement(const Point& a, const Point& b) const;  // b - a, wrapped when periodic
};

IsingVolume ising_volume(const AdmissibleKernel& J, const std::vector<Point>& sites, std::string name = "",
                         int period = 0);
// {0..a-1} x {0..b-1} ... for shapes like "2x2" or "6" (a chain). A trailing
// "p" ("8p", "3x3p") makes it a torus; all sides must then agree and exceed 2R.
IsingVolume ising_shape(const AdmissibleKernel& J, const std::string& shape);

std::size_t ising_site_limit();

// Bond-sum histograms: Z = sum_k N_k e^{beta J k}, and for each tracked pair
// sum_k M_k e^{beta J k} for <s_a s_b>. All pairs for |Λ| <= 14, else only
// pairs (0, x).
struct IsingExact {
  IsingVolume volume;
  bool all_pairs = true;
  int kmax = 0;                               // number of bonds
  std::vector<std::uint64_t> N;               // index k + kmax
  std::vector<std::vector<std::int64_t>> M;   // per pair a*n+b (or x)
  std::uint64_t configurations = 0;

  double two_point(int a, int b, double beta) const;
  double derivative(int a, int b, double beta) const;
  // Full matrices at beta (row-major n x n).
  void matrices(double beta, std::vector<double>& G, std::vector<double>& dG) const;
};

IsingExact ising_exact(const IsingVolume& v, bool all_pairs = true);

double ising_two_point(const IsingVolume& v, const Point& x, double beta);
double ising_two_point_derivative(const IsingVolume& v, const Point& x, double beta);

std::vector<double> ising_beta_grid(double beta_max, int n);

// G_b(a,x) <= G_b'(a,x) + (b-b') sum_{u,v} G(a,u) J_{v-u} G_b(v,x) with
// G = G_b' (assumption form) or G = G_b (finite-volume lemma form).
InequalityReport ising_check_I1(const IsingExact& ex, const std::vector<double>& grid, bool lemma_form,
                                double tol = 1e-12);
// dG(a,x) >= sum G J G - 3 sum K(a,z) K(z,u) J_{v-u} K(v,z) K(z,x), K = G + beta F_Λ,
// sums over Λ and its outer J-layer.
InequalityReport ising_check_I2(const IsingExact& ex, const std::vector<double>& grid, double tol = 1e-12);
// Griffiths: dG >= 0, G(a,a) = 1, K >= G.
InequalityReport ising_check_griffiths(const IsingExact& ex, const std::vector<double>& grid, double tol = 1e-12);

}  // namespace mflab

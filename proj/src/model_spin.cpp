#include "mflab/model_spin.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <sstream>

#include "mflab/parallel.hpp"

namespace mflab {

int IsingVolume::index_of(const Point& x) const {
  for (int i = 0; i < size(); ++i)
    if (sites[i] == x) return i;
  return -1;
}

std::size_t ising_site_limit() { return 22; }

Point IsingVolume::displacement(const Point& a, const Point& b) const {
  Point dlt(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    int v = b[k] - a[k];
    if (period > 0) {
      v = ((v % period) + period) % period;
      if (2 * v > period) v -= period;
    }
    dlt[k] = v;
  }
  return dlt;
}

IsingVolume ising_volume(const AdmissibleKernel& J, const std::vector<Point>& sites, std::string name, int period) {
  if (!J.uniform()) throw std::invalid_argument("ising: kernel must be uniform on its support");
  if (sites.empty()) throw std::invalid_argument("ising: empty volume");
  if (sites.size() > ising_site_limit())
    throw std::length_error("ising: " + std::to_string(sites.size()) + " sites exceeds the limit of " +
                            std::to_string(ising_site_limit()));
  IsingVolume v;
  v.name = std::move(name);
  v.kernel = J;
  v.sites = sites;
  v.period = period;
  if (period != 0 && period <= 2 * J.R) throw std::invalid_argument("ising: torus side must exceed 2R");
  for (const auto& s : sites)
    if (static_cast<int>(s.size()) != J.d) throw std::invalid_argument("ising: site dimension mismatch");
  for (int a = 0; a < v.size(); ++a)
    for (int b = a + 1; b < v.size(); ++b) {
      Point dlt = v.displacement(sites[a], sites[b]);
      if (norm_inf(dlt) <= J.R && J.value(dlt) > 0) v.bonds.push_back({a, b});
    }
  return v;
}

IsingVolume ising_shape(const AdmissibleKernel& J, const std::string& shape) {
  std::vector<int> dims;
  std::string body = shape;
  const bool periodic = !body.empty() && body.back() == 'p';
  if (periodic) body.pop_back();
  std::stringstream ss(body);
  std::string tok;
  while (std::getline(ss, tok, 'x')) dims.push_back(std::stoi(tok));
  if (dims.empty() || static_cast<int>(dims.size()) > J.d) throw std::invalid_argument("ising: bad shape " + shape);
  for (int n : dims)
    if (n < 1) throw std::invalid_argument("ising: bad shape " + shape);
  if (periodic) {
    for (int n : dims)
      if (n != dims[0]) throw std::invalid_argument("ising: periodic shapes need equal sides, got " + shape);
  }
  while (static_cast<int>(dims.size()) < J.d) dims.push_back(1);
  std::vector<Point> sites;
  Point x(J.d, 0);
  while (true) {
    sites.push_back(x);
    int a = J.d - 1;
    for (; a >= 0; --a) {
      if (++x[a] < dims[a]) break;
      x[a] = 0;
    }
    if (a < 0) break;
  }
  const int period = periodic ? dims[0] : 0;
  if (periodic) {
    // Minimal-image coordinates around the origin.
    for (auto& p : sites)
      for (auto& c : p)
        if (2 * c > period) c -= period;
  }
  return ising_volume(J, sites, shape + " " + J.name(), period);
}

IsingExact ising_exact(const IsingVolume& v, bool all_pairs) {
  const int n = v.size();
  if (n > 14) all_pairs = false;
  IsingExact ex;
  ex.volume = v;
  ex.all_pairs = all_pairs;
  ex.kmax = static_cast<int>(v.bonds.size());
  const int K = 2 * ex.kmax + 1;
  const std::size_t npairs = all_pairs ? static_cast<std::size_t>(n) * n : static_cast<std::size_t>(n);
  std::vector<std::vector<int>> nbr(n);
  for (const auto& b : v.bonds) {
    nbr[b[0]].push_back(b[1]);
    nbr[b[1]].push_back(b[0]);
  }
  // s_0 = +1 by the global flip symmetry; Gray code over the other n-1 spins.
  const std::uint64_t total = n > 1 ? (std::uint64_t{1} << (n - 1)) : 1;
  const std::size_t nchunks = static_cast<std::size_t>(std::min<std::uint64_t>(64, total));
  struct Acc {
    std::vector<std::uint64_t> N;
    std::vector<std::int64_t> M;
  };
  std::vector<Acc> acc(nchunks);
  parallel_for(nchunks, [&](std::size_t c) {
    Acc& a = acc[c];
    a.N.assign(K, 0);
    a.M.assign(npairs * K, 0);
    std::uint64_t lo = total * c / nchunks, hi = total * (c + 1) / nchunks;
    std::vector<int> s(n, 1);
    std::uint64_t g0 = lo ^ (lo >> 1);
    for (int i = 1; i < n; ++i) s[i] = (g0 >> (i - 1) & 1) ? -1 : 1;
    int k = 0;
    for (const auto& b : v.bonds) k += s[b[0]] * s[b[1]];
    for (std::uint64_t i = lo; i < hi; ++i) {
      if (i > lo) {
        int flip = std::countr_zero(i) + 1;
        int loc = 0;
        for (int j : nbr[flip]) loc += s[j];
        k -= 2 * s[flip] * loc;
        s[flip] = -s[flip];
      }
      const int kk = k + ex.kmax;
      ++a.N[kk];
      if (all_pairs) {
        for (int p = 0; p < n; ++p)
          for (int q = 0; q < n; ++q) a.M[(static_cast<std::size_t>(p) * n + q) * K + kk] += s[p] * s[q];
      } else {
        for (int q = 0; q < n; ++q) a.M[static_cast<std::size_t>(q) * K + kk] += s[q];
      }
    }
  });
  ex.N.assign(K, 0);
  ex.M.assign(npairs, std::vector<std::int64_t>(K, 0));
  for (const auto& a : acc) {
    for (int k = 0; k < K; ++k) ex.N[k] += a.N[k];
    for (std::size_t p = 0; p < npairs; ++p)
      for (int k = 0; k < K; ++k) ex.M[p][k] += a.M[p * K + k];
  }
  ex.configurations = total * 2;
  return ex;
}

namespace {

struct Weights {
  std::vector<double> w, kw;  // e^{bJ(k-kmax)}, J k e^{...}
  double Z = 0, dZ = 0;
};

Weights weights(const IsingExact& ex, double beta) {
  const double J = to_double(ex.volume.kernel.weight);
  const int K = 2 * ex.kmax + 1;
  Weights w;
  w.w.resize(K);
  w.kw.resize(K);
  for (int i = 0; i < K; ++i) {
    int k = i - ex.kmax;
    w.w[i] = std::exp(beta * J * (k - ex.kmax));
    w.kw[i] = J * k * w.w[i];
    w.Z += static_cast<double>(ex.N[i]) * w.w[i];
    w.dZ += static_cast<double>(ex.N[i]) * w.kw[i];
  }
  return w;
}

std::size_t pair_slot(const IsingExact& ex, int a, int b) {
  const int n = ex.volume.size();
  if (ex.all_pairs) return static_cast<std::size_t>(a) * n + b;
  if (a != 0) throw std::invalid_argument("ising: only pairs from site 0 were tracked");
  return static_cast<std::size_t>(b);
}

void eval_pair(const IsingExact& ex, const Weights& w, std::size_t slot, double& g, double& dg) {
  double num = 0, dnum = 0;
  const auto& m = ex.M[slot];
  for (std::size_t i = 0; i < m.size(); ++i) {
    num += static_cast<double>(m[i]) * w.w[i];
    dnum += static_cast<double>(m[i]) * w.kw[i];
  }
  g = num / w.Z;
  dg = (dnum * w.Z - num * w.dZ) / (w.Z * w.Z);
}

std::vector<double> jmatrix(const IsingVolume& v, const std::vector<Point>& sites) {
  const int n = static_cast<int>(sites.size());
  std::vector<double> J(static_cast<std::size_t>(n) * n, 0.0);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      if (a == b) continue;
      Point dlt = v.displacement(sites[a], sites[b]);
      if (norm_inf(dlt) <= v.kernel.R) J[a * n + b] = v.kernel.value(dlt);
    }
  return J;
}

std::vector<double> matmul(const std::vector<double>& A, const std::vector<double>& B, int n) {
  std::vector<double> C(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      double a = A[i * n + k];
      if (a == 0.0) continue;
      for (int j = 0; j < n; ++j) C[i * n + j] += a * B[k * n + j];
    }
  return C;
}

void require_all_pairs(const IsingExact& ex) {
  if (!ex.all_pairs) throw std::invalid_argument("ising check needs all pairs (at most 14 sites)");
}

}  // namespace

double IsingExact::two_point(int a, int b, double beta) const {
  Weights w = weights(*this, beta);
  double g, dg;
  eval_pair(*this, w, pair_slot(*this, a, b), g, dg);
  return g;
}

double IsingExact::derivative(int a, int b, double beta) const {
  Weights w = weights(*this, beta);
  double g, dg;
  eval_pair(*this, w, pair_slot(*this, a, b), g, dg);
  return dg;
}

void IsingExact::matrices(double beta, std::vector<double>& G, std::vector<double>& dG) const {
  require_all_pairs(*this);
  const int n = volume.size();
  Weights w = weights(*this, beta);
  G.assign(static_cast<std::size_t>(n) * n, 0.0);
  dG.assign(G.size(), 0.0);
  for (std::size_t p = 0; p < G.size(); ++p) eval_pair(*this, w, p, G[p], dG[p]);
}

double ising_two_point(const IsingVolume& v, const Point& x, double beta) {
  int i = v.index_of(x);
  if (i < 0) return 0.0;
  return ising_exact(v, false).two_point(0, i, beta);
}

double ising_two_point_derivative(const IsingVolume& v, const Point& x, double beta) {
  int i = v.index_of(x);
  if (i < 0) return 0.0;
  return ising_exact(v, false).derivative(0, i, beta);
}

std::vector<double> ising_beta_grid(double beta_max, int n) {
  std::vector<double> g;
  for (int i = 0; i < n; ++i) g.push_back(beta_max * i / (n - 1));
  return g;
}

InequalityReport ising_check_I1(const IsingExact& ex, const std::vector<double>& grid, bool lemma_form, double tol) {
  require_all_pairs(ex);
  InequalityReport r = make_report(lemma_form ? "ising_I1_lemma" : "ising_I1",
                                   lemma_form ? "finite-volume G_b <= G_b' + (b-b') G_b J G_b"
                                              : "finite-volume G_b <= G_b' + (b-b') G_b' J G_b",
                                   tol);
  r.grid = ex.volume.name + "; " + std::to_string(grid.size()) + "-point beta grid, all pairs b' < b";
  const int n = ex.volume.size();
  auto J = jmatrix(ex.volume, ex.volume.sites);
  std::vector<std::vector<double>> G(grid.size()), dG(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) ex.matrices(grid[i], G[i], dG[i]);
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t k = i + 1; k < grid.size(); ++k) {
      const auto& left = lemma_form ? G[k] : G[i];
      auto rhs = matmul(matmul(left, J, n), G[k], n);
      double db = grid[k] - grid[i];
      for (int a = 0; a < n; ++a)
        for (int x = 0; x < n; ++x) {
          std::size_t q = static_cast<std::size_t>(a) * n + x;
          double res = G[i][q] + db * rhs[q] - G[k][q];
          r.record_with(res, [&] {
            return "b'=" + fmt(grid[i]) + " b=" + fmt(grid[k]) + " a=" + std::to_string(a) + " x=" + std::to_string(x);
          });
        }
    }
  r.finalize();
  return r;
}

InequalityReport ising_check_I2(const IsingExact& ex, const std::vector<double>& grid, double tol) {
  require_all_pairs(ex);
  InequalityReport r = make_report(
      "ising_I2", "dG >= G J G - 3 sum K K J K K with K = G + beta F, finite volume", tol);
  r.grid = ex.volume.name + "; " + std::to_string(grid.size()) + "-point beta grid, all sources";
  const IsingVolume& v = ex.volume;
  const int n = v.size();
  // Λ followed by its outer J-layer.
  std::vector<Point> ext = v.sites;
  if (v.period == 0) {
    std::map<Point, int> seen;
    for (int i = 0; i < n; ++i) seen[v.sites[i]] = i;
    for (int i = 0; i < n; ++i)
      for (const auto& [off, w] : v.kernel.support()) {
        (void)w;
        Point y = v.sites[i];
        for (int k = 0; k < v.kernel.d; ++k) y[k] += off[k];
        if (!seen.count(y)) {
          seen[y] = static_cast<int>(ext.size());
          ext.push_back(y);
        }
      }
  }
  const int m = static_cast<int>(ext.size());
  auto Jx = jmatrix(v, ext);
  auto Jin = jmatrix(v, v.sites);
  for (double b : grid) {
    std::vector<double> G, dG;
    ex.matrices(b, G, dG);
    std::vector<double> Gx(static_cast<std::size_t>(m) * m, 0.0);
    for (int a = 0; a < n; ++a)
      for (int c = 0; c < n; ++c) Gx[a * m + c] = G[a * n + c];
    // (G J)(x, y) = sum_z G(x,z) J_{y-z}; F = max of both orientations.
    auto GJ = matmul(Gx, Jx, m);
    std::vector<double> K(Gx.size());
    for (int x = 0; x < m; ++x)
      for (int y = 0; y < m; ++y) K[x * m + y] = Gx[x * m + y] + b * std::max(GJ[x * m + y], GJ[y * m + x]);
    auto KJK = matmul(matmul(K, Jx, m), K, m);
    auto GJG = matmul(matmul(G, Jin, n), G, n);
    for (int a = 0; a < n; ++a)
      for (int x = 0; x < n; ++x) {
        double S = 0.0;
        for (int z = 0; z < m; ++z) S += K[a * m + z] * KJK[z * m + z] * K[z * m + x];
        S *= 3.0;
        std::size_t q = static_cast<std::size_t>(a) * n + x;
        double res = dG[q] - (GJG[q] - S);
        r.record_with(res, [&] { return "b=" + fmt(b) + " a=" + std::to_string(a) + " x=" + std::to_string(x); });
      }
  }
  r.details["outer_layer_sites"] = m - n;
  r.finalize();
  return r;
}

InequalityReport ising_check_griffiths(const IsingExact& ex, const std::vector<double>& grid, double tol) {
  require_all_pairs(ex);
  InequalityReport r = make_report("ising_griffiths", "dG >= 0 and G(a,a) = 1", tol);
  r.grid = ex.volume.name + "; " + std::to_string(grid.size()) + "-point beta grid";
  const int n = ex.volume.size();
  for (double b : grid) {
    std::vector<double> G, dG;
    ex.matrices(b, G, dG);
    for (int a = 0; a < n; ++a) {
      r.record(-std::abs(G[a * n + a] - 1.0), "b=" + fmt(b) + " G(a,a), a=" + std::to_string(a));
      for (int x = 0; x < n; ++x)
        r.record_with(dG[a * n + x], [&] { return "b=" + fmt(b) + " dG a=" + std::to_string(a) + " x=" + std::to_string(x); });
    }
  }
  r.finalize();
  return r;
}

}  // namespace mflab

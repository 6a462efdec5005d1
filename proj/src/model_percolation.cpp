#include "mflab/model_percolation.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "mflab/parallel.hpp"
#include "mflab/rng.hpp"

namespace mflab {

namespace {

using Json = nlohmann::json;

double signed_double(const Rational& r) {
  double v = to_double(r);
  if (r < 0 && v >= 0) return -std::numeric_limits<double>::denorm_min();
  return v;
}

// Union-find with epoch stamps so a trial never clears the arrays.
struct UnionFind {
  std::vector<int> parent, size;
  std::vector<std::uint32_t> stamp;
  std::uint32_t epoch = 0;

  explicit UnionFind(int n) : parent(n), size(n), stamp(n, 0) {}
  void reset() { ++epoch; }
  int find(int a) {
    if (stamp[a] != epoch) {
      stamp[a] = epoch;
      parent[a] = a;
      size[a] = 1;
      return a;
    }
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (size[a] < size[b]) std::swap(a, b);
    parent[b] = a;
    size[a] += size[b];
  }
};

// Positive half of the kernel support (first nonzero coordinate > 0).
std::vector<std::pair<Point, double>> half_support(const AdmissibleKernel& K) {
  std::vector<std::pair<Point, double>> out;
  for (const auto& [x, v] : K.support()) {
    int first = 0;
    for (int c : x)
      if (c != 0) {
        first = c;
        break;
      }
    if (first > 0) out.emplace_back(x, v);
  }
  return out;
}

Rational kernel_rational(const AdmissibleKernel& K, double v) {
  return K.uniform() ? K.weight : rational_from_double(v);
}

}  // namespace

double PercGraph::max_beta() const {
  Rational m = 0;
  for (const auto& j : J) m = std::max(m, j);
  return m > 0 ? to_double(Rational(1) / m) : kInf;
}

std::string PercGraph::to_json() const {
  Json j;
  j["name"] = name;
  j["n"] = n;
  Json es = Json::array();
  for (std::size_t e = 0; e < edges.size(); ++e)
    es.push_back({{"u", edges[e][0]}, {"v", edges[e][1]}, {"J", to_string(J[e])}});
  j["edges"] = es;
  if (!coords.empty()) j["coords"] = coords;
  if (torus) j["torus"] = {{"d", d}, {"L", L}};
  return j.dump();
}

PercGraph single_edge_graph(const Rational& Jv) {
  PercGraph g;
  g.name = "single_edge";
  g.n = 2;
  g.edges = {{0, 1}};
  g.J = {Jv};
  g.coords = {{0}, {1}};
  return g;
}

PercGraph torus_graph(const AdmissibleKernel& K, int L) {
  if (L <= 2 * K.R) throw std::invalid_argument("torus_graph: need L > 2 R");
  double sites = std::pow(static_cast<double>(L), K.d);
  if (sites > static_cast<double>(perc_torus_site_limit()))
    throw std::length_error("torus_graph: L^d = " + fmt(sites) + " exceeds the site guard");
  PercGraph g;
  g.name = "torus d=" + std::to_string(K.d) + " L=" + std::to_string(L) + " " + K.name();
  g.torus = true;
  g.d = K.d;
  g.L = L;
  g.n = static_cast<int>(sites);
  auto half = half_support(K);
  double edges = sites * static_cast<double>(half.size());
  if (edges > 2e8) throw std::length_error("torus_graph: edge count " + fmt(edges) + " exceeds the guard");
  g.coords.resize(g.n);
  for (int i = 0; i < g.n; ++i) {
    Point x(K.d);
    int r = i;
    for (int a = K.d - 1; a >= 0; --a) {
      x[a] = r % L;
      r /= L;
    }
    g.coords[i] = x;
  }
  auto index = [&](const Point& x) {
    int idx = 0;
    for (int a = 0; a < K.d; ++a) idx = idx * L + ((x[a] % L) + L) % L;
    return idx;
  };
  for (int i = 0; i < g.n; ++i) {
    for (const auto& [s, v] : half) {
      Point y = g.coords[i];
      for (int a = 0; a < K.d; ++a) y[a] += s[a];
      g.edges.push_back({i, index(y)});
      g.J.push_back(kernel_rational(K, v));
      g.torus_offsets.push_back(s);
    }
  }
  return g;
}

PercGraph patch_graph(const AdmissibleKernel& K, int side) {
  if (side < 1) throw std::invalid_argument("patch_graph: side must be positive");
  PercGraph g;
  g.name = "patch d=" + std::to_string(K.d) + " side=" + std::to_string(side) + " " + K.name();
  double sites = std::pow(static_cast<double>(side), K.d);
  if (sites > 1e6) throw std::length_error("patch_graph: too many sites");
  g.n = static_cast<int>(sites);
  g.coords.resize(g.n);
  for (int i = 0; i < g.n; ++i) {
    Point x(K.d);
    int r = i;
    for (int a = K.d - 1; a >= 0; --a) {
      x[a] = r % side;
      r /= side;
    }
    g.coords[i] = x;
  }
  auto half = half_support(K);
  for (int i = 0; i < g.n; ++i) {
    for (const auto& [s, v] : half) {
      Point y = g.coords[i];
      bool inside = true;
      int idx = 0;
      for (int a = 0; a < K.d; ++a) {
        y[a] += s[a];
        if (y[a] < 0 || y[a] >= side) inside = false;
        idx = idx * side + y[a];
      }
      if (!inside) continue;
      g.edges.push_back({i, idx});
      g.J.push_back(kernel_rational(K, v));
    }
  }
  return g;
}

PercGraph perc_graph_from_json(const std::string& text) {
  Json j = Json::parse(text);
  PercGraph g;
  g.name = j.value("name", std::string("graph"));
  g.n = j.at("n").get<int>();
  if (g.n < 1) throw std::invalid_argument("graph: need at least one vertex");
  for (const auto& e : j.at("edges")) {
    int u = e.at("u").get<int>(), v = e.at("v").get<int>();
    if (u < 0 || v < 0 || u >= g.n || v >= g.n || u == v) throw std::invalid_argument("graph: bad edge");
    g.edges.push_back({u, v});
    const auto& jv = e.at("J");
    g.J.push_back(jv.is_string() ? parse_rational(jv.get<std::string>()) : rational_from_double(jv.get<double>()));
    if (g.J.back() <= 0) throw std::invalid_argument("graph: J must be positive");
  }
  if (j.contains("coords")) g.coords = j.at("coords").get<std::vector<Point>>();
  return g;
}

// ---------------------------------------------------------------- exact

ExactPerc perc_exact(const PercGraph& g, bool all_pairs) {
  const int m = static_cast<int>(g.edges.size());
  const int n = g.n;
  if (m > 24) throw std::invalid_argument("perc_exact: more than 24 edges");
  if (all_pairs && m > 20) all_pairs = false;
  // Edge classes by weight; counts keyed by open edges per class.
  std::vector<Rational> cls;
  std::vector<int> cls_of(m);
  for (int e = 0; e < m; ++e) {
    auto it = std::find(cls.begin(), cls.end(), g.J[e]);
    if (it == cls.end()) {
      cls_of[e] = static_cast<int>(cls.size());
      cls.push_back(g.J[e]);
    } else {
      cls_of[e] = static_cast<int>(it - cls.begin());
    }
  }
  const int C = static_cast<int>(cls.size());
  std::vector<int> csize(C, 0), radix(C, 1);
  for (int e = 0; e < m; ++e) ++csize[cls_of[e]];
  std::size_t keys = 1;
  for (int c = C - 1; c >= 0; --c) {
    radix[c] = static_cast<int>(keys);
    keys *= csize[c] + 1;
  }
  const std::size_t rows = all_pairs ? n : 1;
  const std::size_t slots = rows * n + static_cast<std::size_t>(n) * n;  // G rows, then joint
  const std::uint64_t total = 1ull << m;
  const std::size_t nchunks = std::min<std::uint64_t>(64, std::max<std::uint64_t>(1, total >> 10));
  std::vector<std::vector<std::uint64_t>> counts(nchunks);
  parallel_for(nchunks, [&](std::size_t c) {
    std::uint64_t lo = total * c / nchunks, hi = total * (c + 1) / nchunks;
    auto& cnt = counts[c];
    cnt.assign(slots * keys, 0);
    UnionFind uf(n);
    std::vector<int> root(n);
    std::vector<int> in0;
    for (std::uint64_t w = lo; w < hi; ++w) {
      uf.reset();
      std::size_t key = 0;
      for (int e = 0; e < m; ++e)
        if (w >> e & 1) {
          uf.unite(g.edges[e][0], g.edges[e][1]);
          key += radix[cls_of[e]];
        }
      for (int v = 0; v < n; ++v) root[v] = uf.find(v);
      for (std::size_t a = 0; a < rows; ++a)
        for (int b = 0; b < n; ++b)
          if (root[a] == root[b]) ++cnt[(a * n + b) * keys + key];
      in0.clear();
      for (int v = 0; v < n; ++v)
        if (root[v] == root[0]) in0.push_back(v);
      for (int x : in0)
        for (int y : in0) ++cnt[(rows * n + static_cast<std::size_t>(x) * n + y) * keys + key];
    }
  });
  std::vector<std::uint64_t> sum(slots * keys, 0);
  for (const auto& c : counts)
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += c[i];

  // Basis polynomial per key: prod_c (j_c b)^{k_c} (1 - j_c b)^{m_c - k_c}.
  std::vector<RationalPoly> basis(keys);
  for (std::size_t key = 0; key < keys; ++key) {
    RationalPoly p;
    p.coeffs = {Rational(1)};
    std::size_t r = key;
    for (int c = 0; c < C; ++c) {
      int k = static_cast<int>(r / radix[c]);
      r %= radix[c];
      RationalPoly open, closed;
      open.coeffs = {Rational(0), cls[c]};
      closed.coeffs = {Rational(1), Rational(-cls[c])};
      for (int i = 0; i < k; ++i) p = p * open;
      for (int i = 0; i < csize[c] - k; ++i) p = p * closed;
    }
    basis[key] = p;
  }
  auto build = [&](std::size_t slot) {
    RationalPoly p;
    p.coeffs = {Rational(0)};
    for (std::size_t key = 0; key < keys; ++key) {
      std::uint64_t v = sum[slot * keys + key];
      if (v) p = p + scale(basis[key], Rational(BigInt(std::to_string(v))));
    }
    p.trim();
    return p;
  };
  ExactPerc ex;
  ex.graph = g;
  ex.all_pairs = all_pairs;
  ex.configurations = total;
  ex.G.resize(static_cast<std::size_t>(n) * n);
  ex.joint.resize(static_cast<std::size_t>(n) * n);
  for (std::size_t a = 0; a < rows; ++a)
    for (int b = 0; b < n; ++b) ex.G[a * n + b] = build(a * n + b);
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y) ex.joint[static_cast<std::size_t>(x) * n + y] = build(rows * n + x * n + y);
  return ex;
}

RationalPoly two_point_exact(const PercGraph& g, int x) {
  if (x < 0 || x >= g.n) throw std::out_of_range("two_point_exact: vertex out of range");
  ExactPerc ex = perc_exact(g, false);
  return ex.at(0, x);
}

std::vector<Rational> perc_beta_grid(const PercGraph& g, int n) {
  Rational top = 0;
  for (const auto& j : g.J) top = std::max(top, j);
  Rational bmax = Rational(1) / top;
  std::vector<Rational> out;
  for (int i = 0; i < n; ++i) out.push_back(bmax * Rational(i, n - 1));
  return out;
}

namespace {

using RMat = std::vector<Rational>;

RMat eval_matrix(const ExactPerc& ex, const Rational& b, bool deriv) {
  const int n = ex.graph.n;
  RMat M(static_cast<std::size_t>(n) * n);
  for (std::size_t i = 0; i < M.size(); ++i) {
    const RationalPoly& p = ex.G[i];
    M[i] = deriv ? p.derivative().eval(b) : p.eval(b);
  }
  return M;
}

RMat jmat(const PercGraph& g) {
  RMat J(static_cast<std::size_t>(g.n) * g.n);
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    J[g.edges[e][0] * g.n + g.edges[e][1]] += g.J[e];
    J[g.edges[e][1] * g.n + g.edges[e][0]] += g.J[e];
  }
  return J;
}

RMat matmul(const RMat& A, const RMat& B, int n) {
  RMat C(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      const Rational& a = A[i * n + k];
      if (a == 0) continue;
      for (int j = 0; j < n; ++j)
        if (B[k * n + j] != 0) C[i * n + j] += a * B[k * n + j];
    }
  return C;
}

void require_all_pairs(const ExactPerc& ex) {
  if (!ex.all_pairs) throw std::invalid_argument("percolation check needs all-pairs exact polynomials");
}

}  // namespace

InequalityReport perc_check_I1_exact(const ExactPerc& ex, const std::vector<Rational>& grid, double tol) {
  require_all_pairs(ex);
  InequalityReport r =
      make_report("perc_I1", "G_b - G_b' <= (b-b') G_b' * J * G_b via the increasing coupling", tol);
  r.grid = ex.graph.name + "; " + std::to_string(grid.size()) + "-point beta grid, all pairs b' < b";
  const int n = ex.graph.n;
  RMat J = jmat(ex.graph);
  std::vector<RMat> Gs;
  for (const auto& b : grid) Gs.push_back(eval_matrix(ex, b, false));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    RMat GJ = matmul(Gs[i], J, n);
    for (std::size_t k = i; k < grid.size(); ++k) {
      RMat rhs = matmul(GJ, Gs[k], n);
      Rational db = grid[k] - grid[i];
      for (int a = 0; a < n; ++a)
        for (int x = 0; x < n; ++x) {
          std::size_t q = static_cast<std::size_t>(a) * n + x;
          Rational res = db * rhs[q] - (Gs[k][q] - Gs[i][q]);
          r.record_with(signed_double(res), [&] {
            return "b'=" + fmt(to_double(grid[i])) + " b=" + fmt(to_double(grid[k])) + " a=" + std::to_string(a) +
                   " x=" + std::to_string(x);
          });
        }
    }
  }
  r.details["arithmetic"] = "exact rational";
  r.details["edges"] = ex.graph.edges.size();
  r.finalize();
  return r;
}

InequalityReport perc_check_I2_exact(const ExactPerc& ex, const std::vector<Rational>& grid, double tol) {
  require_all_pairs(ex);
  InequalityReport r = make_report(
      "perc_I2", "dG >= G*(J - H)*G with H = (G*J*G) G, Russo and BK on the finite graph", tol);
  r.grid = ex.graph.name + "; " + std::to_string(grid.size()) + "-point beta grid, all sources";
  const int n = ex.graph.n;
  RMat J = jmat(ex.graph);
  double worst_mono = kInf;
  for (const auto& b : grid) {
    RMat G = eval_matrix(ex, b, false), dG = eval_matrix(ex, b, true);
    RMat GJG = matmul(matmul(G, J, n), G, n);
    RMat H(GJG.size());
    for (std::size_t i = 0; i < H.size(); ++i) H[i] = GJG[i] * G[i];
    RMat GHG = matmul(matmul(G, H, n), G, n);
    for (int a = 0; a < n; ++a)
      for (int x = 0; x < n; ++x) {
        std::size_t q = static_cast<std::size_t>(a) * n + x;
        Rational res = dG[q] - (GJG[q] - GHG[q]);
        r.record_with(signed_double(res), [&] {
          return "b=" + fmt(to_double(b)) + " a=" + std::to_string(a) + " x=" + std::to_string(x);
        });
        worst_mono = std::min(worst_mono, signed_double(dG[q]));
      }
  }
  r.record(worst_mono, "monotonicity dG >= 0");
  r.details["min_dG"] = worst_mono;
  r.details["arithmetic"] = "exact rational";
  r.finalize();
  return r;
}

InequalityReport perc_check_fkg(const ExactPerc& ex, const std::vector<Rational>& grid, double tol) {
  InequalityReport r = make_report("perc_fkg", "P[0<->x, 0<->y] >= P[0<->x] P[0<->y]", tol);
  r.grid = ex.graph.name + "; " + std::to_string(grid.size()) + "-point beta grid";
  const int n = ex.graph.n;
  for (const auto& b : grid) {
    std::vector<Rational> g0(n);
    for (int x = 0; x < n; ++x) g0[x] = ex.at(0, x).eval(b);
    for (int x = 0; x < n; ++x)
      for (int y = 0; y < n; ++y) {
        Rational res = ex.joint[static_cast<std::size_t>(x) * n + y].eval(b) - g0[x] * g0[y];
        r.record_with(signed_double(res),
                      [&] { return "b=" + fmt(to_double(b)) + " x=" + std::to_string(x) + " y=" + std::to_string(y); });
      }
  }
  r.finalize();
  return r;
}

// ---------------------------------------------------------------- Monte Carlo

std::size_t perc_torus_site_limit() { return std::size_t{1} << 22; }

namespace {

int torus_diff(const PercGraph& g, int a, int b) {
  // Index of coords[b] - coords[a] mod L.
  int idx = 0;
  for (int k = 0; k < g.d; ++k) idx = idx * g.L + ((g.coords[b][k] - g.coords[a][k]) % g.L + g.L) % g.L;
  return idx;
}

Point torus_rep(const PercGraph& g, int idx) {
  Point x(g.d);
  for (int k = g.d - 1; k >= 0; --k) {
    int c = idx % g.L;
    idx /= g.L;
    x[k] = c > g.L / 2 ? c - g.L : c;
  }
  return x;
}

// Open triangle sum_x G(x) (G*J*G)(x) on the torus by FFT.
double torus_open_triangle(const PercGraph& g, const std::vector<double>& G) {
  const int V = g.n;
  std::vector<int> dims(g.d, g.L);
  fftw_complex* a = fftw_alloc_complex(V);
  fftw_complex* A = fftw_alloc_complex(V);
  fftw_complex* j = fftw_alloc_complex(V);
  fftw_complex* Jh = fftw_alloc_complex(V);
  fftw_plan pa = fftw_plan_dft(g.d, dims.data(), a, A, FFTW_FORWARD, FFTW_ESTIMATE);
  fftw_plan pj = fftw_plan_dft(g.d, dims.data(), j, Jh, FFTW_FORWARD, FFTW_ESTIMATE);
  for (int i = 0; i < V; ++i) {
    a[i][0] = G[i];
    a[i][1] = 0.0;
    j[i][0] = j[i][1] = 0.0;
  }
  // J on displacements: both orientations of every edge at vertex 0.
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    if (g.edges[e][0] != 0) continue;
    double w = to_double(g.J[e]);
    int f = torus_diff(g, 0, g.edges[e][1]);
    int b = torus_diff(g, g.edges[e][1], 0);
    j[f][0] += w;
    j[b][0] += w;
  }
  fftw_execute(pa);
  fftw_execute(pj);
  double s = 0.0;
  for (int i = 0; i < V; ++i) {
    std::complex<double> z(A[i][0], A[i][1]), w(Jh[i][0], Jh[i][1]);
    s += (z * z * z * w).real();
  }
  fftw_destroy_plan(pa);
  fftw_destroy_plan(pj);
  fftw_free(a);
  fftw_free(A);
  fftw_free(j);
  fftw_free(Jh);
  return s / V;
}

}  // namespace

PercMc perc_mc(const PercGraph& g, double beta, std::uint64_t trials, std::uint64_t seed) {
  if (beta < 0 || beta > g.max_beta() * (1 + 1e-15))
    throw std::invalid_argument("perc_mc: beta must lie in [0, 1/max J]");
  if (trials < 2) throw std::invalid_argument("perc_mc: need at least 2 trials");
  const int n = g.n;
  const std::size_t m = g.edges.size();
  std::vector<double> prob(m);
  for (std::size_t e = 0; e < m; ++e) prob[e] = beta * to_double(g.J[e]);
  // Fixed block count: blocks are the jackknife units and the merge order.
  const std::size_t B = static_cast<std::size_t>(std::min<std::uint64_t>(16, trials));
  struct Block {
    std::vector<double> s1, s2;
    double chi1 = 0, chi2 = 0;
    std::uint64_t count = 0;
  };
  std::vector<Block> blocks(B);
  parallel_for(B, [&](std::size_t bi) {
    Block& blk = blocks[bi];
    blk.s1.assign(n, 0.0);
    blk.s2.assign(n, 0.0);
    std::uint64_t t0 = trials * bi / B, t1 = trials * (bi + 1) / B;
    UnionFind uf(n);
    std::vector<double> tv(n, 0.0);
    std::vector<int> touched;
    std::vector<int> root(n), head(n), next(n);
    for (std::uint64_t t = t0; t < t1; ++t) {
      CounterRng rng(seed, t);
      uf.reset();
      for (std::size_t e = 0; e < m; ++e)
        if (rng.uniform() < prob[e]) uf.unite(g.edges[e][0], g.edges[e][1]);
      double chi_t = 0.0;
      if (g.torus) {
        std::fill(head.begin(), head.end(), -1);
        for (int v = n - 1; v >= 0; --v) {
          int r = uf.find(v);
          next[v] = head[r];
          head[r] = v;
        }
        for (int r = 0; r < n; ++r) {
          if (head[r] < 0) continue;
          for (int a = head[r]; a >= 0; a = next[a])
            for (int b = head[r]; b >= 0; b = next[b]) {
              int x = torus_diff(g, a, b);
              if (tv[x] == 0.0) touched.push_back(x);
              tv[x] += 1.0;
            }
        }
        for (int x : touched) {
          double v = tv[x] / n;
          blk.s1[x] += v;
          blk.s2[x] += v * v;
          chi_t += v;
          tv[x] = 0.0;
        }
        touched.clear();
      } else {
        int r0 = uf.find(0);
        for (int v = 0; v < n; ++v)
          if (uf.find(v) == r0) {
            blk.s1[v] += 1.0;
            blk.s2[v] += 1.0;
            chi_t += 1.0;
          }
      }
      blk.chi1 += chi_t;
      blk.chi2 += chi_t * chi_t;
      ++blk.count;
    }
  });
  PercMc out;
  out.graph = g.name;
  out.beta = beta;
  out.trials = trials;
  out.seed = seed;
  out.blocks = static_cast<int>(B);
  std::vector<double> s1(n, 0.0), s2(n, 0.0);
  double c1 = 0, c2 = 0;
  for (const auto& b : blocks) {
    for (int i = 0; i < n; ++i) {
      s1[i] += b.s1[i];
      s2[i] += b.s2[i];
    }
    c1 += b.chi1;
    c2 += b.chi2;
  }
  const double T = static_cast<double>(trials);
  out.mean.resize(n);
  out.stderr_.resize(n);
  for (int i = 0; i < n; ++i) {
    out.mean[i] = s1[i] / T;
    double var = std::max(0.0, (s2[i] / T - out.mean[i] * out.mean[i]) * T / (T - 1));
    out.stderr_[i] = std::sqrt(var / T);
  }
  out.chi = c1 / T;
  out.chi_err = std::sqrt(std::max(0.0, (c2 / T - out.chi * out.chi) * T / (T - 1)) / T);

  // Jackknife over blocks for the ratio xi^2 and (tori) the open triangle.
  auto sq_norm = [&](int i) {
    if (g.torus) return static_cast<double>(norm2_sq(torus_rep(g, i)));
    if (g.coords.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t k = 0; k < g.coords[i].size(); ++k) {
      double dlt = g.coords[i][k] - g.coords[0][k];
      s += dlt * dlt;
    }
    return s;
  };
  std::vector<double> w2(n);
  for (int i = 0; i < n; ++i) w2[i] = sq_norm(i);
  auto xi_of = [&](const std::vector<double>& G) {
    double c = 0, m2 = 0;
    for (int i = 0; i < n; ++i) {
      c += G[i];
      m2 += w2[i] * G[i];
    }
    return c > 0 ? m2 / c : 0.0;
  };
  out.xi_sq = xi_of(out.mean);
  if (g.torus) out.open_triangle = torus_open_triangle(g, out.mean);
  if (B >= 2) {
    std::vector<double> xs, ts;
    for (std::size_t b = 0; b < B; ++b) {
      std::vector<double> G(n);
      double cnt = T - static_cast<double>(blocks[b].count);
      for (int i = 0; i < n; ++i) G[i] = (s1[i] - blocks[b].s1[i]) / cnt;
      xs.push_back(xi_of(G));
      if (g.torus) ts.push_back(torus_open_triangle(g, G));
    }
    auto jk = [&](const std::vector<double>& v) {
      double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size(), s = 0;
      for (double x : v) s += (x - mean) * (x - mean);
      return std::sqrt(s * (v.size() - 1) / v.size());
    };
    out.xi_sq_err = jk(xs);
    if (g.torus) out.open_triangle_err = jk(ts);
  }
  if (g.torus) {
    out.field = LatticeField(g.d, g.L / 2);
    out.field.tail_exact = false;
    for (int i = 0; i < n; ++i) {
      Point x = torus_rep(g, i);
      out.field.set(x, out.mean[i]);
      // Even L: the antipodal layer is one torus site seen from both sides.
      for (int k = 0; k < g.d; ++k)
        if (g.L % 2 == 0 && x[k] == g.L / 2) {
          Point y = x;
          y[k] = -y[k];
          out.field.set(y, out.mean[i]);
        }
    }
  }
  return out;
}

nlohmann::json PercMc::to_json(bool with_sites) const {
  Json j = {{"graph", graph},       {"beta", beta},     {"trials", trials},           {"seed", seed},
            {"chi", chi},           {"chi_err", chi_err}, {"xi_sq", xi_sq},           {"xi_sq_err", xi_sq_err},
            {"blocks", blocks}};
  if (open_triangle != 0.0 || open_triangle_err != 0.0) {
    j["open_triangle"] = open_triangle;
    j["open_triangle_err"] = open_triangle_err;
  }
  if (with_sites) {
    j["mean"] = mean;
    j["stderr"] = stderr_;
  }
  return j;
}

InequalityReport perc_mc_oracle_check(const std::vector<PercGraph>& graphs, const std::vector<double>& betas,
                                      std::uint64_t trials, std::uint64_t seed) {
  InequalityReport r = make_report("perc_mc_oracle", "Monte Carlo chi within 3 standard errors of the exact value", 0.0);
  r.grid = std::to_string(graphs.size()) + " graphs x " + std::to_string(betas.size()) + " betas; trials=" +
           std::to_string(trials);
  Json rows = Json::array();
  for (const auto& g : graphs) {
    ExactPerc ex = perc_exact(g, false);
    for (double b : betas) {
      PercMc mc = perc_mc(g, b, trials, seed);
      Rational bq = rational_from_double(b);
      double chi = 0.0, worst_z = 0.0;
      for (int x = 0; x < g.n; ++x) {
        double e = to_double(ex.at(0, x).eval(bq));
        chi += e;
        if (mc.stderr_[x] > 0) worst_z = std::max(worst_z, std::abs(mc.mean[x] - e) / mc.stderr_[x]);
      }
      double se = mc.chi_err;
      r.record(3.0 * se - std::abs(mc.chi - chi), g.name + " beta=" + fmt(b));
      rows.push_back({{"graph", g.name},
                      {"beta", b},
                      {"chi_exact", chi},
                      {"chi_mc", mc.chi},
                      {"chi_err", se},
                      {"z", se > 0 ? (mc.chi - chi) / se : 0.0},
                      {"max_site_z", worst_z}});
    }
  }
  r.details["rows"] = rows;
  r.finalize();
  return r;
}

}  // namespace mflab

#include "mflab/model_lattice_trees.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <unordered_set>

#include "json.hpp"
#include "mflab/parallel.hpp"

namespace mflab {

namespace {

// Row-major box index, same layout as LatticeField.
struct Box {
  int d = 1, L = 0;
  std::vector<long long> stride;
  std::size_t size = 1;
  long long origin = 0;

  Box(int dim, int radius) : d(dim), L(radius), stride(dim) {
    long long s = 1;
    for (int a = d - 1; a >= 0; --a) {
      stride[a] = s;
      s *= 2 * L + 1;
    }
    size = static_cast<std::size_t>(s);
    for (int a = 0; a < d; ++a) origin += L * stride[a];
  }
  bool contains(const Point& x) const {
    for (int v : x)
      if (v < -L || v > L) return false;
    return true;
  }
  long long index(const Point& x) const {
    long long o = origin;
    for (int a = 0; a < d; ++a) o += x[a] * stride[a];
    return o;
  }
  long long offset(const Point& x) const {
    long long o = 0;
    for (int a = 0; a < d; ++a) o += x[a] * stride[a];
    return o;
  }
  Point point(std::size_t idx) const {
    Point x(d);
    for (int a = 0; a < d; ++a) {
      x[a] = static_cast<int>(idx / stride[a]) - L;
      idx %= stride[a];
    }
    return x;
  }
};

void require_uniform(const AdmissibleKernel& J) {
  if (!J.uniform()) throw std::invalid_argument("lattice trees: kernel must be uniform on its support");
}

bool lex_positive(const Point& x) {
  for (int v : x)
    if (v != 0) return v > 0;
  return false;
}

struct VecHash {
  std::size_t operator()(const std::vector<std::uint64_t>& v) const {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ v.size();
    for (auto e : v) {
      h ^= e + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
      h *= 0xbf58476d1ce4e5b9ULL;
    }
    return static_cast<std::size_t>(h);
  }
};

// Trees containing 0, grown one leaf at a time, deduplicated by edge set.
std::vector<BigInt> grow_trees(const AdmissibleKernel& J, int B, const Box& box, double max_trees,
                               std::uint64_t& nodes) {
  std::vector<long long> offs;
  for (const auto& [s, w] : J.support()) {
    (void)w;
    offs.push_back(box.offset(s));
  }
  const std::uint64_t N = box.size;
  std::vector<BigInt> counts(B + 1);
  counts[0] = 1;
  std::vector<std::vector<std::uint64_t>> level{{}};
  std::uint64_t total = 1;
  for (int k = 1; k <= B; ++k) {
    std::unordered_set<std::vector<std::uint64_t>, VecHash> next;
    std::vector<std::uint64_t> verts;
    for (const auto& tree : level) {
      verts.assign(1, static_cast<std::uint64_t>(box.origin));
      for (auto e : tree) {
        verts.push_back(e / N);
        verts.push_back(e % N);
      }
      std::sort(verts.begin(), verts.end());
      verts.erase(std::unique(verts.begin(), verts.end()), verts.end());
      for (auto u : verts)
        for (long long o : offs) {
          std::uint64_t v = static_cast<std::uint64_t>(static_cast<long long>(u) + o);
          if (std::binary_search(verts.begin(), verts.end(), v)) continue;
          std::uint64_t e = std::min(u, v) * N + std::max(u, v);
          std::vector<std::uint64_t> t = tree;
          t.insert(std::upper_bound(t.begin(), t.end(), e), e);
          ++nodes;
          next.insert(std::move(t));
        }
    }
    total += next.size();
    if (static_cast<double>(total) > max_trees)
      throw CostGuardExceeded("lattice trees: more than " + fmt(max_trees) + " trees containing 0", total);
    counts[k] = static_cast<unsigned long>(next.size());
    level.assign(next.begin(), next.end());
  }
  return counts;
}

struct RootedAcc {
  std::vector<std::uint64_t> rho, t1, animals;
  std::uint64_t nodes = 0;
};

// Redelmeier-style enumeration over edges: each tree whose least vertex is 0
// is produced exactly once.
class RootedEnum {
 public:
  RootedEnum(const AdmissibleKernel& J, int B, const Box& box, std::atomic<std::uint64_t>& total, double max_trees)
      : B_(B), box_(box), total_(total), max_trees_(max_trees) {
    for (const auto& [s, w] : J.support()) {
      (void)w;
      offs_.push_back(box.offset(s));
    }
    lexpos_.assign(box.size, 0);
    for (std::size_t i = 0; i < box.size; ++i) lexpos_[i] = lex_positive(box.point(i));
  }

  const std::vector<long long>& offsets() const { return offs_; }
  bool lexpos(std::size_t i) const { return lexpos_[i]; }

  void run_branch(const std::vector<std::pair<std::size_t, std::size_t>>& first, std::size_t i, RootedAcc& acc) {
    acc_ = &acc;
    in_.assign(box_.size, 0);
    deg_.assign(box_.size, 0);
    verts_.clear();
    const std::size_t o = static_cast<std::size_t>(box_.origin);
    in_[o] = 1;
    verts_.push_back(o);
    std::vector<std::pair<std::size_t, std::size_t>> untried(first.begin(), first.begin() + i);
    add_and_recurse(first[i], untried, 0);
  }

 private:
  void record(int k) {
    ++acc_->animals[k];
    const std::size_t stride = static_cast<std::size_t>(B_ + 1);
    const long long org = box_.origin;
    for (auto a : verts_)
      for (auto b : verts_) {
        std::size_t x = static_cast<std::size_t>(static_cast<long long>(b) - static_cast<long long>(a) + org);
        ++acc_->rho[x * stride + k];
        if (a != b && deg_[b] == 1) ++acc_->t1[x * stride + k];
      }
  }

  void add_and_recurse(std::pair<std::size_t, std::size_t> e, std::vector<std::pair<std::size_t, std::size_t>>& untried,
                       int k) {
    auto [u, v] = e;
    in_[v] = 1;
    deg_[v] = 1;
    ++deg_[u];
    verts_.push_back(v);
    ++acc_->nodes;
    if ((total_.fetch_add(1) + 1) > max_trees_)
      throw CostGuardExceeded("lattice trees: more than " + fmt(max_trees_) + " rooted trees", max_trees_);
    record(k + 1);
    if (k + 1 < B_) {
      std::vector<std::pair<std::size_t, std::size_t>> nu = untried;
      for (long long o : offs_) {
        std::size_t w = static_cast<std::size_t>(static_cast<long long>(v) + o);
        if (lexpos_[w] && !in_[w]) nu.push_back({v, w});
      }
      while (!nu.empty()) {
        auto f = nu.back();
        nu.pop_back();
        if (in_[f.second]) continue;  // would close a cycle
        add_and_recurse(f, nu, k + 1);
      }
    }
    in_[v] = 0;
    deg_[v] = 0;
    --deg_[u];
    verts_.pop_back();
  }

  int B_;
  const Box& box_;
  std::atomic<std::uint64_t>& total_;
  double max_trees_;
  std::vector<long long> offs_;
  std::vector<char> lexpos_;
  std::vector<char> in_;
  std::vector<int> deg_;
  std::vector<std::size_t> verts_;
  RootedAcc* acc_ = nullptr;
};

// Integer polynomial fields in q, degree <= D, on a box.
using IPoly = std::vector<BigInt>;

struct PField {
  int d = 1, L = 0, D = 0;
  std::vector<IPoly> v;  // empty poly = 0
  PField() = default;
  PField(int dim, int radius, int deg) : d(dim), L(radius), D(deg), v(Box(dim, radius).size) {}
};

void add_into(IPoly& a, const IPoly& b, int D) {
  if (b.empty()) return;
  if (a.size() < b.size()) a.resize(std::min<std::size_t>(b.size(), D + 1));
  for (std::size_t k = 0; k < b.size() && k <= static_cast<std::size_t>(D); ++k) a[k] += b[k];
}

void mul_add_into(IPoly& out, const IPoly& a, const IPoly& b, int D) {
  if (a.empty() || b.empty()) return;
  std::size_t need = std::min<std::size_t>(a.size() + b.size() - 1, D + 1);
  if (out.size() < need) out.resize(need);
  for (std::size_t i = 0; i < a.size() && i <= static_cast<std::size_t>(D); ++i) {
    if (a[i] == 0) continue;
    for (std::size_t j = 0; j < b.size() && i + j <= static_cast<std::size_t>(D); ++j)
      if (b[j] != 0) out[i + j] += a[i] * b[j];
  }
}

bool is_zero(const IPoly& p) {
  for (const auto& c : p)
    if (c != 0) return false;
  return true;
}

// f * g, optionally only at sites of Λ_out.
PField conv(const PField& f, const PField& g, int D, int out_radius = -1) {
  const int Lr = out_radius >= 0 ? out_radius : f.L + g.L;
  PField r(f.d, Lr, D);
  Box bf(f.d, f.L), bg(g.d, g.L), br(f.d, Lr);
  std::vector<std::pair<Point, const IPoly*>> nf, ng;
  for (std::size_t i = 0; i < f.v.size(); ++i)
    if (!is_zero(f.v[i])) nf.push_back({bf.point(i), &f.v[i]});
  for (std::size_t i = 0; i < g.v.size(); ++i)
    if (!is_zero(g.v[i])) ng.push_back({bg.point(i), &g.v[i]});
  Point z(f.d);
  for (const auto& [x, px] : nf)
    for (const auto& [y, py] : ng) {
      bool inside = true;
      for (int a = 0; a < f.d; ++a) {
        z[a] = x[a] + y[a];
        if (z[a] < -Lr || z[a] > Lr) inside = false;
      }
      if (!inside) continue;
      mul_add_into(r.v[static_cast<std::size_t>(br.index(z))], *px, *py, D);
    }
  return r;
}

// Pointwise product on the smaller box.
PField pointwise(const PField& f, const PField& g, int D) {
  const int Lr = std::min(f.L, g.L);
  PField r(f.d, Lr, D);
  Box bf(f.d, f.L), bg(g.d, g.L), br(f.d, Lr);
  for (std::size_t i = 0; i < r.v.size(); ++i) {
    Point x = br.point(i);
    mul_add_into(r.v[i], f.v[static_cast<std::size_t>(bf.index(x))], g.v[static_cast<std::size_t>(bg.index(x))], D);
  }
  return r;
}

PField sum(const PField& f, const PField& g, int D) {
  const int Lr = std::max(f.L, g.L);
  PField r(f.d, Lr, D);
  Box bf(f.d, f.L), bg(g.d, g.L), br(f.d, Lr);
  for (std::size_t i = 0; i < r.v.size(); ++i) {
    Point x = br.point(i);
    if (bf.contains(x)) add_into(r.v[i], f.v[static_cast<std::size_t>(bf.index(x))], D);
    if (bg.contains(x)) add_into(r.v[i], g.v[static_cast<std::size_t>(bg.index(x))], D);
  }
  return r;
}

PField indicator_field(const AdmissibleKernel& J) {
  PField s(J.d, J.R, 0);
  Box b(J.d, J.R);
  for (const auto& [x, w] : J.support()) {
    (void)w;
    s.v[static_cast<std::size_t>(b.index(x))] = IPoly{BigInt(1)};
  }
  return s;
}

PField t1_field(const TreeSeries& s, int D) {
  PField g(s.d, s.L, D);
  for (std::size_t i = 0; i < s.t1.size(); ++i) {
    const auto& c = s.t1[i];
    if (is_zero(c)) continue;
    g.v[i].assign(c.begin(), c.begin() + std::min<std::size_t>(c.size(), D + 1));
  }
  return g;
}

double eval_q(const IPoly& p, double q) {
  double r = 0.0;
  for (std::size_t k = p.size(); k-- > 0;) r = r * q + p[k].get_d();
  return r;
}

double eval_q_counts(const std::vector<BigInt>& c, double q) { return eval_q(c, q); }

std::string point_str(const Point& x) {
  std::string s = "(";
  for (std::size_t a = 0; a < x.size(); ++a) s += (a ? "," : "") + std::to_string(x[a]);
  return s + ")";
}

RationalPoly counts_poly(const std::vector<BigInt>& c, const Rational& w) {
  RationalPoly p;
  Rational wk = 1;
  for (std::size_t k = 0; k < c.size(); ++k) {
    p.coeffs.push_back(Rational(c[k]) * wk);
    wk *= w;
  }
  p.trim();
  if (p.coeffs.empty()) p.coeffs.push_back(Rational(0));
  return p;
}

// G fields in double at fugacity p on Λ_L.
std::vector<double> t1_values(const TreeSeries& s, double q) {
  std::vector<double> g(s.t1.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = eval_q_counts(s.t1[i], q);
  return g;
}

}  // namespace

std::size_t TreeSeries::site_index(const Point& x) const {
  Box b(d, L);
  if (static_cast<int>(x.size()) != d || !b.contains(x)) throw std::out_of_range("lattice trees: site outside table");
  return static_cast<std::size_t>(b.index(x));
}

RationalPoly TreeSeries::g_poly() const { return counts_poly(g_counts, weight); }

RationalPoly TreeSeries::chi_poly() const {
  std::vector<BigInt> c(B + 1);
  for (const auto& r : rho)
    for (int k = 0; k <= B; ++k) c[k] += r[k];
  return counts_poly(c, weight);
}

RationalPoly TreeSeries::beta_poly() const {
  RationalPoly g = g_poly();
  RationalPoly b;
  b.coeffs.push_back(Rational(0));
  for (const auto& c : g.coeffs) b.coeffs.push_back(c);
  return b;
}

RationalPoly TreeSeries::rho_poly(const Point& x) const {
  Box b(d, L);
  if (!b.contains(x)) return RationalPoly{{Rational(0)}};
  return counts_poly(rho[static_cast<std::size_t>(b.index(x))], weight);
}

RationalPoly TreeSeries::two_point_poly(const Point& x) const {
  Box b(d, L);
  if (!b.contains(x)) return RationalPoly{{Rational(0)}};
  return counts_poly(t1[static_cast<std::size_t>(b.index(x))], weight);
}

LatticeField TreeSeries::rho_field(double p) const {
  LatticeField f(d, L);
  const double q = to_double(weight) * p;
  for (std::size_t i = 0; i < rho.size(); ++i) f.values[i] = eval_q_counts(rho[i], q);
  f.tail_bound = std::numeric_limits<double>::infinity();
  f.tail_m2 = std::numeric_limits<double>::infinity();
  f.tail_exact = false;
  return f;
}

LatticeField TreeSeries::two_point_field_p(double p) const {
  LatticeField f(d, L);
  f.values = t1_values(*this, to_double(weight) * p);
  f.tail_bound = std::numeric_limits<double>::infinity();
  f.tail_m2 = std::numeric_limits<double>::infinity();
  f.tail_exact = false;
  return f;
}

double lt_cost_estimate(const AdmissibleKernel& J, int B) {
  // Trees containing 0 with k bonds: at most (e S)^k.
  const double S = static_cast<double>(J.support_size);
  double t = 0.0;
  for (int k = 0; k <= B; ++k) t += std::pow(std::exp(1.0) * S, k);
  return t;
}

TreeSeries lt_enumerate(const AdmissibleKernel& J, int B, double max_trees) {
  require_uniform(J);
  if (B < 0) throw std::invalid_argument("lattice trees: B must be >= 0");
  const double est = lt_cost_estimate(J, B);
  if (est > 1e3 * max_trees)
    throw CostGuardExceeded("lattice trees: estimated " + fmt(est) + " trees exceeds the guard " + fmt(max_trees), est);
  TreeSeries s;
  s.kernel = J;
  s.d = J.d;
  s.B = B;
  s.L = B * J.R;
  s.weight = J.weight;
  Box box(s.d, s.L);
  if (box.size >= (std::size_t{1} << 31)) throw CostGuardExceeded("lattice trees: site table too large", box.size);

  s.g_counts = grow_trees(J, B, box, max_trees, s.grown_nodes);

  const std::size_t stride = static_cast<std::size_t>(B + 1);
  RootedAcc total;
  total.rho.assign(box.size * stride, 0);
  total.t1.assign(box.size * stride, 0);
  total.animals.assign(stride, 0);
  total.rho[static_cast<std::size_t>(box.origin) * stride] = 1;
  total.animals[0] = 1;
  if (B > 0) {
    std::atomic<std::uint64_t> counter{0};
    std::vector<std::pair<std::size_t, std::size_t>> first;
    {
      RootedEnum probe(J, B, box, counter, max_trees);
      for (long long o : probe.offsets()) {
        std::size_t w = static_cast<std::size_t>(box.origin + o);
        if (probe.lexpos(w)) first.push_back({static_cast<std::size_t>(box.origin), w});
      }
    }
    std::mutex mu;
    parallel_for(first.size(), [&](std::size_t i) {
      RootedAcc acc;
      acc.rho.assign(box.size * stride, 0);
      acc.t1.assign(box.size * stride, 0);
      acc.animals.assign(stride, 0);
      RootedEnum en(J, B, box, counter, max_trees);
      en.run_branch(first, i, acc);
      // integer sums, so merge order does not matter
      std::lock_guard<std::mutex> lock(mu);
      for (std::size_t j = 0; j < acc.rho.size(); ++j) {
        total.rho[j] += acc.rho[j];
        total.t1[j] += acc.t1[j];
      }
      for (std::size_t k = 0; k < stride; ++k) total.animals[k] += acc.animals[k];
      total.nodes += acc.nodes;
    });
  }
  s.rooted_nodes = total.nodes;
  s.animal_counts.resize(stride);
  for (std::size_t k = 0; k < stride; ++k) s.animal_counts[k] = static_cast<unsigned long>(total.animals[k]);
  s.rho.assign(box.size, {});
  s.t1.assign(box.size, {});
  for (std::size_t i = 0; i < box.size; ++i) {
    bool any_r = false, any_t = false;
    for (std::size_t k = 0; k < stride; ++k) {
      any_r |= total.rho[i * stride + k] != 0;
      any_t |= total.t1[i * stride + k] != 0;
    }
    s.rho[i].assign(stride, BigInt(0));
    s.t1[i].assign(stride, BigInt(0));
    if (any_r)
      for (std::size_t k = 0; k < stride; ++k) s.rho[i][k] = static_cast<unsigned long>(total.rho[i * stride + k]);
    if (any_t)
      for (std::size_t k = 0; k < stride; ++k) s.t1[i][k] = static_cast<unsigned long>(total.t1[i * stride + k]);
  }
  s.t1[static_cast<std::size_t>(box.origin)][0] = 1;
  return s;
}

double BetaMap::p_of(double b) const {
  if (!(b >= 0.0) || b > beta_max * (1 + 1e-12))
    throw std::domain_error("lattice trees: beta " + fmt(b) + " outside the inversion range [0, " + fmt(beta_max) + "]");
  double lo = 0.0, hi = p_max;
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (beta.eval(mid) < b)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

BetaMap lt_beta_map(const TreeSeries& s) {
  BetaMap m;
  m.beta = s.beta_poly();
  const double w = to_double(s.weight);
  const int B = s.B;
  // chi-hat coefficients in p are (k+1) g_k
  double pmax;
  if (B >= 2 && s.g_counts[B] > 0) {
    double xB = (B + 1) * s.g_counts[B].get_d() * std::pow(w, B);
    double xB1 = B * s.g_counts[B - 1].get_d() * std::pow(w, B - 1);
    pmax = 0.5 * xB1 / xB;
  } else {
    pmax = 0.5 / (std::exp(1.0) * static_cast<double>(s.kernel.support_size) * w);
  }
  // d beta / dp = chi-hat > 0 on [0, pmax]: all coefficients are positive, and
  // the grid check below guards against a sign slip.
  RationalPoly db = m.beta.derivative();
  for (int i = 0; i <= 256; ++i) {
    double p = pmax * i / 256.0;
    if (!(db.eval(p) > 0.0)) {
      pmax = pmax * (i - 1) / 256.0;
      break;
    }
  }
  m.p_max = pmax;
  m.beta_max = m.beta.eval(pmax);
  return m;
}

LatticeField lt_two_point_beta(const TreeSeries& s, const BetaMap& m, double beta) {
  return s.two_point_field_p(m.p_of(beta));
}

std::vector<double> lt_beta_grid(const BetaMap& m, int n) {
  std::vector<double> g;
  for (int i = 0; i < n; ++i) g.push_back(m.beta_max * i / std::max(1, n - 1));
  return g;
}

InequalityReport lt_check_dg(const TreeSeries& s) {
  InequalityReport r = make_report("lt_dg_identity", "d(p g_p)/dp = chi-hat(p) coefficientwise", 0.0);
  r.grid = s.kernel.name() + ", B=" + std::to_string(s.B) + ", degrees 0.." + std::to_string(s.B);
  std::vector<BigInt> chi(s.B + 1);
  for (const auto& c : s.rho)
    for (int k = 0; k <= s.B; ++k) chi[k] += c[k];
  nlohmann::json lhs = nlohmann::json::array(), rhs = nlohmann::json::array();
  const std::size_t o = s.site_index(Point(s.d, 0));
  for (int k = 0; k <= s.B; ++k) {
    BigInt left = BigInt(k + 1) * s.g_counts[k];
    BigInt diff = left - chi[k];
    r.record(-std::abs(diff.get_d()), "degree " + std::to_string(k));
    // rho(0) from the rooted tables against g from the grown ones
    BigInt d0 = s.rho[o][k] - s.g_counts[k];
    r.record(-std::abs(d0.get_d()), "rho_p(0) vs g_p, degree " + std::to_string(k));
    // each rooted tree has k+1 translates through 0
    BigInt d1 = BigInt(k + 1) * s.animal_counts[k] - s.g_counts[k];
    r.record(-std::abs(d1.get_d()), "translates, degree " + std::to_string(k));
    lhs.push_back(to_string(Rational(left) * rational_pow(s.weight, k)));
    rhs.push_back(to_string(Rational(chi[k]) * rational_pow(s.weight, k)));
  }
  r.details["d_pg_dp"] = lhs;
  r.details["chi_hat"] = rhs;
  r.details["bookkeeping"] = "both sides exact through degree B: g_p from trees with <= B bonds fixes d(p g_p)/dp "
                             "through p^B, and chi-hat through p^B uses the same trees";
  r.details["arithmetic"] = "exact integers";
  r.finalize();
  return r;
}

InequalityReport lt_check_symmetry(const TreeSeries& s) {
  InequalityReport r = make_report("lt_symmetry", "rho_p and the reduced two-point function are Z^d-symmetric", 0.0);
  r.grid = s.kernel.name() + ", B=" + std::to_string(s.B);
  Box b(s.d, s.L);
  std::vector<int> perm(s.d);
  std::iota(perm.begin(), perm.end(), 0);
  do {
    for (int signs = 0; signs < (1 << s.d); ++signs) {
      double worst = 0.0;
      std::string where;
      for (std::size_t i = 0; i < b.size; ++i) {
        Point x = b.point(i), y(s.d);
        for (int a = 0; a < s.d; ++a) y[a] = (signs >> a & 1) ? -x[perm[a]] : x[perm[a]];
        std::size_t j = static_cast<std::size_t>(b.index(y));
        for (int k = 0; k <= s.B; ++k) {
          double e = std::max(std::abs(BigInt(s.rho[i][k] - s.rho[j][k]).get_d()),
                              std::abs(BigInt(s.t1[i][k] - s.t1[j][k]).get_d()));
          if (e > worst) {
            worst = e;
            where = point_str(x);
          }
        }
      }
      r.record(-worst, where.empty() ? "signed permutation" : where);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  r.finalize();
  return r;
}

InequalityReport lt_check_I1(const TreeSeries& s, const std::vector<double>& beta_grid, double tol) {
  InequalityReport r = make_report("lt_I1", "G_b <= G_b' + (b-b') G_b' * J * G_b, reduced two-point function", tol);
  BetaMap m = lt_beta_map(s);
  r.grid = s.kernel.name() + ", B=" + std::to_string(s.B) + "; monomials q^i q'^j with i+j <= B-1, and " +
           std::to_string(beta_grid.size()) + "-point beta grid up to " + fmt(m.beta_max);
  const int B = s.B;
  Box box(s.d, s.L);
  PField S = indicator_field(s.kernel);
  // PP[a][b](x) = (c_a * 1_S * c_b)(x) on Λ_L.
  std::vector<std::vector<std::vector<BigInt>>> PP(B, std::vector<std::vector<BigInt>>(B));
  std::size_t monomial_failures = 0;
  if (B >= 1) {
    std::vector<PField> c(B);
    for (int a = 0; a < B; ++a) {
      c[a] = PField(s.d, s.L, 0);
      for (std::size_t i = 0; i < box.size; ++i)
        if (s.t1[i][a] != 0) c[a].v[i] = IPoly{s.t1[i][a]};
    }
    for (int b = 0; b < B; ++b) {
      PField sb = conv(S, c[b], 0);
      for (int a = 0; a + b < B; ++a) {
        PField f = conv(c[a], sb, 0, s.L);
        PP[a][b].assign(box.size, BigInt(0));
        for (std::size_t i = 0; i < box.size; ++i)
          if (!f.v[i].empty()) PP[a][b][i] = f.v[i][0];
      }
    }
    for (std::size_t x = 0; x < box.size; ++x)
      for (int i = 0; i < B; ++i)
        for (int j = 0; i + j < B; ++j) {
          BigInt rhs = 0;
          for (int mm = 0; mm <= i + j; ++mm) {
            if (s.g_counts[mm] == 0) continue;
            BigInt inner = 0;
            for (int ip = std::max(0, mm - j); ip <= std::min(i, mm); ++ip) {
              int jp = mm - ip;
              inner += PP[j - jp][i - ip][x];
            }
            rhs += s.g_counts[mm] * inner;
          }
          BigInt res = rhs - s.t1[x][i + j + 1];
          if (res < 0) ++monomial_failures;
          r.record_with(res.get_d(), [&] {
            return "monomial q^" + std::to_string(i) + " q'^" + std::to_string(j) + " at x=" + point_str(box.point(x));
          });
        }
  }
  r.details["monomial_failures"] = monomial_failures;
  // grid part
  const double w = to_double(s.weight);
  std::vector<std::vector<double>> G;
  std::vector<double> ps;
  for (double b : beta_grid) {
    double p = m.p_of(b);
    ps.push_back(p);
    G.push_back(t1_values(s, w * p));
  }
  auto offs = s.kernel.support();
  for (std::size_t i = 0; i < beta_grid.size(); ++i)
    for (std::size_t k = i + 1; k < beta_grid.size(); ++k) {
      // (G_i * J * G_k)(x) on Λ_L
      std::vector<double> JGk(box.size, 0.0);
      for (std::size_t y = 0; y < box.size; ++y) {
        if (G[k][y] == 0.0) continue;
        Point py = box.point(y);
        for (const auto& [o, jv] : offs) {
          Point z = py;
          for (int a = 0; a < s.d; ++a) z[a] += o[a];
          if (box.contains(z)) JGk[static_cast<std::size_t>(box.index(z))] += jv * G[k][y];
        }
      }
      double db = m.beta_of(ps[k]) - m.beta_of(ps[i]);
      for (std::size_t x = 0; x < box.size; ++x) {
        Point px = box.point(x);
        double conv_sum = 0.0;
        for (std::size_t u = 0; u < box.size; ++u) {
          if (G[i][u] == 0.0) continue;
          Point pu = box.point(u), z(s.d);
          bool inside = true;
          for (int a = 0; a < s.d; ++a) {
            z[a] = px[a] - pu[a];
            if (z[a] < -s.L || z[a] > s.L) inside = false;
          }
          if (inside) conv_sum += G[i][u] * JGk[static_cast<std::size_t>(box.index(z))];
        }
        double res = G[i][x] + db * conv_sum - G[k][x];
        r.record_with(res, [&] {
          return "b'=" + fmt(beta_grid[i]) + " b=" + fmt(beta_grid[k]) + " x=" + point_str(px);
        });
      }
    }
  r.details["beta_max"] = m.beta_max;
  r.details["p_max"] = m.p_max;
  r.details["arithmetic"] = "monomials in exact integers (q = w p); grid in double from the truncated series";
  r.finalize();
  return r;
}

InequalityReport lt_check_I2(const TreeSeries& s, const std::vector<double>& beta_grid, double tol) {
  InequalityReport r =
      make_report("lt_I2", "dG/dbeta >= G * (J - H) * G with the lattice-tree H, reduced two-point function", tol);
  BetaMap m = lt_beta_map(s);
  r.grid = s.kernel.name() + ", B=" + std::to_string(s.B) + "; degrees 0.." + std::to_string(s.B - 1) + " and " +
           std::to_string(beta_grid.size()) + "-point beta grid up to " + fmt(m.beta_max);
  const int B = s.B;
  if (B < 1) {
    r.finalize();
    return r;
  }
  const int D = B - 1;
  Box box(s.d, s.L);
  PField G = t1_field(s, D);
  PField S = indicator_field(s.kernel);
  PField Q = conv(G, G, D);
  PField T = conv(Q, G, D);
  PField SG = conv(S, G, D);
  PField A = conv(G, SG, D);
  PField GT = pointwise(G, T, D);
  {
    Box bg(GT.d, GT.L);
    auto& o = GT.v[static_cast<std::size_t>(bg.origin)];
    if (o.empty()) o.assign(1, BigInt(0));
    o[0] -= 1;
  }
  PField term1 = conv(GT, S, D);
  PField term2 = pointwise(SG, T, D);
  PField term3 = pointwise(A, Q, D);
  PField Hq = sum(sum(term1, term2, D), term3, D);
  PField HG = conv(Hq, G, D, Hq.L + s.L);
  PField GHG = conv(G, HG, D, s.L);
  Box bA(A.d, A.L);
  // X(q) = sum (k+1) g_k q^k
  IPoly X(D + 1);
  for (int k = 0; k <= D; ++k) X[k] = BigInt(k + 1) * s.g_counts[k];
  std::vector<IPoly> R(box.size);
  std::size_t undetermined = 0, leading_negative = 0;
  for (std::size_t x = 0; x < box.size; ++x) {
    Point px = box.point(x);
    IPoly diff(D + 1, BigInt(0));
    const IPoly& ax = A.v[static_cast<std::size_t>(bA.index(px))];
    for (std::size_t k = 0; k < ax.size() && k <= static_cast<std::size_t>(D); ++k) diff[k] += ax[k];
    const IPoly& gx = GHG.v[x];
    for (std::size_t k = 0; k < gx.size() && k <= static_cast<std::size_t>(D); ++k) diff[k] -= gx[k];
    IPoly xd;
    mul_add_into(xd, X, diff, D);
    IPoly rx(D + 1, BigInt(0));
    for (int k = 0; k <= D; ++k) rx[k] = BigInt(k + 1) * s.t1[x][k + 1];
    for (std::size_t k = 0; k < xd.size(); ++k) rx[k] -= xd[k];
    int lead = -1;
    for (int k = 0; k <= D; ++k)
      if (rx[k] != 0) {
        lead = k;
        break;
      }
    if (lead < 0) {
      ++undetermined;
    } else if (rx[lead] < 0) {
      ++leading_negative;
      r.record(rx[lead].get_d(), "lowest coefficient q^" + std::to_string(lead) + " at x=" + point_str(px));
    }
    R[x] = std::move(rx);
  }
  const double w = to_double(s.weight);
  for (double b : beta_grid) {
    double q = w * m.p_of(b);
    double xq = eval_q(X, q);
    for (std::size_t x = 0; x < box.size; ++x) {
      double res = w * eval_q(R[x], q) / xq;
      r.record_with(res, [&] { return "b=" + fmt(b) + " x=" + point_str(box.point(x)); });
    }
  }
  r.details["leading_negative"] = leading_negative;
  r.details["undetermined_sites"] = undetermined;
  r.details["beta_max"] = m.beta_max;
  r.details["arithmetic"] = "integer polynomials in q = w p through degree B-1; grid in double";
  r.finalize();
  return r;
}

InequalityReport lt_check_sandwich(const TreeSeries& s, const std::vector<double>& beta_grid, double tol) {
  InequalityReport r = make_report(
      "lt_sandwich", "G_{p g_p} <= rho_p <= G_{p g_p} (1 + max_{J_z>0} G(z))^{(2R+1)^d}", tol);
  BetaMap m = lt_beta_map(s);
  r.grid = s.kernel.name() + ", B=" + std::to_string(s.B) + "; coefficients, and " +
           std::to_string(beta_grid.size()) + "-point beta grid";
  Box box(s.d, s.L);
  for (std::size_t x = 0; x < box.size; ++x)
    for (int k = 0; k <= s.B; ++k) {
      BigInt d = s.rho[x][k] - s.t1[x][k];
      r.record_with(d.get_d(), [&] { return "coefficient p^" + std::to_string(k) + " at x=" + point_str(box.point(x)); });
    }
  const double w = to_double(s.weight);
  const double nexp = std::pow(2.0 * s.kernel.R + 1.0, s.d);
  auto offs = s.kernel.support();
  for (double b : beta_grid) {
    double q = w * m.p_of(b);
    std::vector<double> G = t1_values(s, q);
    double gmax = 0.0;
    for (const auto& [z, jv] : offs) {
      (void)jv;
      gmax = std::max(gmax, G[static_cast<std::size_t>(box.index(z))]);
    }
    double factor = std::pow(1.0 + gmax, nexp);
    for (std::size_t x = 0; x < box.size; ++x) {
      double rho = eval_q_counts(s.rho[x], q);
      r.record_with(rho - G[x], [&] { return "lower, b=" + fmt(b) + " x=" + point_str(box.point(x)); });
      r.record_with(G[x] * factor - rho, [&] { return "upper, b=" + fmt(b) + " x=" + point_str(box.point(x)); });
    }
  }
  r.finalize();
  return r;
}

std::string lt_series_to_json(const TreeSeries& s) {
  nlohmann::json j;
  j["kernel"] = s.kernel.name();
  j["d"] = s.d;
  j["B"] = s.B;
  j["weight"] = to_string(s.weight);
  auto strs = [](const std::vector<BigInt>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& c : v) a.push_back(c.get_str());
    return a;
  };
  auto poly = [](const RationalPoly& p) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& c : p.coeffs) a.push_back(to_string(c));
    return a;
  };
  j["g_counts"] = strs(s.g_counts);
  j["rooted_counts"] = strs(s.animal_counts);
  j["g_p"] = poly(s.g_poly());
  j["chi_hat"] = poly(s.chi_poly());
  j["beta_of_p"] = poly(s.beta_poly());
  Box box(s.d, s.L);
  nlohmann::json sites = nlohmann::json::array();
  for (std::size_t i = 0; i < box.size; ++i) {
    if (is_zero(s.rho[i])) continue;
    nlohmann::json e;
    e["x"] = box.point(i);
    e["rho"] = strs(s.rho[i]);
    e["t1"] = strs(s.t1[i]);
    sites.push_back(e);
  }
  j["sites"] = sites;
  j["grown_nodes"] = s.grown_nodes;
  j["rooted_nodes"] = s.rooted_nodes;
  return j.dump(1);
}

}  // namespace mflab

#include "mflab/model_saw.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "mflab/parallel.hpp"

namespace mflab {

namespace {

using Json = nlohmann::json;

struct BoxIndex {
  int d, L;
  std::vector<long long> stride;
  long long origin = 0;
  std::size_t size = 1;

  BoxIndex(int dim, int radius) : d(dim), L(radius), stride(dim) {
    long long s = 1;
    for (int a = d - 1; a >= 0; --a) {
      stride[a] = s;
      s *= 2 * L + 1;
    }
    size = static_cast<std::size_t>(s);
    for (int a = 0; a < d; ++a) origin += L * stride[a];
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
  if (!J.uniform()) throw std::invalid_argument("saw: kernel must be uniform on its support");
}

Rational one_minus(const Rational& l) { return Rational(1) - l; }

// Exact integer form of the series: c_n(x) = w^n Q_n(x) / q^K with
// t = 1 - lambda = p/q.
struct SawExact {
  BoxIndex box;
  int N;
  int K = 0;
  BigInt p, q, qK;
  Rational w;
  std::vector<long long> steps;
  std::vector<std::vector<std::pair<long long, BigInt>>> Q;  // sparse, offsets from origin
  // P[a][b] = (Q_a * 1_S * Q_b), dense on the box, for a + b <= N - 1.
  std::vector<std::vector<std::vector<BigInt>>> P;

  explicit SawExact(const SawSeries& s) : box(s.d, s.L), N(s.N) {
    Rational t = one_minus(s.lambda);
    p = t.get_num();
    q = t.get_den();
    w = s.weight;
    for (const auto& [off, v] : s.kernel.support()) {
      (void)v;
      steps.push_back(box.offset(off));
    }
    for (const auto& lev : s.counts)
      for (const auto& [idx, ks] : lev) K = std::max<int>(K, static_cast<int>(ks.size()) - 1);
    mpz_pow_ui(qK.get_mpz_t(), q.get_mpz_t(), K);
    std::vector<BigInt> pk(K + 1), qk(K + 1);
    for (int k = 0; k <= K; ++k) {
      mpz_pow_ui(pk[k].get_mpz_t(), p.get_mpz_t(), k);
      mpz_pow_ui(qk[k].get_mpz_t(), q.get_mpz_t(), K - k);
    }
    Q.resize(N + 1);
    for (int n = 0; n <= N; ++n) {
      for (const auto& [idx, ks] : s.counts[n]) {
        BigInt v = 0;
        for (std::size_t k = 0; k < ks.size(); ++k) {
          if (ks[k] == 0) continue;
          BigInt c(std::to_string(ks[k]));
          v += c * pk[k] * qk[k];
        }
        if (v != 0) Q[n].emplace_back(static_cast<long long>(idx) - box.origin, v);
      }
    }
    P.resize(N);
    std::vector<std::vector<std::pair<long long, BigInt>>> QS(N);
    for (int a = 0; a < N; ++a) {
      std::vector<BigInt> acc(box.size);
      std::vector<char> hit(box.size, 0);
      for (const auto& [o, v] : Q[a])
        for (long long st : steps) {
          std::size_t i = static_cast<std::size_t>(box.origin + o + st);
          acc[i] += v;
          hit[i] = 1;
        }
      for (std::size_t i = 0; i < box.size; ++i)
        if (hit[i] && acc[i] != 0) QS[a].emplace_back(static_cast<long long>(i) - box.origin, acc[i]);
    }
    std::vector<std::pair<int, int>> pairs;
    for (int a = 0; a < N; ++a) {
      P[a].resize(N - a);
      for (int b = 0; a + b <= N - 1; ++b) pairs.emplace_back(a, b);
    }
    parallel_for(pairs.size(), [&](std::size_t i) {
      auto [a, b] = pairs[i];
      P[a][b] = convolve_dense(QS[a], Q[b]);
    });
  }

  std::vector<BigInt> convolve_dense(const std::vector<std::pair<long long, BigInt>>& A,
                                     const std::vector<std::pair<long long, BigInt>>& B) const {
    std::vector<BigInt> acc(box.size);
    for (const auto& [oa, va] : A)
      for (const auto& [ob, vb] : B) {
        std::size_t i = static_cast<std::size_t>(box.origin + oa + ob);
        mpz_addmul(acc[i].get_mpz_t(), va.get_mpz_t(), vb.get_mpz_t());
      }
    return acc;
  }

  std::vector<BigInt> dense_Q(int n) const {
    std::vector<BigInt> v(box.size);
    for (const auto& [o, x] : Q[n]) v[static_cast<std::size_t>(box.origin + o)] = x;
    return v;
  }
};

std::string point_str(const Point& x) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? "," : "") << x[i];
  os << ")";
  return os.str();
}

// Sign-faithful conversion: a negative rational never rounds to 0.
double signed_double(const Rational& r) {
  double v = to_double(r);
  if (r < 0 && v >= 0) return -std::numeric_limits<double>::denorm_min();
  return v;
}

}  // namespace

Rational SawSeries::coefficient(int n, const Point& x) const {
  if (n < 0 || n > N) throw std::out_of_range("saw coefficient degree");
  if (norm_inf(x) > L) return Rational(0);
  BoxIndex box(d, L);
  std::size_t idx = static_cast<std::size_t>(box.origin + box.offset(x));
  const auto& lev = counts[n];
  auto it = std::lower_bound(lev.begin(), lev.end(), idx, [](const auto& e, std::size_t i) { return e.first < i; });
  if (it == lev.end() || it->first != idx) return Rational(0);
  Rational t = one_minus(lambda), tk = 1, v = 0;
  for (std::size_t k = 0; k < it->second.size(); ++k) {
    if (it->second[k]) v += Rational(BigInt(std::to_string(it->second[k]))) * tk;
    tk *= t;
  }
  return v * rational_pow(weight, n);
}

Rational SawSeries::total(int n) const {
  Rational t = one_minus(lambda), tk = 1, v = 0;
  std::vector<BigInt> byk;
  for (const auto& [idx, ks] : counts[n]) {
    if (byk.size() < ks.size()) byk.resize(ks.size());
    for (std::size_t k = 0; k < ks.size(); ++k)
      if (ks[k]) byk[k] += BigInt(std::to_string(ks[k]));
  }
  for (std::size_t k = 0; k < byk.size(); ++k) {
    v += Rational(byk[k]) * tk;
    tk *= t;
  }
  return v * rational_pow(weight, n);
}

std::vector<LatticeField> SawSeries::fields() const {
  std::vector<LatticeField> out;
  const double t = 1.0 - to_double(lambda), w = to_double(weight);
  for (int n = 0; n <= N; ++n) {
    LatticeField f(d, L);
    double wn = std::pow(w, n);
    for (const auto& [idx, ks] : counts[n]) {
      double v = 0.0, tk = 1.0;
      for (std::size_t k = 0; k < ks.size(); ++k) {
        v += static_cast<double>(ks[k]) * tk;
        tk *= t;
      }
      f.values[idx] = v * wn;
    }
    out.push_back(std::move(f));
  }
  return out;
}

double saw_cost_estimate(const AdmissibleKernel& J, const Rational& lambda, int N) {
  double S = static_cast<double>(J.support_size);
  double branch = (lambda == 1 && J.family == KernelFamily::NearestNeighbour) ? S - 1 : S;
  double total = 1.0, term = 1.0;
  for (int n = 1; n <= N; ++n) {
    term *= (n == 1 ? S : branch);
    total += term;
  }
  return total;
}

SawSeries saw_enumerate(const AdmissibleKernel& J, const Rational& lambda, int N, double max_nodes) {
  require_uniform(J);
  if (lambda < 0 || lambda > 1) throw std::invalid_argument("saw_enumerate: lambda must lie in [0, 1]");
  if (N < 0) throw std::invalid_argument("saw_enumerate: negative N");
  double est = saw_cost_estimate(J, lambda, N);
  if (est > max_nodes) {
    std::ostringstream os;
    os << "saw_enumerate: estimated " << est << " nodes exceeds the guard of " << max_nodes;
    throw CostGuardExceeded(os.str(), est);
  }
  SawSeries s;
  s.kernel = J;
  s.d = J.d;
  s.N = N;
  s.L = N * J.R;
  s.lambda = lambda;
  s.weight = J.weight;
  BoxIndex box(s.d, s.L);
  std::vector<long long> steps;
  for (const auto& [off, v] : J.support()) {
    (void)v;
    steps.push_back(box.offset(off));
  }
  const bool strict = lambda == 1;

  using Table = std::vector<std::vector<std::vector<std::uint64_t>>>;  // [n][site][k]
  struct Branch {
    Table t;
    std::uint64_t nodes = 0;
  };
  std::vector<Branch> branches(N >= 1 ? steps.size() : 0);
  parallel_for(branches.size(), [&](std::size_t b) {
    Branch& br = branches[b];
    br.t.assign(N + 1, std::vector<std::vector<std::uint64_t>>(box.size));
    std::vector<unsigned char> visits(box.size, 0);
    const long long o = box.origin;
    visits[o] = 1;
    // Explicit stack: (level, site, k, next step index).
    struct Frame {
      long long site;
      int k;
      std::size_t next;
    };
    std::vector<Frame> st;
    st.reserve(N + 1);
    long long first = o + steps[b];
    ++visits[first];
    auto record = [&](int n, long long site, int k) {
      auto& v = br.t[n][static_cast<std::size_t>(site)];
      if (v.size() <= static_cast<std::size_t>(k)) v.resize(k + 1, 0);
      ++v[k];
      ++br.nodes;
    };
    int k1 = visits[first] - 1;
    record(1, first, k1);
    st.push_back({first, k1, 0});
    while (!st.empty()) {
      Frame& f = st.back();
      int n = static_cast<int>(st.size());
      if (n == N || f.next == steps.size()) {
        --visits[f.site];
        st.pop_back();
        continue;
      }
      long long nx = f.site + steps[f.next++];
      int v = visits[nx];
      if (strict && v > 0) continue;
      ++visits[nx];
      int k = f.k + v;
      record(n + 1, nx, k);
      st.push_back({nx, k, 0});
    }
  });
  s.counts.assign(N + 1, {});
  s.counts[0].push_back({static_cast<std::size_t>(box.origin), {1}});
  s.nodes = 1;
  for (int n = 1; n <= N; ++n) {
    std::vector<std::vector<std::uint64_t>> merged(box.size);
    for (auto& br : branches) {
      for (std::size_t i = 0; i < box.size; ++i) {
        const auto& src = br.t[n][i];
        if (src.empty()) continue;
        auto& dst = merged[i];
        if (dst.size() < src.size()) dst.resize(src.size(), 0);
        for (std::size_t k = 0; k < src.size(); ++k) dst[k] += src[k];
      }
    }
    for (std::size_t i = 0; i < box.size; ++i)
      if (!merged[i].empty()) s.counts[n].emplace_back(i, std::move(merged[i]));
  }
  for (auto& br : branches) s.nodes += br.nodes;
  return s;
}

LatticeField saw_eval(const SawSeries& s, double beta) {
  if (beta < 0) throw std::invalid_argument("saw_eval: beta must be nonnegative");
  auto f = s.fields();
  LatticeField G(s.d, s.L);
  double bn = 1.0;
  for (int n = 0; n <= s.N; ++n) {
    for (std::size_t i = 0; i < G.size(); ++i) G.values[i] += bn * f[n].values[i];
    bn *= beta;
  }
  // No tail certificate: partial sums are lower bounds.
  G.tail_exact = false;
  G.tail_bound = kInf;
  return G;
}

Interval saw_chi(const SawSeries& s, double beta) {
  double v = 0.0, bn = 1.0;
  for (int n = 0; n <= s.N; ++n) {
    v += to_double(s.total(n)) * bn;
    bn *= beta;
  }
  return Interval::lower_bound(v);
}

Interval saw_bubble(const SawSeries& s, double beta) {
  LatticeField G = saw_eval(s, beta);
  G.tail_bound = 0.0;
  G.tail_exact = true;
  LatticeField JG = kernel_apply(s.kernel, G, G.L + s.kernel.R);
  double b = 0.0;
  G.for_each([&](std::size_t i, const int* x) {
    Point y(s.d);
    for (int a = 0; a < s.d; ++a) y[a] = -x[a];
    b += G.values[i] * JG.at(y);
  });
  return Interval::lower_bound(b);
}

CriticalEstimate saw_critical(const SawSeries& s) {
  CriticalEstimate c;
  c.source_degree = s.N;
  c.roots.push_back(1.0);
  for (int n = 1; n <= s.N; ++n) {
    double cn = to_double(s.total(n));
    double r = std::pow(cn, 1.0 / n);
    c.roots.push_back(r);
    if (r > 0) c.beta_c_lower = std::max(c.beta_c_lower, 1.0 / r);
  }
  if (s.N >= 2) c.beta_c_ratio = to_double(s.total(s.N - 1) / s.total(s.N));
  return c;
}

std::vector<Rational> saw_open_bubble_coefficients(const SawSeries& s) {
  SawExact ex(s);
  std::vector<Rational> B(std::max(s.N, 0));
  Rational q2K = Rational(ex.qK * ex.qK);
  for (int p = 0; p < s.N; ++p) {
    BigInt acc = 0;
    for (int a = 0; a <= p; ++a) acc += ex.P[a][p - a][ex.box.origin];
    B[p] = Rational(acc) * rational_pow(ex.w, p + 1) / q2K;
  }
  return B;
}

InequalityReport saw_check_I1(const SawSeries& s, const Rational& beta_low, const Rational& beta_high) {
  InequalityReport r = make_report("saw_I1", "G_b - G_b' <= (b - b') G_b' * J * G_b, degree matched", 0.0);
  std::ostringstream g;
  g << "d=" << s.d << " " << s.kernel.name() << " lambda=" << to_string(s.lambda) << " N=" << s.N
    << " beta'=" << to_string(beta_low) << " beta=" << to_string(beta_high);
  r.grid = g.str();
  if (beta_low > beta_high || beta_low < 0) throw std::invalid_argument("saw_check_I1: need 0 <= beta' <= beta");
  SawExact ex(s);
  const std::size_t M = ex.box.size;
  const BigInt q2K = ex.qK * ex.qK;
  std::vector<Rational> eval(M);
  std::vector<char> touched(M, 0);
  std::size_t monomial_fail = 0;
  double worst_mono = kInf;
  std::string worst_mono_at;
  const Rational db = beta_high - beta_low;
  for (int a = 0; a < s.N; ++a) {
    for (int b = 0; a + b <= s.N - 1; ++b) {
      const int n = a + b + 1;
      std::vector<BigInt> lhs = ex.dense_Q(n);
      const auto& rhs = ex.P[a][b];
      Rational unit = rational_pow(ex.w, n) / Rational(q2K);
      Rational f = db * rational_pow(beta_low, a) * rational_pow(beta_high, b) * unit;
      for (std::size_t i = 0; i < M; ++i) {
        if (lhs[i] == 0 && rhs[i] == 0) continue;
        BigInt res = rhs[i] - lhs[i] * ex.qK;
        touched[i] = 1;
        if (res < 0) ++monomial_fail;
        double rv = signed_double(Rational(res) * unit);
        if (rv < worst_mono) {
          worst_mono = rv;
          worst_mono_at = "a=" + std::to_string(a) + " b=" + std::to_string(b) + " x=" + point_str(ex.box.point(i));
        }
        if (f != 0) eval[i] += f * Rational(res);
      }
    }
  }
  for (std::size_t i = 0; i < M; ++i) {
    if (!touched[i]) continue;
    r.record_with(signed_double(eval[i]), [&] { return "x=" + point_str(ex.box.point(i)); });
  }
  if (monomial_fail > 0) r.record(worst_mono, "monomial " + worst_mono_at);
  r.details["monomial_failures"] = monomial_fail;
  r.details["worst_monomial_residual"] = worst_mono;
  r.details["worst_monomial_at"] = worst_mono_at;
  r.details["arithmetic"] = "exact rational";
  r.finalize();
  return r;
}

InequalityReport saw_check_I2(const SawSeries& s, const Rational& beta) {
  InequalityReport r =
      make_report("saw_I2", "dG >= G*J*G - G*H*G with H = lambda B_open delta_0, degree matched", 0.0);
  std::ostringstream g;
  g << "d=" << s.d << " " << s.kernel.name() << " lambda=" << to_string(s.lambda) << " N=" << s.N
    << " beta=" << to_string(beta);
  r.grid = g.str();
  if (beta < 0) throw std::invalid_argument("saw_check_I2: beta must be nonnegative");
  SawExact ex(s);
  const std::size_t M = ex.box.size;
  const BigInt q2K = ex.qK * ex.qK, q3K = q2K * ex.qK, q4K = q2K * q2K;
  const BigInt lnum = s.lambda.get_num(), lden = s.lambda.get_den();
  // Bint_p and CC_q.
  std::vector<BigInt> Bint(s.N);
  for (int p = 0; p < s.N; ++p)
    for (int a = 0; a <= p; ++a) Bint[p] += ex.P[a][p - a][ex.box.origin];
  std::vector<std::vector<BigInt>> CC(s.N, std::vector<BigInt>(M));
  {
    std::vector<std::pair<int, int>> ef;
    for (int e = 0; e < s.N; ++e)
      for (int f = 0; e + f <= s.N - 1; ++f) ef.emplace_back(e, f);
    std::vector<std::vector<BigInt>> prod(ef.size());
    if (lnum != 0) parallel_for(ef.size(), [&](std::size_t i) { prod[i] = ex.convolve_dense(ex.Q[ef[i].first], ex.Q[ef[i].second]); });
    for (std::size_t i = 0; i < ef.size() && lnum != 0; ++i) {
      auto& dst = CC[ef[i].first + ef[i].second];
      for (std::size_t j = 0; j < M; ++j) dst[j] += prod[i][j];
    }
  }
  std::vector<Rational> eval(M);
  std::vector<char> touched(M, 0);
  std::size_t monomial_fail = 0;
  double worst_mono = kInf;
  std::string worst_mono_at;
  for (int m = 0; m <= s.N - 1; ++m) {
    const int n = m + 1;
    std::vector<BigInt> Qn = ex.dense_Q(n);
    std::vector<BigInt> jj(M);
    for (int a = 0; a <= m; ++a)
      for (std::size_t i = 0; i < M; ++i) jj[i] += ex.P[a][m - a][i];
    std::vector<BigInt> hh(M);
    if (lnum != 0)
      for (int p = 0; p <= m; ++p)
        if (Bint[p] != 0)
          for (std::size_t i = 0; i < M; ++i)
            if (CC[m - p][i] != 0) mpz_addmul(hh[i].get_mpz_t(), Bint[p].get_mpz_t(), CC[m - p][i].get_mpz_t());
    Rational unit = rational_pow(ex.w, n) / Rational(q4K * lden);
    Rational f = rational_pow(beta, m) * unit;
    for (std::size_t i = 0; i < M; ++i) {
      if (Qn[i] == 0 && jj[i] == 0 && hh[i] == 0) continue;
      BigInt res = BigInt(n) * Qn[i] * q3K * lden - q2K * lden * jj[i] + lnum * hh[i];
      touched[i] = 1;
      if (res < 0) ++monomial_fail;
      double rv = signed_double(Rational(res) * unit);
      if (rv < worst_mono) {
        worst_mono = rv;
        worst_mono_at = "degree " + std::to_string(m) + " x=" + point_str(ex.box.point(i));
      }
      if (f != 0) eval[i] += f * Rational(res);
    }
  }
  for (std::size_t i = 0; i < M; ++i) {
    if (!touched[i]) continue;
    r.record_with(signed_double(eval[i]), [&] { return "x=" + point_str(ex.box.point(i)); });
  }
  if (monomial_fail > 0) r.record(worst_mono, "monomial " + worst_mono_at);
  r.details["monomial_failures"] = monomial_fail;
  r.details["worst_monomial_residual"] = worst_mono;
  r.details["worst_monomial_at"] = worst_mono_at;
  r.details["arithmetic"] = "exact rational";
  r.finalize();
  return r;
}

InequalityReport saw_submultiplicativity(const SawSeries& s) {
  InequalityReport r = make_report("saw_submultiplicative", "c_{m+n} <= c_m c_n", 0.0);
  r.grid = s.kernel.name() + " lambda=" + to_string(s.lambda) + " N=" + std::to_string(s.N);
  std::vector<Rational> c;
  for (int n = 0; n <= s.N; ++n) c.push_back(s.total(n));
  for (int m = 1; m <= s.N; ++m)
    for (int n = m; m + n <= s.N; ++n)
      r.record(signed_double(c[m] * c[n] - c[m + n]), "m=" + std::to_string(m) + " n=" + std::to_string(n));
  r.finalize();
  return r;
}

std::string saw_series_to_json(const SawSeries& s, bool exact) {
  Json j;
  j["model"] = "saw";
  j["d"] = s.d;
  j["family"] = s.kernel.family == KernelFamily::NearestNeighbour ? "nn" : "spread_out";
  j["R"] = s.kernel.R;
  j["lambda"] = to_string(s.lambda);
  j["N"] = s.N;
  j["nodes"] = s.nodes;
  BoxIndex box(s.d, s.L);
  Json degrees = Json::array();
  for (int n = 0; n <= s.N; ++n) {
    Json sites = Json::array();
    for (const auto& [idx, ks] : s.counts[n]) {
      Json e = {{"x", box.point(idx)}, {"counts_by_k", ks}};
      if (exact) e["c"] = to_string(s.coefficient(n, box.point(idx)));
      sites.push_back(std::move(e));
    }
    degrees.push_back({{"n", n}, {"total", exact ? Json(to_string(s.total(n))) : Json(to_double(s.total(n)))},
                       {"sites", std::move(sites)}});
  }
  j["degrees"] = std::move(degrees);
  return j.dump();
}

SawSeries saw_series_from_json(const std::string& text) {
  Json j = Json::parse(text);
  if (j.value("model", "") != "saw") throw std::invalid_argument("not a saw series");
  SawSeries s;
  s.kernel = make_kernel(j.at("family").get<std::string>(), j.at("d").get<int>(), j.at("R").get<int>());
  s.d = s.kernel.d;
  s.N = j.at("N").get<int>();
  s.L = s.N * s.kernel.R;
  s.lambda = parse_rational(j.at("lambda").get<std::string>());
  s.weight = s.kernel.weight;
  s.nodes = j.value("nodes", std::uint64_t{0});
  BoxIndex box(s.d, s.L);
  s.counts.assign(s.N + 1, {});
  for (const auto& deg : j.at("degrees")) {
    int n = deg.at("n").get<int>();
    for (const auto& e : deg.at("sites")) {
      Point x = e.at("x").get<Point>();
      std::size_t idx = static_cast<std::size_t>(box.origin + box.offset(x));
      s.counts.at(n).emplace_back(idx, e.at("counts_by_k").get<std::vector<std::uint64_t>>());
    }
    std::sort(s.counts[n].begin(), s.counts[n].end());
  }
  return s;
}

}  // namespace mflab

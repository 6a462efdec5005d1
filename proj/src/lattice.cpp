#include "mflab/lattice.hpp"

#include <fftw3.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <stdexcept>

#include "json.hpp"

namespace mflab {

namespace {

std::atomic<int> g_max_radius{256};
std::atomic<std::size_t> g_max_sites{40'000'000};
std::mutex g_fftw_mutex;

std::size_t ipow(std::size_t b, int e) {
  std::size_t r = 1;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

void check_sites(int d, int L) {
  double n = std::pow(2.0 * L + 1.0, d);
  if (n > static_cast<double>(g_max_sites.load()))
    throw std::length_error("field of radius " + std::to_string(L) + " in d=" + std::to_string(d) +
                            " exceeds the site cap (" + std::to_string(g_max_sites.load()) + ")");
}

// Smallest n >= m whose prime factors are 2, 3, 5, 7.
std::size_t good_fft_size(std::size_t m) {
  for (std::size_t n = std::max<std::size_t>(m, 1);; ++n) {
    std::size_t r = n;
    for (std::size_t p : {2, 3, 5, 7})
      while (r % p == 0) r /= p;
    if (r == 1) return n;
  }
}

double safe_mul(double a, double b) {
  if (a == 0.0 || b == 0.0) return 0.0;
  return a * b;
}

// Missing second moment of a*b given masses S and second moments M.
double m2_piece(double sa, double ma, double sb, double mb, bool sym) {
  double v = safe_mul(sa, mb) + safe_mul(sb, ma);
  if (!sym) {
    double c = safe_mul(safe_mul(sa, ma), safe_mul(sb, mb));
    v += 2.0 * std::sqrt(c);
  }
  return v;
}

bool all_nonneg(const LatticeField& f) {
  return std::all_of(f.values.begin(), f.values.end(), [](double v) { return v >= 0; });
}

std::vector<double> first_moments(const LatticeField& f) {
  std::vector<double> m(f.d, 0.0);
  f.for_each([&](std::size_t i, const int* x) {
    for (int a = 0; a < f.d; ++a) m[a] += f.values[i] * x[a];
  });
  return m;
}

LatticeField convolve_direct(const LatticeField& f, const LatticeField& g) {
  const int d = f.d;
  const int Lh = f.L + g.L;
  LatticeField h(d, Lh);
  const std::size_t sg = g.side();
  const std::size_t sh = h.side();
  const std::size_t rows_g = g.size() / sg;
  std::vector<std::size_t> stride_h(d);
  stride_h[d - 1] = 1;
  for (int a = d - 2; a >= 0; --a) stride_h[a] = stride_h[a + 1] * sh;
  std::vector<int> y(d), w(d);
  for (std::size_t i = 0; i < f.size(); ++i) {
    double fv = f.values[i];
    if (fv == 0.0) continue;
    std::size_t r = i;
    for (int a = d - 1; a >= 0; --a) {
      y[a] = static_cast<int>(r % f.side()) - f.L;
      r /= f.side();
    }
    // Offset of (y + w) with w = (-Lg,...,-Lg) in h.
    for (std::size_t row = 0; row < rows_g; ++row) {
      std::size_t rr = row;
      std::size_t base = 0;
      for (int a = d - 2; a >= 0; --a) {
        int wa = static_cast<int>(rr % sg) - g.L;
        rr /= sg;
        base += static_cast<std::size_t>(y[a] + wa + Lh) * stride_h[a];
      }
      base += static_cast<std::size_t>(y[d - 1] - g.L + Lh);
      const double* gr = &g.values[row * sg];
      double* hr = &h.values[base];
      for (std::size_t k = 0; k < sg; ++k) hr[k] += fv * gr[k];
    }
  }
  return h;
}

// Output only on Λ_c, c <= L_f + L_g. A cyclic length of L_f+L_g+c+1 keeps
// that window free of wrap-around.
LatticeField convolve_fft(const LatticeField& f, const LatticeField& g, int c) {
  const int d = f.d;
  const int Lh = f.L + g.L;
  const std::size_t need = static_cast<std::size_t>(Lh + c + 1);
  const std::size_t n = good_fft_size(need);
  std::vector<int> dims(d, static_cast<int>(n));
  const std::size_t total = ipow(n, d);
  const std::size_t nc = total / n * (n / 2 + 1);

  double* a = fftw_alloc_real(total);
  double* b = fftw_alloc_real(total);
  fftw_complex* fa = fftw_alloc_complex(nc);
  fftw_complex* fb = fftw_alloc_complex(nc);
  std::fill(a, a + total, 0.0);
  std::fill(b, b + total, 0.0);

  auto scatter = [&](const LatticeField& src, double* dst) {
    const std::size_t s = src.side();
    const std::size_t rows = src.size() / s;
    for (std::size_t row = 0; row < rows; ++row) {
      std::size_t rr = row, off = 0, mul = n;
      for (int ax = d - 2; ax >= 0; --ax) {
        off += (rr % s) * mul;
        rr /= s;
        mul *= n;
      }
      std::memcpy(dst + off, &src.values[row * s], s * sizeof(double));
    }
  };
  scatter(f, a);
  scatter(g, b);

  fftw_plan pa, pb, pc;
  {
    std::lock_guard<std::mutex> lock(g_fftw_mutex);
    pa = fftw_plan_dft_r2c(d, dims.data(), a, fa, FFTW_ESTIMATE);
    pb = fftw_plan_dft_r2c(d, dims.data(), b, fb, FFTW_ESTIMATE);
    pc = fftw_plan_dft_c2r(d, dims.data(), fa, a, FFTW_ESTIMATE);
  }
  fftw_execute(pa);
  fftw_execute(pb);
  for (std::size_t k = 0; k < nc; ++k) {
    double re = fa[k][0] * fb[k][0] - fa[k][1] * fb[k][1];
    double im = fa[k][0] * fb[k][1] + fa[k][1] * fb[k][0];
    fa[k][0] = re;
    fa[k][1] = im;
  }
  fftw_execute(pc);

  LatticeField h(d, c);
  const double norm = 1.0 / static_cast<double>(total);
  const std::size_t shift = static_cast<std::size_t>(Lh - c);
  const bool nonneg = std::all_of(f.values.begin(), f.values.end(), [](double v) { return v >= 0; }) &&
                      std::all_of(g.values.begin(), g.values.end(), [](double v) { return v >= 0; });
  const std::size_t s = h.side();
  const std::size_t rows = h.size() / s;
  for (std::size_t row = 0; row < rows; ++row) {
    std::size_t rr = row, off = 0, mul = n;
    for (int ax = d - 2; ax >= 0; --ax) {
      off += (rr % s + shift) * mul;
      rr /= s;
      mul *= n;
    }
    for (std::size_t k = 0; k < s; ++k) {
      double v = a[off + shift + k] * norm;
      if (nonneg && v < 0) v = 0.0;
      h.values[row * s + k] = v;
    }
  }
  {
    std::lock_guard<std::mutex> lock(g_fftw_mutex);
    fftw_destroy_plan(pa);
    fftw_destroy_plan(pb);
    fftw_destroy_plan(pc);
  }
  fftw_free(a);
  fftw_free(b);
  fftw_free(fa);
  fftw_free(fb);
  return h;
}

}  // namespace

int norm_inf(const Point& x) {
  int m = 0;
  for (int c : x) m = std::max(m, std::abs(c));
  return m;
}

long long norm2_sq(const Point& x) {
  long long s = 0;
  for (int c : x) s += static_cast<long long>(c) * c;
  return s;
}

double norm2(const Point& x) { return std::sqrt(static_cast<double>(norm2_sq(x))); }

Point unit_vector(int d, int axis, int length) {
  Point p(d, 0);
  p.at(axis) = length;
  return p;
}

LatticeBox::LatticeBox(int dim, int radius) : d(dim), k(radius), center(dim, 0) {
  if (dim < 1) throw std::invalid_argument("dimension must be >= 1");
  if (radius < 0) throw std::invalid_argument("box radius must be >= 0");
}

LatticeBox::LatticeBox(int radius, Point c) : d(static_cast<int>(c.size())), k(radius), center(std::move(c)) {
  if (d < 1) throw std::invalid_argument("dimension must be >= 1");
}

std::size_t LatticeBox::site_count() const { return ipow(static_cast<std::size_t>(2 * k + 1), d); }

bool LatticeBox::contains(const Point& x) const {
  for (int a = 0; a < d; ++a)
    if (std::abs(x[a] - center[a]) > k) return false;
  return true;
}

std::vector<Point> LatticeBox::sites() const {
  std::vector<Point> out;
  out.reserve(site_count());
  Point x(d);
  for (std::size_t i = 0; i < site_count(); ++i) {
    std::size_t r = i;
    for (int a = d - 1; a >= 0; --a) {
      x[a] = static_cast<int>(r % (2 * k + 1)) - k + center[a];
      r /= (2 * k + 1);
    }
    out.push_back(x);
  }
  return out;
}

void set_max_radius(int radius) {
  if (radius < 1) throw std::invalid_argument("max radius must be >= 1");
  g_max_radius = radius;
}
int max_radius() { return g_max_radius.load(); }
void set_max_sites(std::size_t sites) { g_max_sites = sites; }
std::size_t max_sites() { return g_max_sites.load(); }

LatticeField::LatticeField(int dim, int radius) : d(dim), L(radius) {
  if (dim < 1) throw std::invalid_argument("dimension must be >= 1");
  if (radius < 0) throw std::invalid_argument("radius must be >= 0");
  check_sites(dim, radius);
  values.assign(ipow(side(), d), 0.0);
}

LatticeField LatticeField::delta(int dim, double value) {
  LatticeField f(dim, 0);
  f.values[0] = value;
  return f;
}

bool LatticeField::in_box(const Point& x) const {
  if (static_cast<int>(x.size()) != d) return false;
  for (int c : x)
    if (std::abs(c) > L) return false;
  return true;
}

std::size_t LatticeField::index_of(const Point& x) const {
  std::size_t idx = 0;
  for (int a = 0; a < d; ++a) idx = idx * side() + static_cast<std::size_t>(x[a] + L);
  return idx;
}

Point LatticeField::point_of(std::size_t idx) const {
  Point x(d);
  for (int a = d - 1; a >= 0; --a) {
    x[a] = static_cast<int>(idx % side()) - L;
    idx /= side();
  }
  return x;
}

double LatticeField::at(const Point& x) const { return in_box(x) ? values[index_of(x)] : 0.0; }

void LatticeField::set(const Point& x, double v) {
  if (!in_box(x)) throw std::out_of_range("point outside field box");
  values[index_of(x)] = v;
}

double LatticeField::sum() const {
  // Pairwise-free Neumaier summation keeps mass identities tight.
  double s = 0.0, c = 0.0;
  for (double v : values) {
    double t = s + v;
    c += std::fabs(s) >= std::fabs(v) ? (s - t) + v : (v - t) + s;
    s = t;
  }
  return s + c;
}

double LatticeField::moment2() const {
  auto n2 = norm2_table(d, L);
  double s = 0.0, c = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    double v = values[i] * n2[i];
    double t = s + v;
    c += std::fabs(s) >= std::fabs(v) ? (s - t) + v : (v - t) + s;
    s = t;
  }
  return s + c;
}

double LatticeField::max_value() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, v);
  return m;
}

Interval LatticeField::l1_norm() const {
  double s = sum();
  return {s, s + tail_bound, tail_exact ? s + tail_bound : s};
}

Interval LatticeField::second_moment() const {
  double s = moment2();
  return {s, s + tail_m2, tail_exact ? s + tail_m2 : s};
}

std::vector<double> norm2_table(int d, int L) {
  std::size_t side = 2 * L + 1;
  std::vector<double> t(ipow(side, d));
  std::vector<int> x(d, -L);
  long long s = static_cast<long long>(d) * L * L;
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = static_cast<double>(s);
    for (int a = d - 1; a >= 0; --a) {
      s -= static_cast<long long>(x[a]) * x[a];
      if (++x[a] <= L) {
        s += static_cast<long long>(x[a]) * x[a];
        break;
      }
      x[a] = -L;
      s += static_cast<long long>(L) * L;
    }
  }
  return t;
}

LatticeField LatticeField::restricted(int radius) const {
  if (radius >= L) return *this;
  LatticeField r(d, radius);
  r.tail_bound = tail_bound;
  r.tail_m2 = tail_m2;
  r.tail_exact = tail_exact;
  r.symmetric = symmetric;
  double lost = 0.0, lost_m2 = 0.0;
  const std::size_t s = side(), rs = r.side();
  const std::size_t rows = size() / s;
  const std::size_t shift = static_cast<std::size_t>(L - radius);
  std::vector<int> lead(std::max(d - 1, 0), -L);
  for (std::size_t row = 0; row < rows; ++row) {
    bool inside = true;
    long long n2 = 0;
    std::size_t off = 0;
    for (int a = 0; a < d - 1; ++a) {
      if (std::abs(lead[a]) > radius) inside = false;
      n2 += static_cast<long long>(lead[a]) * lead[a];
      off = off * rs + static_cast<std::size_t>(lead[a] + radius);
    }
    const double* src = &values[row * s];
    for (std::size_t k = 0; k < s; ++k) {
      const int x = static_cast<int>(k) - L;
      if (inside && std::abs(x) <= radius) continue;
      const double v = std::fabs(src[k]);
      lost += v;
      lost_m2 += v * static_cast<double>(n2 + static_cast<long long>(x) * x);
    }
    if (inside) std::memcpy(&r.values[off * rs], src + shift, rs * sizeof(double));
    for (int a = d - 2; a >= 0; --a) {
      if (++lead[a] <= L) break;
      lead[a] = -L;
    }
  }
  r.tail_bound += lost;
  r.tail_m2 += lost_m2;
  return r;
}

LatticeField LatticeField::embedded(int radius) const {
  if (radius <= L) return *this;
  LatticeField r(d, radius);
  r.tail_bound = tail_bound;
  r.tail_m2 = tail_m2;
  r.tail_exact = tail_exact;
  r.symmetric = symmetric;
  const std::size_t s = side(), rs = r.side();
  const std::size_t shift = static_cast<std::size_t>(radius - L);
  const std::size_t rows = size() / s;
  for (std::size_t row = 0; row < rows; ++row) {
    std::size_t rr = row, off = shift, mul = rs;
    for (int ax = d - 2; ax >= 0; --ax) {
      off += (rr % s + shift) * mul;
      rr /= s;
      mul *= rs;
    }
    std::memcpy(&r.values[off], &values[row * s], s * sizeof(double));
  }
  return r;
}

LatticeField convolve(const LatticeField& f, const LatticeField& g, const ConvOptions& opt) {
  if (f.d != g.d) throw std::invalid_argument("convolve: dimension mismatch");
  const int cap = opt.max_radius > 0 ? opt.max_radius : max_radius();
  const int full = f.L + g.L;

  ConvMethod m = opt.method;
  if (m == ConvMethod::Auto) {
    std::size_t nnz = 0;
    for (double v : f.values) nnz += v != 0.0;
    double direct = static_cast<double>(nnz) * static_cast<double>(g.size());
    double n = static_cast<double>(good_fft_size(static_cast<std::size_t>(full + std::min(cap, full) + 1)));
    double total = std::pow(n, f.d);
    double fft = 3.0 * total * std::log2(std::max(total, 2.0)) * 2.5;
    m = direct <= fft ? ConvMethod::Direct : ConvMethod::Fft;
  }
  const double sf = f.sum(), sg = g.sum();
  const double mf = f.moment2(), mg = g.moment2();
  const bool nonneg = all_nonneg(f) && all_nonneg(g);
  LatticeField h;
  double lost = 0.0, lost_m2 = 0.0;
  if (m == ConvMethod::Direct) {
    h = convolve_direct(f, g);
  } else if (nonneg && full > cap) {
    // Window only; the discarded part follows from the exact full-convolution
    // mass sf*sg and second moment sf*mg + sg*mf + 2<m1f, m1g>.
    h = convolve_fft(f, g, cap);
    auto m1f = first_moments(f), m1g = first_moments(g);
    double cross = 0.0;
    for (int a = 0; a < f.d; ++a) cross += 2.0 * m1f[a] * m1g[a];
    lost = std::max(0.0, sf * sg - h.sum());
    lost_m2 = std::max(0.0, sf * mg + sg * mf + cross - h.moment2());
  } else {
    h = convolve_fft(f, g, full);
  }

  const bool sym = f.symmetric && g.symmetric;
  h.symmetric = sym;
  h.tail_exact = f.tail_exact && g.tail_exact && sym;
  h.tail_bound = safe_mul(sf, g.tail_bound) + safe_mul(sg, f.tail_bound) + safe_mul(f.tail_bound, g.tail_bound);
  h.tail_m2 = m2_piece(sf, mf, g.tail_bound, g.tail_m2, sym) + m2_piece(f.tail_bound, f.tail_m2, sg, mg, sym) +
              m2_piece(f.tail_bound, f.tail_m2, g.tail_bound, g.tail_m2, sym);
  h.tail_bound += lost;
  h.tail_m2 += lost_m2;
  if (h.L > cap) h = h.restricted(cap);
  return h;
}

LatticeField symmetrize(const LatticeField& f) {
  std::map<std::vector<int>, std::pair<double, std::size_t>> orbit;
  std::vector<std::vector<int>> keys(f.size());
  f.for_each([&](std::size_t i, const int* x) {
    std::vector<int> k(x, x + f.d);
    for (int& c : k) c = std::abs(c);
    std::sort(k.begin(), k.end());
    auto& acc = orbit[k];
    acc.first += f.values[i];
    acc.second += 1;
    keys[i] = std::move(k);
  });
  LatticeField r = f;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto& acc = orbit[keys[i]];
    r.values[i] = acc.first / static_cast<double>(acc.second);
  }
  r.symmetric = true;
  return r;
}

LatticeField linear_combination(double a, const LatticeField& f, double b, const LatticeField& g) {
  if (f.d != g.d) throw std::invalid_argument("linear_combination: dimension mismatch");
  int L = std::max(f.L, g.L);
  LatticeField fe = f.embedded(L), ge = g.embedded(L);
  LatticeField r(f.d, L);
  for (std::size_t i = 0; i < r.size(); ++i) r.values[i] = a * fe.values[i] + b * ge.values[i];
  r.tail_bound = safe_mul(std::fabs(a), f.tail_bound) + safe_mul(std::fabs(b), g.tail_bound);
  r.tail_m2 = safe_mul(std::fabs(a), f.tail_m2) + safe_mul(std::fabs(b), g.tail_m2);
  r.tail_exact = f.tail_exact && g.tail_exact && a >= 0 && b >= 0;
  r.symmetric = f.symmetric && g.symmetric;
  return r;
}

LatticeField scaled(const LatticeField& f, double s) {
  LatticeField r = f;
  for (double& v : r.values) v *= s;
  r.tail_bound = safe_mul(std::fabs(s), f.tail_bound);
  r.tail_m2 = safe_mul(std::fabs(s), f.tail_m2);
  r.tail_exact = f.tail_exact && s >= 0;
  return r;
}

LatticeField pointwise_product(const LatticeField& f, const LatticeField& g) {
  if (f.d != g.d) throw std::invalid_argument("pointwise_product: dimension mismatch");
  int L = std::min(f.L, g.L);
  LatticeField fr = f.L > L ? f.restricted(L) : f;
  LatticeField gr = g.L > L ? g.restricted(L) : g;
  LatticeField r(f.d, L);
  for (std::size_t i = 0; i < r.size(); ++i) r.values[i] = fr.values[i] * gr.values[i];
  double mf = fr.max_value(), mg = gr.max_value();
  r.tail_bound = safe_mul(mf, gr.tail_bound) + safe_mul(mg, fr.tail_bound) + safe_mul(fr.tail_bound, gr.tail_bound);
  r.tail_m2 = safe_mul(mf, gr.tail_m2) + safe_mul(mg, fr.tail_m2) + safe_mul(fr.tail_bound, gr.tail_m2);
  r.tail_exact = r.tail_bound == 0.0 && r.tail_m2 == 0.0;
  r.symmetric = f.symmetric && g.symmetric;
  return r;
}

LatticeField reflected(const LatticeField& f) {
  LatticeField r = f;
  std::reverse(r.values.begin(), r.values.end());
  return r;
}

bool is_symmetric(const LatticeField& f, double rel_tol) {
  LatticeField s = symmetrize(f);
  double scale = std::max(f.max_value(), 1e-300);
  for (std::size_t i = 0; i < f.size(); ++i)
    if (std::fabs(s.values[i] - f.values[i]) > rel_tol * scale) return false;
  return true;
}

std::string field_to_json(const LatticeField& f) {
  nlohmann::json j;
  j["d"] = f.d;
  j["L"] = f.L;
  j["symmetric_flag"] = f.symmetric;
  j["tail_bound"] = std::isfinite(f.tail_bound) ? nlohmann::json(f.tail_bound) : nlohmann::json("inf");
  j["tail_m2"] = std::isfinite(f.tail_m2) ? nlohmann::json(f.tail_m2) : nlohmann::json("inf");
  j["tail_exact"] = f.tail_exact;
  j["values"] = f.values;
  return j.dump();
}

LatticeField field_from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  LatticeField f(j.at("d").get<int>(), j.at("L").get<int>());
  auto vals = j.at("values").get<std::vector<double>>();
  if (vals.size() != f.size()) throw std::invalid_argument("field json: value count does not match (2L+1)^d");
  f.values = std::move(vals);
  auto num = [](const nlohmann::json& v) { return v.is_string() ? kInf : v.get<double>(); };
  f.symmetric = j.value("symmetric_flag", false);
  f.tail_bound = j.contains("tail_bound") ? num(j["tail_bound"]) : 0.0;
  f.tail_m2 = j.contains("tail_m2") ? num(j["tail_m2"]) : 0.0;
  f.tail_exact = j.value("tail_exact", false);
  return f;
}

void write_field_binary(const LatticeField& f, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  const char magic[4] = {'M', 'F', 'L', 'F'};
  os.write(magic, 4);
  int32_t hdr[2] = {f.d, f.L};
  os.write(reinterpret_cast<const char*>(hdr), sizeof(hdr));
  uint8_t flags = (f.symmetric ? 1 : 0) | (f.tail_exact ? 2 : 0);
  os.write(reinterpret_cast<const char*>(&flags), 1);
  double tails[2] = {f.tail_bound, f.tail_m2};
  os.write(reinterpret_cast<const char*>(tails), sizeof(tails));
  os.write(reinterpret_cast<const char*>(f.values.data()), static_cast<std::streamsize>(f.values.size() * sizeof(double)));
}

LatticeField read_field_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  char magic[4];
  is.read(magic, 4);
  if (std::memcmp(magic, "MFLF", 4) != 0) throw std::runtime_error(path + ": not a field file");
  int32_t hdr[2];
  is.read(reinterpret_cast<char*>(hdr), sizeof(hdr));
  uint8_t flags = 0;
  is.read(reinterpret_cast<char*>(&flags), 1);
  double tails[2];
  is.read(reinterpret_cast<char*>(tails), sizeof(tails));
  LatticeField f(hdr[0], hdr[1]);
  is.read(reinterpret_cast<char*>(f.values.data()), static_cast<std::streamsize>(f.values.size() * sizeof(double)));
  if (!is) throw std::runtime_error(path + ": truncated field file");
  f.symmetric = flags & 1;
  f.tail_exact = flags & 2;
  f.tail_bound = tails[0];
  f.tail_m2 = tails[1];
  return f;
}

}  // namespace mflab

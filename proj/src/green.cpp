#include "mflab/green.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mflab/parallel.hpp"

namespace mflab {

namespace {

void check_beta(double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must lie in [0,1]");
}

// acc += w * p, where p lives on a box no larger than acc's.
void add_scaled_into(LatticeField& acc, const LatticeField& p, double w) {
  if (w == 0.0) return;
  const int d = acc.d;
  const std::size_t sp = p.side(), sa = acc.side();
  const std::size_t shift = static_cast<std::size_t>(acc.L - p.L);
  const std::size_t rows = p.size() / sp;
  for (std::size_t row = 0; row < rows; ++row) {
    std::size_t rr = row, off = shift, mul = sa;
    for (int ax = d - 2; ax >= 0; --ax) {
      off += (rr % sp + shift) * mul;
      rr /= sp;
      mul *= sa;
    }
    const double* src = &p.values[row * sp];
    double* dst = &acc.values[off];
    for (std::size_t k = 0; k < sp; ++k) dst[k] += w * src[k];
  }
}

// sum_{n>K} n^j beta^(n-e), summed until the terms stop mattering.
double tail_power_sum(double beta, int K, int j, int e) {
  if (beta >= 1.0) return kInf;
  const double peak = beta > 0.0 ? j / -std::log(beta) : 0.0;
  double acc = 0.0;
  for (long long n = K + 1; n < 100000000LL; ++n) {
    double term = std::pow(static_cast<double>(n), j) * std::pow(beta, static_cast<double>(n - e));
    acc += term;
    if (n > peak + 2 && term <= 1e-18 * acc) break;
    if (n > peak + 2 && acc == 0.0) break;
  }
  return acc;
}

double weight(double beta, int n) { return std::pow(beta, n); }
double dweight(double beta, int n) { return n == 0 ? 0.0 : n * std::pow(beta, n - 1); }

double log_factorial(int n) { return std::lgamma(static_cast<double>(n) + 1.0); }

// P[S_m = 0] for the one-dimensional nearest-neighbour walk.
double simple_return(int m, const std::vector<double>& lf) {
  if (m % 2) return 0.0;
  return std::exp(lf[m] - 2.0 * lf[m / 2] - m * std::log(2.0));
}

std::vector<double> nn_return_probabilities(int d, int n_max) {
  std::vector<double> lf(n_max + 1);
  for (int n = 0; n <= n_max; ++n) lf[n] = log_factorial(n);
  std::vector<double> prev(n_max + 1);
  for (int n = 0; n <= n_max; ++n) prev[n] = simple_return(n, lf);
  for (int j = 2; j <= d; ++j) {
    // Each step moves the new coordinate with probability 1/j.
    const double la = std::log(1.0 / j), lb = std::log(1.0 - 1.0 / j);
    std::vector<double> cur(n_max + 1, 0.0);
    for (int n = 0; n <= n_max; ++n) {
      double s = 0.0;
      for (int k = 0; k <= n; k += 2) {
        double pr = prev[n - k];
        if (pr == 0.0) continue;
        double lbin = lf[n] - lf[k] - lf[n - k] + k * la + (n - k) * lb;
        s += std::exp(lbin) * simple_return(k, lf) * pr;
      }
      cur[n] = s;
    }
    prev.swap(cur);
  }
  return prev;
}

// Distribution of the sum of m uniform{-R..R} variables, m -> m+1.
std::vector<double> uniform_step(const std::vector<double>& v, int R) {
  const std::size_t n = v.size();
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + v[i];
  std::vector<double> out(n + 2 * R, 0.0);
  const double w = 1.0 / (2 * R + 1);
  for (std::size_t i = 0; i < out.size(); ++i) {
    long long lo = static_cast<long long>(i) - 2 * R, hi = static_cast<long long>(i);
    lo = std::max(lo, 0LL);
    hi = std::min(hi, static_cast<long long>(n) - 1);
    if (hi >= lo) out[i] = w * (prefix[hi + 1] - prefix[lo]);
  }
  return out;
}

std::vector<double> ladder_return_probabilities(const AdmissibleKernel& J, int n_max) {
  int L = n_max * J.R;
  std::size_t sites = 1;
  for (int a = 0; a < J.d; ++a) sites *= static_cast<std::size_t>(2 * L + 1);
  if (sites > max_sites()) throw std::runtime_error("return_probabilities: box too large for this kernel");
  std::vector<double> out;
  LatticeField P = LatticeField::delta(J.d);
  out.push_back(1.0);
  for (int n = 1; n <= n_max; ++n) {
    P = kernel_apply(J, P, L);
    out.push_back(P.origin());
  }
  return out;
}

// Majorant sum_{n>K} t^n = t^{K+1}/(1-t) on nonnegative jets.
Jet geometric_tail(const Jet& t, int K) {
  return jet_pow(t, static_cast<unsigned>(K + 1)) / (Jet::constant(1.0) - t);
}

bool tail_small(const Jet& g, const Jet& tail, double eps) {
  for (int k = 0; k < 4; ++k)
    if (tail.c[k] > eps * std::max(1.0, std::fabs(g.c[k]))) return false;
  return true;
}

void finish_diagrams(OriginDiagrams& o) {
  const double b = o.beta;
  o.value = o.g0.c[0];
  o.bubble = o.g0.c[1];
  o.triangle = o.g0.c[1] + b * o.g0.c[2];
  o.square = o.g0.c[1] + 2.0 * b * o.g0.c[2] + b * b * o.g0.c[3];
  o.bubble_err = o.tail.c[1];
  o.triangle_err = o.tail.c[1] + b * o.tail.c[2];
  o.square_err = o.tail.c[1] + 2.0 * b * o.tail.c[2] + b * b * o.tail.c[3];
}

std::string loc(const Point& x) {
  std::ostringstream s;
  s << "(";
  for (std::size_t i = 0; i < x.size(); ++i) s << (i ? "," : "") << x[i];
  s << ")";
  return s.str();
}

}  // namespace

double GreenField::pointwise_error() const {
  if (!certified) return kInf;
  return kernel.max_value * field.tail_bound;
}

int order_for_tail(double beta, double eps) {
  check_beta(beta);
  if (beta == 0.0) return 0;
  if (beta >= 1.0) throw std::invalid_argument("order_for_tail: beta = 1 has no geometric tail");
  return std::max(0, static_cast<int>(std::ceil(std::log(eps * (1.0 - beta)) / std::log(beta))));
}

int green_radius(const AdmissibleKernel& J, int K, std::size_t site_budget) {
  int L = 0;
  auto sites = [&](int r) {
    double s = 1.0;
    for (int a = 0; a < J.d; ++a) s *= 2.0 * r + 1.0;
    return s;
  };
  while (sites(L + 1) <= static_cast<double>(site_budget) && L + 1 <= std::max(K, 1) * J.R) ++L;
  return std::max(L, std::min(J.R, std::max(K, 1) * J.R));
}

double decay_rate(const AdmissibleKernel& J, double beta) {
  check_beta(beta);
  if (beta == 0.0) return kInf;
  if (beta >= 1.0) return 0.0;
  double lo = 0.0, hi = 1.0;
  while (beta * kernel_axis_mgf(J, hi) < 1.0) hi *= 2.0;
  for (int it = 0; it < 100; ++it) {
    double mid = 0.5 * (lo + hi);
    (beta * kernel_axis_mgf(J, mid) < 1.0 ? lo : hi) = mid;
  }
  return lo;
}

int green_radius_for(const AdmissibleKernel& J, double beta, double eps, std::size_t site_budget) {
  const int K = beta > 0.0 && beta < 1.0 ? order_for_tail(beta, eps) : 1;
  const int cap = green_radius(J, K, site_budget);
  const double kappa = decay_rate(J, beta);
  if (!std::isfinite(kappa)) return std::min(cap, J.R);
  if (kappa <= 0.0) return cap;
  const double need = std::log(2.0 * J.d / (eps * (1.0 - beta))) / kappa + 2.0 * J.R;
  return std::min(cap, std::max(J.R, static_cast<int>(std::ceil(need))));
}

GreenLadder green_ladder(const AdmissibleKernel& J, const std::vector<double>& betas, int K, int L, bool derivative) {
  return green_ladder(J, betas, K, L, std::vector<char>(betas.size(), derivative ? 1 : 0));
}

GreenLadder green_ladder(const AdmissibleKernel& J, const std::vector<double>& betas, int K, int L,
                         const std::vector<char>& derivative_mask) {
  for (double b : betas) check_beta(b);
  if (derivative_mask.size() != betas.size()) throw std::invalid_argument("green_ladder: mask size mismatch");
  bool derivative = false;
  for (char c : derivative_mask) derivative = derivative || c;
  if (K < 0 || L < 0) throw std::invalid_argument("green_ladder: negative order or radius");
  const int d = J.d;
  const std::size_t nb = betas.size();
  GreenLadder out;
  out.K = K;
  out.L = L;
  out.betas = betas;
  out.G.assign(nb, LatticeField(d, L));
  if (derivative) {
    out.dG.resize(nb);
    for (std::size_t b = 0; b < nb; ++b) out.dG[b] = derivative_mask[b] ? LatticeField(d, L) : LatticeField(d, 0);
  }
  std::vector<double> tm(nb, 0.0), tm2(nb, 0.0), dtm(nb, 0.0), dtm2(nb, 0.0);

  LatticeField P = LatticeField::delta(d);
  for (int n = 0; n <= K; ++n) {
    if (n > 0) P = kernel_apply(J, P, L);
    out.ghost.push_back(P.tail_bound);
    parallel_for(nb, [&](std::size_t b) {
      const double w = weight(betas[b], n);
      add_scaled_into(out.G[b], P, w);
      tm[b] += w * P.tail_bound;
      tm2[b] += w * P.tail_m2;
      if (derivative_mask[b]) {
        const double wd = dweight(betas[b], n);
        add_scaled_into(out.dG[b], P, wd);
        dtm[b] += wd * P.tail_bound;
        dtm2[b] += wd * P.tail_m2;
      }
    });
  }
  const double s2 = J.sigma_sq;
  for (std::size_t b = 0; b < nb; ++b) {
    const double beta = betas[b];
    const bool finite = beta < 1.0;
    double st = finite ? tail_power_sum(beta, K, 0, 0) : kInf;
    out.series_tail.push_back(st);
    LatticeField& g = out.G[b];
    g.tail_exact = finite;
    g.tail_bound = finite ? tm[b] + st : kInf;
    g.tail_m2 = finite ? tm2[b] + s2 * tail_power_sum(beta, K, 1, 0) : kInf;
    if (derivative_mask[b]) {
      double sd = finite ? tail_power_sum(beta, K, 1, 1) : kInf;
      out.series_tail_d.push_back(sd);
      LatticeField& dg = out.dG[b];
      dg.tail_exact = finite;
      dg.tail_bound = finite ? dtm[b] + sd : kInf;
      dg.tail_m2 = finite ? dtm2[b] + s2 * tail_power_sum(beta, K, 2, 1) : kInf;
    }
  }
  return out;
}

void green_observables(const AdmissibleKernel& J, const LatticeField& G, Interval& chi, Interval& xi_sq) {
  const double s = G.sum(), m2 = G.moment2();
  const double s2 = J.sigma_sq;
  chi.lo = s;
  chi.hi = s + G.tail_bound;
  chi.est = G.tail_exact ? chi.hi : chi.lo;
  Interval m2F;
  m2F.lo = m2 + s2 * s;
  m2F.hi = m2 + G.tail_m2 + s2 * (s + G.tail_bound);
  m2F.est = G.tail_exact ? m2F.hi : m2F.lo;
  xi_sq = divide_nonneg(m2F, chi);
  if (G.tail_exact && std::isfinite(chi.hi)) xi_sq.est = m2F.hi / chi.hi;
  if (!std::isfinite(chi.hi)) xi_sq = {0.0, kInf, m2F.lo / chi.lo};
}

GreenField green_function(const AdmissibleKernel& J, double beta, int order, int radius) {
  check_beta(beta);
  if (beta == 1.0 && J.d <= 2) throw std::invalid_argument("green_function: beta = 1 requires d > 2");
  if (order < 0) throw std::invalid_argument("green_function: order must be nonnegative");
  const int L = radius >= 0 ? radius : green_radius(J, order);
  GreenLadder lad = green_ladder(J, {beta}, order, L, false);
  GreenField g;
  g.kernel = J;
  g.beta = beta;
  g.order = order;
  g.field = std::move(lad.G[0]);
  g.certified = beta < 1.0;
  if (g.certified) {
    g.truncation_error = lad.series_tail[0];
  } else {
    // Heuristic only: the last term's origin value times the order.
    g.truncation_error = order * return_probabilities(J, order).back();
  }
  green_observables(J, g.field, g.chi, g.xi_sq);
  return g;
}

std::vector<double> return_probabilities(const AdmissibleKernel& J, int n_max) {
  if (n_max < 0) throw std::invalid_argument("return_probabilities: negative order");
  if (J.family == KernelFamily::NearestNeighbour) return nn_return_probabilities(J.d, n_max);
  return ladder_return_probabilities(J, n_max);
}

OriginDiagrams green_origin_diagrams(const AdmissibleKernel& J, double beta, double eps) {
  check_beta(beta);
  if (beta >= 1.0) throw std::invalid_argument("green_origin_diagrams: beta must be < 1");
  OriginDiagrams o;
  o.beta = beta;
  const Jet b = Jet::variable(beta);
  int K = std::max(8, order_for_tail(beta, eps) + 8);

  if (J.family == KernelFamily::SpreadOut) {
    o.route = "uniform-walk transform";
    const double V = static_cast<double>(J.support_size + 1);
    const double q = 1.0 / V;
    const Jet s = b / (Jet::constant(1.0 - q) + q * b);
    const Jet pref = Jet::constant(1.0) - q * s;
    for (int attempt = 0; attempt < 40; ++attempt) {
      std::vector<double> u1{1.0};
      Jet A, pw = Jet::constant(1.0);
      for (int m = 0; m <= K; ++m) {
        if (m > 0) {
          u1 = uniform_step(u1, J.R);
          pw = pw * s;
        }
        A = A + std::pow(u1[u1.size() / 2], J.d) * pw;
      }
      u1 = uniform_step(u1, J.R);
      const double ubound = std::pow(*std::max_element(u1.begin(), u1.end()), J.d);
      o.g0 = pref * A;
      o.tail = ubound * (pref.abs_coeffs() * geometric_tail(s.abs_coeffs(), K));
      o.order = K;
      if (tail_small(o.g0, o.tail, eps)) break;
      K = K * 3 / 2;
    }
  } else {
    o.route = J.family == KernelFamily::NearestNeighbour ? "binomial mixing" : "capped ladder";
    for (int attempt = 0; attempt < 40; ++attempt) {
      std::vector<double> P = return_probabilities(J, K + 1);
      Jet g, pw = Jet::constant(1.0);
      for (int n = 0; n <= K; ++n) {
        if (n > 0) pw = pw * b;
        g = g + P[n] * pw;
      }
      // sup_x P_n(x) is nonincreasing in n; for nn the even return
      // probabilities decrease and the odd ones vanish.
      double pbound = J.family == KernelFamily::NearestNeighbour ? P[(K + 1) % 2 ? K : K + 1] : J.max_value;
      o.g0 = g;
      o.tail = pbound * geometric_tail(b, K);
      o.order = K;
      if (tail_small(o.g0, o.tail, eps)) break;
      K = K * 3 / 2;
    }
  }
  finish_diagrams(o);
  return o;
}

CriticalOrigin green_origin_critical(const AdmissibleKernel& J, int K) {
  if (J.d <= 2) throw std::invalid_argument("green_origin_critical: requires d > 2");
  if (K < 2) throw std::invalid_argument("green_origin_critical: K too small");
  CriticalOrigin c;
  c.K = K;
  c.exponent = J.d / 2.0 - 1.0;
  const int K4 = 4 * K;
  if (J.family == KernelFamily::SpreadOut) {
    const double q = 1.0 / static_cast<double>(J.support_size + 1);
    std::vector<double> u1{1.0};
    double acc = 1.0;
    for (int m = 1; m <= K4; ++m) {
      u1 = uniform_step(u1, J.R);
      acc += std::pow(u1[u1.size() / 2], J.d);
      if (m == K) c.partial_K = (1.0 - q) * acc;
    }
    c.partial_4K = (1.0 - q) * acc;
  } else {
    std::vector<double> P = return_probabilities(J, K4);
    double acc = 0.0;
    for (int n = 0; n <= K4; ++n) {
      acc += P[n];
      if (n == K) c.partial_K = acc;
    }
    c.partial_4K = acc;
  }
  const double f = std::pow(4.0, c.exponent);
  c.extrapolated = (f * c.partial_4K - c.partial_K) / (f - 1.0);
  return c;
}

std::vector<InequalityReport> green_identity_suite(const AdmissibleKernel& J,
                                                   const std::vector<std::pair<double, double>>& pairs, int order,
                                                   int radius, double tail_eps) {
  double top = 0.0;
  std::vector<double> betas;
  for (auto [lo, hi] : pairs) {
    check_beta(lo);
    check_beta(hi);
    if (lo > hi || hi >= 1.0) throw std::invalid_argument("green_identity_check: need 0 <= beta' <= beta < 1");
    top = std::max(top, hi);
    betas.push_back(lo);
    betas.push_back(hi);
  }
  std::sort(betas.begin(), betas.end());
  betas.erase(std::unique(betas.begin(), betas.end()), betas.end());
  auto index = [&](double b) { return static_cast<std::size_t>(std::find(betas.begin(), betas.end(), b) - betas.begin()); };

  const int K = order > 0 ? order : order_for_tail(top, tail_eps);
  const int L = radius > 0 ? radius : green_radius_for(J, top, tail_eps);
  std::vector<char> mask(betas.size(), 0);
  for (auto pr : pairs) mask[index(pr.second)] = 1;
  GreenLadder lad = green_ladder(J, betas, K, L, mask);
  const double mj = J.max_value;
  auto sup_C = [&](double b) { return 1.0 + b * mj / (1.0 - b); };
  auto sup_JC = [&](double b) { return mj / (1.0 - b); };

  std::vector<InequalityReport> out;
  for (auto [beta_low, beta_high] : pairs) {
    const LatticeField& G0 = lad.G[index(beta_low)];
    const LatticeField& G1 = lad.G[index(beta_high)];
    const LatticeField& D1 = lad.dG[index(beta_high)];
    const double db = beta_high - beta_low;
    InequalityReport rep = make_report("green_identity " + J.name(), "I.1 and I.2 with equality, H = 0", 0.0);
    std::ostringstream grid;
    grid << "beta'=" << beta_low << " beta=" << beta_high << " K=" << K << " L=" << L;
    rep.grid = grid.str();

    // The stored fields undershoot the true ones by at most max J times the
    // missing mass; a convolution loses at most missing mass times the sup
    // of the other factor (sup C_b <= 1 + b maxJ/(1-b), sup J*C_b <= maxJ/(1-b)).
    LatticeField F0 = kernel_apply(J, G0, L);
    LatticeField R1 = convolve(F0, G1, {L, ConvMethod::Auto});
    const double slack1 = 1e-12 * (1.0 + G0.sum() + G1.sum() + db * F0.sum() * G1.sum());
    const double bound1 = mj * (G0.tail_bound + G1.tail_bound) +
                          db * (F0.tail_bound * sup_C(beta_high) + sup_JC(beta_low) * G1.tail_bound) + slack1;
    double worst1 = 0.0;
    G1.for_each([&](std::size_t i, const int* x) {
      double r = (G1.values[i] - G0.values[i]) - db * R1.values[i];
      worst1 = std::max(worst1, std::fabs(r));
      rep.record_with(bound1 - std::fabs(r), [&] { return "difference x=" + loc(Point(x, x + J.d)); });
    });

    LatticeField F1 = beta_low == beta_high ? F0 : kernel_apply(J, G1, L);
    LatticeField R2 = convolve(F1, G1, {L, ConvMethod::Auto});
    const double slack2 = 1e-12 * (1.0 + D1.sum() + F1.sum() * G1.sum());
    const double bound2 = mj * D1.tail_bound + F1.tail_bound * sup_C(beta_high) + sup_JC(beta_high) * G1.tail_bound + slack2;
    double worst2 = 0.0;
    G1.for_each([&](std::size_t i, const int* x) {
      double r = D1.values[i] - R2.values[i];
      worst2 = std::max(worst2, std::fabs(r));
      rep.record_with(bound2 - std::fabs(r), [&] { return "derivative x=" + loc(Point(x, x + J.d)); });
    });
    rep.finalize();
    Interval chi0, xi0, chi1, xi1;
    green_observables(J, G0, chi0, xi0);
    green_observables(J, G1, chi1, xi1);
    rep.details = {{"order", K},
                   {"radius", L},
                   {"chi_low", chi0.est},
                   {"chi_high", chi1.est},
                   {"xi_sq_low", xi0.est},
                   {"xi_sq_high", xi1.est},
                   {"series_tail", lad.series_tail[index(beta_high)]},
                   {"box_ghost", lad.ghost.empty() ? 0.0 : lad.ghost.back()},
                   {"difference_max_residual", worst1},
                   {"difference_bound", bound1},
                   {"derivative_max_residual", worst2},
                   {"derivative_bound", bound2}};
    out.push_back(std::move(rep));
  }
  return out;
}

InequalityReport green_identity_check(const AdmissibleKernel& J, double beta_low, double beta_high, int order,
                                      int radius, double tail_eps) {
  return green_identity_suite(J, {{beta_low, beta_high}}, order, radius, tail_eps).front();
}

JWalkFit jwalk_fit(const AdmissibleKernel& J, double beta, int m_max, std::size_t site_budget) {
  if (J.d <= 2) throw std::invalid_argument("jwalk_fit: requires d > 2");
  if (m_max < 1) throw std::invalid_argument("jwalk_fit: m_max must be >= 1");
  check_beta(beta);
  const int d = J.d;
  const double sigma = J.sigma, sd = std::pow(sigma, d);
  JWalkFit fit;
  fit.c_grid = log_grid(1e-2, 2.0, 16);
  const std::size_t nc = fit.c_grid.size();
  fit.C_anti.assign(nc, 0.0);
  fit.C_anti_double.assign(nc, 0.0);
  fit.C_green.assign(nc, 0.0);

  const int L = std::min(green_radius(J, 2 * m_max, site_budget), 2 * m_max * J.R);
  LatticeField P = LatticeField::delta(d);
  for (int m = 1; m <= 2 * m_max; ++m) {
    P = kernel_apply(J, P, L);
    std::vector<double> shell(P.L + 1, 0.0);
    P.for_each([&](std::size_t i, const int* x) {
      int r = 0;
      for (int a = 0; a < d; ++a) r = std::max(r, std::abs(x[a]));
      shell[r] = std::max(shell[r], P.values[i]);
    });
    const double scale = sd * std::pow(m, d / 2.0);
    for (std::size_t c = 0; c < nc; ++c) {
      double best = 0.0;
      for (int r = 0; r <= P.L; ++r)
        if (shell[r] > 0) best = std::max(best, shell[r] * scale * std::exp(fit.c_grid[c] * r / (sigma * std::sqrt(m))));
      if (m <= m_max) fit.C_anti[c] = std::max(fit.C_anti[c], best);
      fit.C_anti_double[c] = std::max(fit.C_anti_double[c], best);
    }
  }

  if (beta < 1.0) {
    GreenField g = green_function(J, beta, order_for_tail(beta, 1e-10), green_radius(J, order_for_tail(beta, 1e-10), site_budget));
    const double err = g.pointwise_error();
    std::vector<double> shell(g.field.L + 1, 0.0);
    g.field.for_each([&](std::size_t i, const int* x) {
      int r = 0;
      for (int a = 0; a < d; ++a) r = std::max(r, std::abs(x[a]));
      double v = g.field.values[i] + err - (r == 0 ? 1.0 : 0.0);
      shell[r] = std::max(shell[r], v);
    });
    for (std::size_t c = 0; c < nc; ++c) {
      double best = 0.0;
      for (int r = 0; r <= g.field.L; ++r) {
        double w = sd * std::pow(std::max(sigma, static_cast<double>(r)) / sigma, d - 2) *
                   std::exp(fit.c_grid[c] * std::sqrt(1.0 - beta) * r / sigma);
        best = std::max(best, shell[r] * w);
      }
      fit.C_green[c] = best;
    }
  }
  if (J.family != KernelFamily::Custom) {
    fit.critical_origin = green_origin_critical(J, 500).extrapolated - 1.0;
    for (double& v : fit.C_green) v = std::max(v, fit.critical_origin * sd);
  }
  fit.C_total.resize(nc);
  for (std::size_t c = 0; c < nc; ++c) fit.C_total[c] = std::max(fit.C_anti_double[c], fit.C_green[c]);
  fit.selected = select_constants(fit.c_grid, fit.C_total, 2.0);
  return fit;
}

InequalityReport jwalk_estimates_check(const AdmissibleKernel& J, double beta, int m_max) {
  JWalkFit fit = jwalk_fit(J, beta, m_max);
  InequalityReport rep = make_report("jwalk_estimates " + J.name(), "J-walk anti-concentration and Green bounds", 0.0);
  std::ostringstream grid;
  grid << "beta=" << beta << " m<=" << m_max << " and " << 2 * m_max << ", c in [0.01,2] log grid (16)";
  rep.grid = grid.str();
  // One-step bound J_x <= 1/(c0 R^d).
  rep.record(1.0 / (J.c0 * std::pow(J.R, J.d)) - J.max_value, "m=1 one-step bound");
  // Stability of the fitted C under doubling m_max, at the selected c.
  std::size_t idx = 0;
  for (std::size_t c = 0; c < fit.c_grid.size(); ++c)
    if (fit.c_grid[c] == fit.selected.c) idx = c;
  double base = std::max(fit.C_anti[idx], fit.C_green[idx]);
  double ratio = fit.C_total[idx] / base;
  rep.record(2.0 - ratio, "doubling m_max at c=" + fmt(fit.selected.c));
  if (fit.critical_origin > 0)
    rep.record(fit.selected.C - fit.critical_origin * std::pow(J.sigma, J.d), "x=0, beta=1");
  rep.finalize();
  rep.details = {{"fit", fit.selected.to_json()},
                 {"C_anti", fit.C_anti},
                 {"C_anti_doubled", fit.C_anti_double},
                 {"C_green", fit.C_green},
                 {"critical_origin_minus_one", fit.critical_origin},
                 {"doubling_ratio", ratio}};
  return rep;
}

InequalityReport jwalk_kernel_scan(const std::vector<AdmissibleKernel>& kernels, double beta, int m_max) {
  if (kernels.size() < 2) throw std::invalid_argument("jwalk_kernel_scan: need at least two kernels");
  std::vector<JWalkFit> fits;
  for (const auto& J : kernels) fits.push_back(jwalk_fit(J, beta, m_max));
  double c_common = kInf;
  for (const auto& f : fits) c_common = std::min(c_common, f.selected.c);
  std::size_t idx = 0;
  for (std::size_t c = 0; c < fits[0].c_grid.size(); ++c)
    if (fits[0].c_grid[c] == c_common) idx = c;
  double lo = kInf, hi = 0.0;
  nlohmann::json per = nlohmann::json::array();
  for (std::size_t k = 0; k < fits.size(); ++k) {
    double C = fits[k].C_total[idx];
    lo = std::min(lo, C);
    hi = std::max(hi, C);
    per.push_back({{"kernel", kernels[k].name()}, {"C", C}, {"fit", fits[k].selected.to_json()}});
  }
  InequalityReport rep = make_report("jwalk_kernel_scan", "constants depend on d and c0 only", 0.0);
  rep.grid = "beta=" + fmt(beta) + " m<=" + std::to_string(2 * m_max) + " c=" + fmt(c_common);
  rep.record(2.0 - hi / lo, "max/min C across kernels");
  rep.finalize();
  rep.details = {{"kernels", per}, {"ratio", hi / lo}, {"c_common", c_common}};
  return rep;
}

}  // namespace mflab

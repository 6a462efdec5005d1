#include "mflab/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "mflab/effective_rw.hpp"
#include "mflab/green.hpp"
#include "mflab/parallel.hpp"
#include "mflab/rng.hpp"

namespace mflab {

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

// rhs - lhs on a scale of max(1, |lhs|, |rhs|); NaN when undefined.
double rel_residual(double lhs, double rhs) {
  if (std::isnan(lhs) || std::isnan(rhs)) return kNaN;
  if (std::isinf(rhs) && rhs > 0) return std::isinf(lhs) && lhs > 0 ? kNaN : kInf;
  if (std::isinf(lhs) && lhs < 0) return kInf;
  if (std::isinf(lhs) || std::isinf(rhs)) return -kInf;
  return (rhs - lhs) / std::max({1.0, std::abs(lhs), std::abs(rhs)});
}

// Largest value of fn over the corners of the given intervals (NaN corners skipped).
// fn receives one endpoint per interval.
double corner_max(const std::vector<Interval>& iv, const std::function<double(const std::vector<double>&)>& fn) {
  const std::size_t n = iv.size();
  double best = kNaN;
  std::vector<double> v(n);
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    for (std::size_t i = 0; i < n; ++i) v[i] = (mask >> i) & 1 ? iv[i].hi : iv[i].lo;
    double r = fn(v);
    if (std::isnan(r)) continue;
    if (std::isnan(best) || r > best) best = r;
  }
  return best;
}

double at_estimate(const std::vector<Interval>& iv, const std::function<double(const std::vector<double>&)>& fn) {
  std::vector<double> v;
  for (const auto& x : iv) v.push_back(x.est);
  return fn(v);
}

// Records the corner residual and tracks the estimate residual separately.
struct Tracker {
  InequalityReport& r;
  double est_worst = kInf;
  std::string est_where;
  std::size_t skipped = 0;

  void check(const std::vector<Interval>& iv, const std::function<double(const std::vector<double>&)>& fn,
             const std::function<std::string()>& where) {
    double weak = corner_max(iv, fn);
    if (std::isnan(weak)) {
      ++skipped;
      return;
    }
    r.record_with(weak, where);
    double e = at_estimate(iv, fn);
    if (!std::isnan(e) && e < est_worst) {
      est_worst = e;
      est_where = where();
    }
  }
  void finish() {
    r.details["estimate_worst_residual"] = std::isfinite(est_worst) ? nlohmann::json(est_worst) : nlohmann::json(fmt(est_worst));
    r.details["estimate_worst_location"] = est_where;
    r.details["undefined_corners_skipped"] = skipped;
  }
};

std::string pair_loc(double bp, double b) { return "beta'=" + fmt(bp) + " beta=" + fmt(b); }

std::string grid_desc(const std::vector<Observables>& rows) {
  if (rows.empty()) return "empty grid";
  return rows.front().label + "; " + std::to_string(rows.size()) + " grid points in [" + fmt(rows.front().beta) + ", " +
         fmt(rows.back().beta) + "]";
}

bool all_certified(const std::vector<Observables>& rows) {
  for (const auto& o : rows)
    if (!std::isfinite(o.chi.hi) || !std::isfinite(o.E.hi) || !std::isfinite(o.xi_sq.hi)) return false;
  return true;
}

Interval ratio(const Interval& num, const Interval& den) {
  Interval r;
  r.lo = den.hi > 0 ? num.lo / den.hi : 0.0;
  r.hi = den.lo > 0 ? num.hi / den.lo : kInf;
  r.est = num.est / den.est;
  return r;
}

LatticeField values_only(LatticeField f) {
  f.tail_bound = 0.0;
  f.tail_m2 = 0.0;
  f.tail_exact = true;
  return f;
}

double sup_abs(const LatticeField& f) {
  double m = 0.0;
  for (double v : f.values) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

InequalityReport check_chi_sandwich(const std::vector<Observables>& rows) {
  InequalityReport r = make_report("chi_sandwich", "(beta-beta')(1-E(beta)) <= 1/chi(beta') - 1/chi(beta) <= beta-beta'",
                                   kVerifyRelTol);
  r.grid = grid_desc(rows);
  Tracker t{r, kInf, {}, 0};
  for (std::size_t j = 0; j < rows.size(); ++j) {
    for (std::size_t i = 0; i <= j; ++i) {
      const double bp = rows[i].beta, b = rows[j].beta, db = b - bp;
      auto where = [&] { return pair_loc(bp, b); };
      // v = {chi', chi, E}
      t.check({rows[i].chi, rows[j].chi, rows[j].E},
               [&](const std::vector<double>& v) {
                 double lhs = db == 0.0 ? 0.0 : db * (1.0 - v[2]);
                 return rel_residual(lhs, 1.0 / v[0] - 1.0 / v[1]);
               },
               where);
      t.check({rows[i].chi, rows[j].chi},
              [&](const std::vector<double>& v) { return rel_residual(1.0 / v[0] - 1.0 / v[1], db); }, where);
    }
  }
  t.finish();
  r.certified = all_certified(rows);
  r.finalize();
  return r;
}

InequalityReport check_xi_chi_comparison(const std::vector<Observables>& rows) {
  InequalityReport r = make_report(
      "xi_chi_comparison", "(chi'/chi)^{(1+E)/(1-E)} <= (xi'/xi)^2 <= (chi'/chi)^{1-2E} when E(beta) < 1; factor-2 form when E is small",
      kVerifyRelTol);
  r.grid = grid_desc(rows);
  Tracker t{r, kInf, {}, 0};
  std::size_t vacuous_pairs = 0, factor2_pairs = 0;
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const Interval E = rows[j].E;
    for (std::size_t i = 0; i <= j; ++i) {
      auto where = [&] { return pair_loc(rows[i].beta, rows[j].beta); };
      if (!(E.lo < 1.0)) {
        ++vacuous_pairs;
        continue;
      }
      Interval Ec{E.lo, std::min(E.hi, std::nextafter(1.0, 0.0)), E.est};
      const Interval b = ratio(rows[i].chi, rows[j].chi);
      const Interval a = ratio(rows[i].xi_sq, rows[j].xi_sq);
      t.check({b, a, Ec},
              [](const std::vector<double>& v) {
                return rel_residual(std::pow(v[0], (1.0 + v[2]) / (1.0 - v[2])), v[1]);
              },
              where);
      t.check({b, a, Ec}, [](const std::vector<double>& v) { return rel_residual(v[1], std::pow(v[0], 1.0 - 2.0 * v[2])); },
              where);
      // Factor-2 comparison under its hypotheses, taken at their worst.
      if (E.hi <= 0.5 && E.hi <= std::max(b.lo, a.lo) / 4.0) {
        ++factor2_pairs;
        t.check({b, a}, [](const std::vector<double>& v) { return rel_residual(0.5 * v[0], v[1]); }, where);
        t.check({b, a}, [](const std::vector<double>& v) { return rel_residual(v[1], 2.0 * v[0]); }, where);
      }
    }
  }
  t.finish();
  r.details["pairs_with_E_ge_1"] = vacuous_pairs;
  r.details["factor2_pairs"] = factor2_pairs;
  if (r.checked == 0) r.vacuous = true;
  r.certified = all_certified(rows);
  r.finalize();
  return r;
}

InequalityReport check_Z_bounds(const std::vector<Observables>& rows) {
  InequalityReport r = make_report("Z_bounds", "bounds on Z_{beta',beta} = (beta-beta') chi(beta') in terms of chi and xi ratios",
                                   kVerifyRelTol);
  r.grid = grid_desc(rows);
  Tracker t{r, kInf, {}, 0};
  std::size_t n_first = 0, n_second = 0, n_third = 0, n_zero = 0;
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const Interval E = rows[j].E;
    const double b = rows[j].beta;
    for (std::size_t i = 0; i <= j; ++i) {
      const double bp = rows[i].beta, db = b - bp;
      auto where = [&] { return pair_loc(bp, b); };
      const Interval chip = rows[i].chi, chi = rows[j].chi;
      const Interval xr = ratio(rows[i].xi_sq, rows[j].xi_sq);
      // v = {chi', chi}
      t.check({chip, chi}, [&](const std::vector<double>& v) { return rel_residual(1.0 - v[0] / v[1], db * v[0]); }, where);
      if (E.lo < 1.0) {
        ++n_first;
        Interval Ec{E.lo, std::min(E.hi, 1.0), E.est};
        t.check({chip, chi, Ec},
                [&](const std::vector<double>& v) {
                  double rhs = v[2] >= 1.0 ? kInf : (1.0 - v[0] / v[1]) / (1.0 - v[2]);
                  return rel_residual(db * v[0], rhs);
                },
                where);
      }
      const Interval b_ratio = ratio(chip, chi);
      if (E.hi <= b_ratio.lo / 4.0) {
        ++n_second;
        t.check({chip, chi}, [&](const std::vector<double>& v) { return rel_residual(db * v[0], 1.0 - 0.5 * v[0] / v[1]); },
                where);
      }
      if (E.hi <= std::min(xr.lo / 8.0, 0.5)) {
        ++n_third;
        t.check({chip, xr}, [&](const std::vector<double>& v) { return rel_residual(1.0 - 2.0 * v[1], db * v[0]); }, where);
        t.check({chip, xr}, [&](const std::vector<double>& v) { return rel_residual(db * v[0], 1.0 - 0.25 * v[1]); }, where);
      }
      if (bp == 0.0) {
        ++n_zero;
        t.check({chip}, [&](const std::vector<double>& v) { return -std::abs(db * v[0] - b) / std::max(1.0, b); }, where);
      }
    }
  }
  t.finish();
  r.details["pairs_first"] = n_first;
  r.details["pairs_chi_hypothesis"] = n_second;
  r.details["pairs_xi_hypothesis"] = n_third;
  r.details["pairs_from_zero"] = n_zero;
  r.certified = all_certified(rows);
  r.finalize();
  return r;
}

namespace {

struct SlCase {
  LatticeField lhs;        // G_beta or F_beta on Λ_L
  LatticeField start;      // G_beta' or F_beta'
  LatticeField end;        // G_beta or F_beta (finite form)
  double start_err = 0.0;  // sup-norm bound on missing values
  double end_err = 0.0;
  double lhs_err = 0.0;
};

// Pointwise sum_{k<T} Z^k P^{*k} * start + Z^T P^{*T} * end on Λ_L, with a
// sup-norm bound on what the truncations lost.
void iterate_walk(const SlCase& c, const LatticeField& P, double Z, int T, bool infinite, int L, int work_radius,
                  int period, LatticeField& rhs, double& slack) {
  const double supP = sup_abs(P);
  ConvOptions opt;
  opt.max_radius = work_radius;
  rhs = LatticeField(c.lhs.d, L);
  slack = 0.0;
  LatticeField A = values_only(c.start);
  double missing = 0.0;          // l1 mass lost by truncation, propagated
  double lost_sup = c.start_err;  // sup-norm error of the current A
  double Zk = 1.0;
  const double supStart = sup_abs(c.start);
  int K = T;
  if (infinite) {
    K = 1;
    double z = Z;
    while (K < 100000 && z * supStart / (1.0 - Z) > 1e-15) {
      z *= Z;
      ++K;
    }
  }
  for (int k = 0; k < K; ++k) {
    if (k > 0) {
      LatticeField next = torus_fold(convolve(P, A, opt), period);
      missing += next.tail_bound;
      next = values_only(next.L > work_radius ? next.restricted(work_radius) : next);
      A = std::move(next);
      lost_sup = supP * missing + c.start_err;
    }
    rhs.for_each([&](std::size_t idx, const int* x) {
      Point p(x, x + rhs.d);
      if (A.in_box(p)) rhs.values[idx] += Zk * A.values[A.index_of(p)];
    });
    slack += Zk * lost_sup;
    Zk *= Z;
  }
  if (infinite) {
    slack += Zk * supStart / (1.0 - Z);
    return;
  }
  // Z^T P^{*T} * end
  LatticeField B = values_only(c.end);
  double miss_b = 0.0;
  for (int k = 0; k < T; ++k) {
    LatticeField next = torus_fold(convolve(P, B, opt), period);
    miss_b += next.tail_bound;
    B = values_only(next.L > work_radius ? next.restricted(work_radius) : next);
  }
  rhs.for_each([&](std::size_t idx, const int* x) {
    Point p(x, x + rhs.d);
    if (B.in_box(p)) rhs.values[idx] += Zk * B.values[B.index_of(p)];
  });
  slack += Zk * (supP * miss_b + c.end_err);
}

}  // namespace

InequalityReport check_iterated_SL(const ModelSource& src, double beta_low, double beta_high, int T) {
  const bool infinite = T <= 0;
  InequalityReport r = make_report(
      "iterated_SL",
      infinite ? "G_beta(x) <= sum_k Z^k E_beta'[G_beta'(x - X_k)] (infinite iteration, Z < 1)"
               : "G_beta(x) <= sum_{k<T} Z^k E_beta'[G_beta'(x - X_k)] + Z^T E_beta'[G_beta(x - X_T)]",
      kVerifyRelTol);
  if (beta_low > beta_high) throw std::invalid_argument("iterated SL: need beta' <= beta");
  const AdmissibleKernel& J = src.kernel;
  ModelPoint pl = src.at(beta_low), ph = src.at(beta_high);
  auto err_of = [](const ModelPoint& p) {
    if (p.tail == "exact") return 0.0;
    if (p.tail == "green") return p.G.tail_bound;
    if (p.tail == "dominated" && p.C_trunc.values.size()) {
      double chi_rw = 1.0 / (1.0 - p.beta);
      return std::max(0.0, chi_rw - p.C_trunc.sum());
    }
    return 0.0;
  };
  const double el = err_of(pl), eh = err_of(ph);
  LatticeField Gl = values_only(pl.G), Gh = values_only(ph.G);
  const int L = std::max(Gl.L, Gh.L);
  Gl = Gl.embedded(L);
  Gh = Gh.embedded(L);
  // On a torus every convolution is folded back onto the torus.
  LatticeField Fl = values_only(torus_fold(kernel_apply(J, Gl, L + J.R), src.period));
  LatticeField Fh = values_only(torus_fold(kernel_apply(J, Gh, L + J.R), src.period));
  const double chi_l = Fl.sum() + (pl.tail == "green" ? pl.G.tail_bound : 0.0);
  const double Z = (beta_high - beta_low) * chi_l;
  if (infinite && !(Z < 1.0))
    throw std::invalid_argument("iterated SL: the infinite form needs Z < 1, got Z = " + fmt(Z));
  LatticeField P = scaled(Fl, 1.0 / chi_l);

  // Working radius: the full reach of T steps when it fits the site budget.
  const int reach = infinite ? L + P.L : L + T * P.L;
  int work = reach;
  const double budget = std::min(static_cast<double>(max_sites()), 2.0e6);
  while (work > L + J.R && std::pow(2.0 * work + 1.0, J.d) > budget) --work;

  r.grid = src.label + "; beta'=" + fmt(beta_low) + " beta=" + fmt(beta_high) + (infinite ? " T=inf" : " T=" + std::to_string(T)) +
           "; box radius " + std::to_string(L);
  double worst_slack = 0.0;
  for (int which = 0; which < 2; ++which) {
    SlCase c;
    if (which == 0) {
      c.lhs = Gh;
      c.start = Gl;
      c.end = Gh;
      c.start_err = el;
      c.end_err = eh;
      c.lhs_err = 0.0;
    } else {
      c.lhs = values_only(Fh.L > L ? Fh.restricted(L) : Fh);
      c.start = Fl;
      c.end = Fh;
      c.start_err = el;
      c.end_err = eh;
    }
    LatticeField rhs;
    double slack = 0.0;
    iterate_walk(c, P, Z, T, infinite, L, work, src.period, rhs, slack);
    worst_slack = std::max(worst_slack, slack);
    const std::string tag = which == 0 ? "G" : "F";
    c.lhs.for_each([&](std::size_t idx, const int* x) {
      Point p(x, x + c.lhs.d);
      if (!rhs.in_box(p)) return;
      double lhs = c.lhs.values[idx];
      double rv = rhs.values[rhs.index_of(p)] + slack;
      r.record_with((rv - lhs) / std::max(1.0, std::abs(lhs)), [&] {
        std::string s = tag + " x=(";
        for (int a = 0; a < c.lhs.d; ++a) s += (a ? "," : "") + std::to_string(x[a]);
        return s + ")";
      });
    });
  }
  r.details["Z"] = Z;
  r.details["T"] = infinite ? nlohmann::json("inf") : nlohmann::json(T);
  r.details["truncation_slack"] = worst_slack;
  r.details["work_radius"] = work;
  r.certified = pl.tail != "none" && ph.tail != "none";
  r.finalize();
  return r;
}

nlohmann::json BoundConstants::to_json() const {
  return {{"c_fit", c_fit},          {"C_fit", C_fit},     {"epsilon", epsilon},
          {"scope", scope},          {"c_grid", c_grid},   {"C_grid", C_grid},
          {"betas", betas},          {"profile", profile}, {"max_profile_jump", max_profile_jump},
          {"profile_radius", profile_radius}};
}

BoundConstants fit_main_bound(const ModelSource& src, const std::vector<double>& betas, double epsilon,
                              const std::vector<double>& c_grid_in) {
  const AdmissibleKernel& J = src.kernel;
  const int d = J.d;
  const double sigma = J.sigma;
  BoundConstants b;
  b.epsilon = epsilon;
  b.c_grid = c_grid_in.empty() ? std::vector<double>{0.0, 0.05, 0.1, 0.2, 0.4, 0.8, 1.6} : c_grid_in;
  b.betas = betas;
  const std::size_t nc = b.c_grid.size();
  std::vector<std::vector<double>> prof(betas.size(), std::vector<double>(nc, 0.0));
  std::vector<int> radius(betas.size(), 0);
  parallel_for(betas.size(), [&](std::size_t i) {
    LatticeField G = values_only(src.at(betas[i]).G);
    LatticeField F = values_only(kernel_apply(J, G, G.L + J.R));
    radius[i] = F.L;
    const double chi = F.sum();
    double m2 = 0.0;
    F.for_each([&](std::size_t idx, const int* x) {
      double r2 = 0.0;
      for (int a = 0; a < d; ++a) r2 += double(x[a]) * x[a];
      m2 += r2 * F.values[idx];
    });
    const double xi = std::sqrt(m2 / chi);
    F.for_each([&](std::size_t idx, const int* x) {
      double v = F.values[idx];
      if (v <= 0.0) return;
      int n = 0;
      for (int a = 0; a < d; ++a) n = std::max(n, std::abs(x[a]));
      double base = v * std::pow(sigma, d) * std::pow(std::max(sigma, double(n)) / sigma, d - 2 - epsilon);
      for (std::size_t c = 0; c < nc; ++c) prof[i][c] = std::max(prof[i][c], base * std::exp(b.c_grid[c] * n / xi));
    });
  });
  b.C_grid.assign(nc, 0.0);
  for (std::size_t i = 0; i < betas.size(); ++i)
    for (std::size_t c = 0; c < nc; ++c) b.C_grid[c] = std::max(b.C_grid[c], prof[i][c]);
  FittedConstants sel = select_constants(b.c_grid, b.C_grid, 2.0);
  b.c_fit = sel.c;
  b.C_fit = sel.C;
  std::size_t ci = std::find(b.c_grid.begin(), b.c_grid.end(), sel.c) - b.c_grid.begin();
  for (std::size_t i = 0; i < betas.size(); ++i) b.profile.push_back(prof[i][ci]);
  for (std::size_t i = 1; i < b.profile.size(); ++i) {
    double x = b.profile[i - 1], y = b.profile[i];
    if (x > 0 && y > 0) b.max_profile_jump = std::max(b.max_profile_jump, std::max(x / y, y / x));
  }
  b.profile_radius = radius.empty() ? 0 : *std::min_element(radius.begin(), radius.end());
  b.scope = src.label + "; beta in [" + (betas.empty() ? std::string("-") : fmt(betas.front()) + ", " + fmt(betas.back())) +
            "]; x over the stored boxes (radius >= " + std::to_string(b.profile_radius) + ")";
  return b;
}

InequalityReport main_bound_report(const BoundConstants& b, double max_jump) {
  InequalityReport r = make_report("main_bound_profile",
                                   "profile f(beta) = sup_x F_beta(x) sigma^d ((sigma v |x|)/sigma)^{d-2-eps} exp(c|x|/xi) is finite and continuous on the grid",
                                   0.0);
  r.grid = b.scope + "; eps=" + fmt(b.epsilon);
  r.record(std::isfinite(b.C_fit) ? 1.0 : -kInf, "C_fit");
  r.record(max_jump - b.max_profile_jump, "largest jump between neighbouring grid points");
  r.details = b.to_json();
  r.details["max_jump_allowed"] = max_jump;
  r.finalize();
  return r;
}

FittedConstants fit_green_constants(const AdmissibleKernel& J, const std::vector<double>& betas) {
  const std::vector<double> c_grid{0.0, 0.05, 0.1, 0.2, 0.4, 0.8, 1.6};
  const int d = J.d;
  const double sigma = J.sigma;
  std::vector<std::vector<double>> sup(betas.size(), std::vector<double>(c_grid.size(), 0.0));
  parallel_for(betas.size(), [&](std::size_t i) {
    const double beta = betas[i];
    if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("green constants: beta must lie in [0, 1)");
    GreenField gf = green_function(J, beta, order_for_tail(beta, 1e-10), green_radius_for(J, beta, 1e-10));
    const double s = std::sqrt(1.0 - beta);
    gf.field.for_each([&](std::size_t idx, const int* x) {
      int n = 0;
      for (int a = 0; a < d; ++a) n = std::max(n, std::abs(x[a]));
      double v = gf.field.values[idx] - (n == 0 ? 1.0 : 0.0);
      if (v <= 0.0) return;
      double base = v * std::pow(sigma, d) * std::pow(std::max(sigma, double(n)) / sigma, d - 2);
      for (std::size_t c = 0; c < c_grid.size(); ++c) sup[i][c] = std::max(sup[i][c], base * std::exp(c_grid[c] * s * n / sigma));
    });
  });
  std::vector<double> C(c_grid.size(), 0.0);
  for (auto& row : sup)
    for (std::size_t c = 0; c < c_grid.size(); ++c) C[c] = std::max(C[c], row[c]);
  return select_constants(c_grid, C, 2.0);
}

InequalityReport check_initialisation(const ModelSource& src, const std::vector<Observables>& rows,
                                      const FittedConstants& green, double delta) {
  InequalityReport r = make_report(
      "initialisation",
      "G_beta(x) <= delta_0(x) + 2C/sigma^d (sigma/(sigma v |x|))^{d-2} exp(-(c/2)|x|/xi(beta)) for beta <= (1-delta) ^ beta(delta)",
      kVerifyRelTol);
  if (!(delta > 0.0 && delta <= 0.5)) throw std::invalid_argument("initialisation: delta must lie in (0, 1/2]");
  const AdmissibleKernel& J = src.kernel;
  const int d = J.d;
  const double sigma = J.sigma;
  BetaOfDelta bd = beta_of_delta(rows, delta);
  const double beta_top = std::min(1.0 - delta, bd.beta);
  r.grid = src.label + "; delta=" + fmt(delta) + "; beta <= " + fmt(beta_top) + "; c=" + fmt(green.c) + " C=" + fmt(green.C);
  for (const auto& o : rows) {
    if (o.beta > beta_top) continue;
    LatticeField G = values_only(src.at(o.beta).G);
    double xi2 = std::isfinite(o.xi_sq.hi) ? o.xi_sq.hi : o.xi_sq.est;
    double xi = std::sqrt(xi2);
    G.for_each([&](std::size_t idx, const int* x) {
      int n = 0;
      for (int a = 0; a < d; ++a) n = std::max(n, std::abs(x[a]));
      double lhs = G.values[idx] - (n == 0 ? 1.0 : 0.0);
      double rhs = 2.0 * green.C / std::pow(sigma, d) * std::pow(sigma / std::max(sigma, double(n)), d - 2) *
                   std::exp(-0.5 * green.c * n / xi);
      r.record_with(rel_residual(lhs, rhs), [&] {
        std::string s = "beta=" + fmt(o.beta) + " x=(";
        for (int a = 0; a < d; ++a) s += (a ? "," : "") + std::to_string(x[a]);
        return s + ")";
      });
    });
  }
  r.details["beta_of_delta"] = bd.to_json();
  r.details["green_constants"] = green.to_json();
  if (r.checked == 0) r.vacuous = true;
  r.finalize();
  return r;
}

InequalityReport check_stability(const ModelSource& src, const std::vector<double>& betas, double C_max) {
  InequalityReport r = make_report("stability", "chi_{xi(beta')}(beta) <= C_stab chi(beta') for beta' <= beta", kVerifyRelTol);
  const AdmissibleKernel& J = src.kernel;
  const int d = J.d;
  struct Row {
    LatticeField F;
    double chi = 0.0, xi = 0.0;
  };
  std::vector<Row> rows(betas.size());
  parallel_for(betas.size(), [&](std::size_t i) {
    LatticeField G = values_only(src.at(betas[i]).G);
    rows[i].F = values_only(kernel_apply(J, G, G.L + J.R));
    rows[i].chi = rows[i].F.sum();
    double m2 = rows[i].F.moment2();
    rows[i].xi = std::sqrt(m2 / rows[i].chi);
  });
  auto box_sum = [&](const LatticeField& F, int k) {
    double s = 0.0;
    F.for_each([&](std::size_t idx, const int* x) {
      for (int a = 0; a < d; ++a)
        if (std::abs(x[a]) > k) return;
      s += F.values[idx];
    });
    return s;
  };
  double C_hat = 0.0;
  std::string where_hat;
  std::size_t outside = 0;
  for (std::size_t j = 0; j < rows.size(); ++j) {
    for (std::size_t i = 0; i <= j; ++i) {
      if (betas[i] > betas[j]) continue;
      int k = static_cast<int>(std::ceil(rows[i].xi));
      if (k > rows[j].F.L) {
        ++outside;
        continue;
      }
      double chik = box_sum(rows[j].F, k);
      double q = chik / rows[i].chi;
      if (q > C_hat) {
        C_hat = q;
        where_hat = pair_loc(betas[i], betas[j]) + " k=" + std::to_string(k);
      }
      r.record_with(rel_residual(chik, rows[j].chi), [&] { return pair_loc(betas[i], betas[j]); });
      if (std::isfinite(C_max)) r.record_with(rel_residual(q, C_max), [&] { return pair_loc(betas[i], betas[j]); });
    }
  }
  r.grid = src.label + "; " + std::to_string(betas.size()) + " beta values";
  r.details["C_stab_fit"] = C_hat;
  r.details["C_stab_location"] = where_hat;
  r.details["pairs_outside_box"] = outside;
  if (std::isfinite(C_max)) r.details["C_max"] = C_max;
  if (r.checked == 0) r.vacuous = true;
  r.finalize();
  return r;
}

double conv_constant(double a, double mu, int d, double eps) {
  if (mu >= 1.0) mu = 0.5;
  double s = 0.0;
  for (int k = 0; k < 200; ++k) {
    double t = std::exp(-a * std::ldexp(mu, k) + k * (2.0 + eps) * std::log(2.0));
    s += t;
    if (a * std::ldexp(mu, k) > 60.0 + k * 3.0) break;
  }
  return std::pow(2.0 / mu, d - 2) * s;
}

namespace {

// Random lattice point with |x|_inf = n.
Point random_point_at(CounterRng& rng, int d, int n) {
  Point x(d);
  for (int a = 0; a < d; ++a) x[a] = static_cast<int>(rng.below(2 * n + 1)) - n;
  int axis = static_cast<int>(rng.below(d));
  x[axis] = rng.bernoulli(0.5) ? n : -n;
  return x;
}

double field_at(const LatticeField& f, const Point& x) { return f.in_box(x) ? f.values[f.index_of(x)] : 0.0; }

}  // namespace

InequalityReport check_convolution_lemma_fg(const ConvolutionLemmaConfig& cfg) {
  InequalityReport r = make_report(
      "convolution_lemma_fg",
      "sum_{y outside the mu xi box} f(y) g(x-y) bounded by the two-term envelope for |x| >= 2(sigma v xi)", kVerifyRelTol);
  const int d = cfg.d;
  r.grid = "d=" + std::to_string(d) + ", " + std::to_string(cfg.draws) + " draws, seed " + std::to_string(cfg.seed);
  double worst_outer = kInf, worst_annulus = kInf;
  std::vector<nlohmann::json> draws(cfg.draws);
  std::vector<InequalityReport> parts(cfg.draws, make_report("", "", kVerifyRelTol));
  std::vector<double> w_outer(cfg.draws, kInf), w_ann(cfg.draws, kInf);
  parallel_for(cfg.draws, [&](std::size_t t) {
    CounterRng rng(cfg.seed, 1000 + t);
    auto U = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
    const double a = U(0.2, 3.0), b = U(0.2, 3.0), c1 = U(0.5, 5.0), c2 = U(0.5, 5.0);
    const double sigma = U(1.0, 4.0), xi = U(1.0, 5.0);
    const double mu = t % 5 == 4 ? U(1.0, 2.0) : U(0.05, 1.0);
    const double eps = t % 7 == 0 ? 0.0 : U(0.0, 1.0);
    const int xmin = static_cast<int>(std::ceil(2.0 * std::max(sigma, xi)));
    const int M = xmin + 14;
    const int rxi = static_cast<int>(std::floor(xi));
    LatticeField f(d, M), g(d, M);
    const double boxvol = std::pow(2.0 * rxi + 1.0, d);
    f.for_each([&](std::size_t idx, const int* x) {
      int n = 0;
      for (int k = 0; k < d; ++k) n = std::max(n, std::abs(x[k]));
      double fe = c1 / std::pow(sigma, d) * std::pow(sigma / std::max(sigma, double(n)), d - 2 - eps) * std::exp(-a * n / xi);
      double m = n + rxi;
      double ge = c2 * std::pow(xi / std::max(xi, m), d - 2) * std::exp(-b * m / xi) / boxvol;
      f.values[idx] = fe * rng.uniform();
      g.values[idx] = ge * rng.uniform();
    });
    // Hypothesis on g, box sums everywhere they can be nonzero.
    LatticeField gs = box_sums(g.embedded(M + rxi), rxi);
    gs.for_each([&](std::size_t idx, const int* x) {
      int n = 0;
      for (int k = 0; k < d; ++k) n = std::max(n, std::abs(x[k]));
      double env = c2 * std::pow(xi / std::max(xi, double(n)), d - 2) * std::exp(-b * n / xi);
      if (gs.values[idx] > env * (1.0 + 1e-12)) throw std::logic_error("convolution lemma: generated g violates its hypothesis");
    });
    const double g1 = g.sum();
    const double C = conv_constant(a, mu, d, eps);
    const int rmu = static_cast<int>(std::floor(mu * xi));
    for (int p = 0; p < cfg.points_per_draw; ++p) {
      int n = xmin + static_cast<int>(rng.below(M - xmin + 1));
      Point x = random_point_at(rng, d, n);
      const int half = n / 2;  // Λ_{|x|/2}
      double total = 0.0, outer = 0.0, ann = 0.0;
      f.for_each([&](std::size_t idx, const int* y) {
        int ny = 0;
        Point z(d);
        for (int k = 0; k < d; ++k) {
          ny = std::max(ny, std::abs(y[k]));
          z[k] = x[k] - y[k];
        }
        if (ny <= rmu) return;
        double v = f.values[idx] * field_at(g, z);
        total += v;
        if (ny > half) outer += v;
        else ann += v;
      });
      const double pre = c1 / (sigma * sigma * std::pow(double(n), d - 2)) * std::pow(n / sigma, eps);
      const double t1 = pre * std::pow(2.0, d) * g1 * std::exp(-a * n / (2.0 * xi));
      const double t2 = pre * c2 * C * std::pow(xi / n, eps) * std::exp(-b * n / (2.0 * xi));
      std::string loc = "draw " + std::to_string(t) + " x=(";
      for (int k = 0; k < d; ++k) loc += (k ? "," : "") + std::to_string(x[k]);
      loc += ")";
      parts[t].record((t1 + t2 - total) / std::max(t1 + t2, 1e-300), loc);
      w_outer[t] = std::min(w_outer[t], (t1 - outer) / std::max(t1, 1e-300));
      w_ann[t] = std::min(w_ann[t], (t2 - ann) / std::max(t2, 1e-300));
    }
    draws[t] = {{"a", a}, {"b", b}, {"c1", c1}, {"c2", c2}, {"sigma", sigma}, {"xi", xi}, {"mu", mu}, {"eps", eps},
                {"C_a_mu", C}, {"box", M}};
  });
  for (int t = 0; t < cfg.draws; ++t) {
    r.checked += parts[t].checked > 0 ? parts[t].checked - 1 : 0;
    r.record(parts[t].worst_residual, parts[t].worst_location);
    worst_outer = std::min(worst_outer, w_outer[t]);
    worst_annulus = std::min(worst_annulus, w_ann[t]);
  }
  r.details["relative"] = true;
  r.details["worst_outer_part"] = worst_outer;
  r.details["worst_annulus_part"] = worst_annulus;
  r.details["draws"] = draws;
  r.finalize();
  return r;
}

InequalityReport check_convolution_lemma_ff(const ConvolutionLemmaConfig& cfg) {
  InequalityReport r = make_report(
      "convolution_lemma_ff",
      "(f1*f2)(x) <= a/(1 v |x|)^p (||f1||_1/k^p + 2^p sum_{Λ_{k|x|}} (f1+f2)), with its three-part split", kVerifyRelTol);
  const int d = cfg.d;
  r.grid = "d=" + std::to_string(d) + ", " + std::to_string(cfg.draws) + " draws, |x| >= 1, seed " + std::to_string(cfg.seed);
  std::vector<InequalityReport> parts(cfg.draws, make_report("", "", kVerifyRelTol));
  std::vector<nlohmann::json> draws(cfg.draws);
  parallel_for(cfg.draws, [&](std::size_t t) {
    CounterRng rng(cfg.seed, 5000 + t);
    auto U = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
    const double p = U(0.5, 4.0), a = U(0.5, 3.0);
    const double k = t % 5 == 0 ? 1.0 : U(1.0, 4.0);
    const int M = 16;
    LatticeField f1(d, M), f2(d, M);
    f1.for_each([&](std::size_t idx, const int* x) {
      int n = 0;
      for (int q = 0; q < d; ++q) n = std::max(n, std::abs(x[q]));
      double env = a * std::pow(std::max(1.0, double(n)), -p);
      f1.values[idx] = env * rng.uniform();
      f2.values[idx] = env * rng.uniform();
    });
    const double n1 = f1.sum();
    for (int pt = 0; pt < cfg.points_per_draw; ++pt) {
      int n = 1 + static_cast<int>(rng.below(M));
      Point x = random_point_at(rng, d, n);
      const int rk = static_cast<int>(std::floor(k * n));
      const int rh = n / 2;
      double total = 0.0, p1 = 0.0, p2 = 0.0, p3 = 0.0, s1 = 0.0, s2 = 0.0;
      f2.for_each([&](std::size_t idx, const int* y) {
        int ny = 0, nxy = 0;
        Point z(d);
        for (int q = 0; q < d; ++q) {
          ny = std::max(ny, std::abs(y[q]));
          z[q] = x[q] - y[q];
          nxy = std::max(nxy, std::abs(z[q]));
        }
        double v = field_at(f1, z) * f2.values[idx];
        total += v;
        if (nxy <= rh) p1 += v;
        if (ny <= rk && nxy > rh) p2 += v;
        if (ny > rk) p3 += v;
        if (ny <= rk) {
          s1 += f1.values[idx];
          s2 += f2.values[idx];
        }
      });
      const double pre = a / std::pow(double(n), p);
      const double b1 = std::pow(2.0, p) * pre * s1, b2 = std::pow(2.0, p) * pre * s2, b3 = pre * n1 / std::pow(k, p);
      std::string loc = "draw " + std::to_string(t) + " x=(";
      for (int q = 0; q < d; ++q) loc += (q ? "," : "") + std::to_string(x[q]);
      loc += ")";
      auto rel = [](double bound, double val) { return (bound - val) / std::max(bound, 1e-300); };
      parts[t].record(rel(b1 + b2 + b3, total), loc + " total");
      parts[t].record(rel(b1, p1), loc + " part 1");
      parts[t].record(rel(b2, p2), loc + " part 2");
      parts[t].record(rel(b3, p3), loc + " part 3");
    }
    draws[t] = {{"p", p}, {"a", a}, {"k", k}, {"box", M}};
  });
  for (int t = 0; t < cfg.draws; ++t) {
    r.checked += parts[t].checked > 0 ? parts[t].checked - 1 : 0;
    r.record(parts[t].worst_residual, parts[t].worst_location);
  }
  r.details["relative"] = true;
  r.details["draws"] = draws;
  r.finalize();
  return r;
}

InequalityReport gamma_nu_check(const ModelSource& src, const std::vector<Observables>& rows, double tol) {
  InequalityReport r = make_report("gamma_nu", "chi and xi sandwiches at beta(delta) = grid end; mean-field exponents for the Green model",
                                   tol);
  r.grid = grid_desc(rows);
  if (rows.empty()) {
    r.vacuous = true;
    r.finalize();
    return r;
  }
  const Observables& top = rows.back();
  if (!(top.E.est < 1.0)) {
    r.vacuous = true;
    r.details["reason"] = "E(grid max) >= 1";
    r.finalize();
    return r;
  }
  Tracker t{r, kInf, {}, 0};
  const double bd = top.beta;
  const double s2 = src.kernel.sigma_sq;
  Interval E{top.E.lo, std::min(top.E.hi, std::nextafter(1.0, 0.0)), top.E.est};
  for (const auto& o : rows) {
    auto where = [&] { return "beta=" + fmt(o.beta); };
    const double db = bd - o.beta;
    // v = {chi(bd), chi(beta), E}
    t.check({top.chi, o.chi}, [&](const std::vector<double>& v) { return rel_residual(1.0 / (1.0 / v[0] + db), v[1]); }, where);
    t.check({top.chi, o.chi, E},
            [&](const std::vector<double>& v) { return rel_residual(v[1], 1.0 / (1.0 / v[0] + db * (1.0 - v[2]))); }, where);
    Interval x2{o.xi_sq.lo / s2, o.xi_sq.hi / s2, o.xi_sq.est / s2};
    t.check({o.chi, x2, E}, [](const std::vector<double>& v) { return rel_residual(std::pow(v[0], 1.0 - 2.0 * v[2]), v[1]); },
            where);
    t.check({o.chi, x2, E},
            [](const std::vector<double>& v) { return rel_residual(v[1], std::pow(v[0], (1.0 + v[2]) / (1.0 - v[2]))); }, where);
    if (src.kind == ModelKind::Green) {
      r.record_with(-std::abs(o.chi.est * (1.0 - o.beta) - 1.0), [&] { return "chi(1-beta) at beta=" + fmt(o.beta); });
      r.record_with(-std::abs(o.xi_sq.est * (1.0 - o.beta) / s2 - 1.0),
                    [&] { return "xi^2(1-beta)/sigma^2 at beta=" + fmt(o.beta); });
    }
  }
  if (src.kind == ModelKind::Green) {
    // beta_c = 1: 1 <= beta_c <= 1/(1-E)
    r.record(1.0 / (1.0 - top.E.hi) - 1.0, "beta_c <= 1/(1-E)");
  }
  t.finish();
  r.details["beta_delta"] = bd;
  r.details["E"] = {{"lo", top.E.lo}, {"hi", std::isfinite(top.E.hi) ? nlohmann::json(top.E.hi) : nlohmann::json("inf")}};
  r.certified = all_certified(rows);
  r.finalize();
  return r;
}

}  // namespace mflab

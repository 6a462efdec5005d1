#include "mflab/observables.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mflab/green.hpp"
#include "mflab/parallel.hpp"

namespace mflab {

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

// Values only; tails are tracked separately here.
LatticeField values_only(LatticeField f) {
  f.tail_bound = 0.0;
  f.tail_m2 = 0.0;
  f.tail_exact = true;
  return f;
}

// sum_y f(y) g(-y) = (f * g)(0)
double origin_pair(const LatticeField& f, const LatticeField& g) {
  double s = 0.0;
  std::vector<int> y(f.d), my(f.d);
  f.for_each([&](std::size_t i, const int* x) {
    double v = f.values[i];
    if (v == 0.0) return;
    bool inside = true;
    for (int a = 0; a < f.d; ++a) {
      my[a] = -x[a];
      if (my[a] < -g.L || my[a] > g.L) inside = false;
    }
    if (inside) s += v * g.values[g.index_of(my)];
  });
  return s;
}

LatticeField conv_window(const LatticeField& f, const LatticeField& g, int radius) {
  ConvOptions opt;
  opt.max_radius = std::max(1, radius);
  LatticeField h = convolve(f, g, opt);
  if (h.L > radius) h = h.restricted(radius);
  return values_only(std::move(h));
}

double fft_cost_sites(int d, int need) { return std::pow(static_cast<double>(need), d); }

struct Diagrams {
  double bubble = kNaN, triangle = kNaN, square = kNaN;
};

Diagrams field_diagrams(const LatticeField& G, const LatticeField& F) {
  Diagrams r;
  r.bubble = origin_pair(G, F);
  const int L = G.L, d = G.d;
  const double budget = std::min(4.0 * static_cast<double>(max_sites()), 1.0e7);
  if (fft_cost_sites(d, 2 * L + F.L + 2) <= budget) {
    LatticeField W = conv_window(G, F, L);
    r.triangle = origin_pair(W, G);
  }
  if (fft_cost_sites(d, 4 * L + F.L + 2) <= budget) {
    LatticeField Q = conv_window(G, G, 2 * L);
    LatticeField W2 = conv_window(F, G, 2 * L);
    r.square = origin_pair(Q, W2);
  }
  return r;
}

Interval with_tail(double v, const std::string& tail, double extra) {
  if (std::isnan(v)) return {kNaN, kNaN, kNaN};
  if (tail == "exact") return Interval::point(v);
  if (tail == "dominated" && std::isfinite(extra)) return {v, v + std::max(0.0, extra), v};
  return Interval::lower_bound(v);
}

double m2F_of(const AdmissibleKernel& J, const LatticeField& G) { return G.moment2() + J.sigma_sq * G.sum(); }

LatticeField delta_field(int d) { return LatticeField::delta(d, 1.0); }

}  // namespace

LatticeField torus_fold(const LatticeField& f, int period) {
  if (period <= 0) return f;
  const int d = f.d, h = period / 2;
  const bool even = period % 2 == 0;
  std::vector<double> cls(static_cast<std::size_t>(std::pow(period, d)), 0.0);
  auto residue = [&](const int* x) {
    std::size_t idx = 0;
    for (int a = 0; a < d; ++a) idx = idx * period + static_cast<std::size_t>(((x[a] % period) + period) % period);
    return idx;
  };
  f.for_each([&](std::size_t i, const int* x) { cls[residue(x)] += f.values[i]; });
  LatticeField out(d, h);
  out.tail_bound = f.tail_bound;
  out.tail_exact = f.tail_exact;
  out.for_each([&](std::size_t i, const int* x) {
    int ties = 0;
    for (int a = 0; a < d; ++a)
      if (even && std::abs(x[a]) == h) ++ties;
    out.values[i] = cls[residue(x)] / static_cast<double>(1 << ties);
  });
  return out;
}

std::string model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::Green: return "green";
    case ModelKind::Saw: return "saw";
    case ModelKind::Percolation: return "perc";
    case ModelKind::Ising: return "ising";
    case ModelKind::LatticeTrees: return "lt";
  }
  return "?";
}

ModelSource green_source(const AdmissibleKernel& J, double tail_eps) {
  ModelSource s;
  s.kind = ModelKind::Green;
  s.label = "green " + J.name();
  s.kernel = J;
  s.beta_max = 0.99;
  s.at = [J, tail_eps](double beta) {
    if (!(beta >= 0.0 && beta < 1.0)) throw std::domain_error("green model: beta must lie in [0, 1)");
    ModelPoint p;
    p.beta = beta;
    int order = order_for_tail(beta, tail_eps);
    int radius = green_radius_for(J, beta, tail_eps);
    p.G = green_function(J, beta, order, radius).field;
    p.tail = "green";
    return p;
  };
  return s;
}

ModelSource saw_source(std::shared_ptr<const SawSeries> ser) {
  ModelSource s;
  s.kind = ModelKind::Saw;
  s.label = "saw " + ser->kernel.name() + " lambda=" + to_string(ser->lambda) + " N=" + std::to_string(ser->N);
  s.kernel = ser->kernel;
  s.lambda = ser->lambda_value();
  s.beta_max = 0.99;
  s.at = [ser](double beta) {
    ModelPoint p;
    p.beta = beta;
    p.G = values_only(saw_eval(*ser, beta));
    if (beta >= 0.0 && beta < 1.0) {
      p.tail = "dominated";
      GreenLadder lad = green_ladder(ser->kernel, {beta}, ser->N, ser->L, false);
      p.C_trunc = values_only(lad.G[0]);
    } else {
      p.tail = "none";
    }
    return p;
  };
  return s;
}

ModelSource perc_source(std::shared_ptr<const ExactPerc> ex, const AdmissibleKernel& J) {
  const PercGraph& g = ex->graph;
  if (static_cast<int>(g.coords.size()) != g.n) throw std::invalid_argument("perc_source: graph has no coordinates");
  ModelSource s;
  s.kind = ModelKind::Percolation;
  s.label = "perc " + g.name;
  s.kernel = J;
  s.beta_max = g.max_beta();
  s.period = g.torus ? g.L : 0;
  s.at = [ex](double beta) {
    const PercGraph& gr = ex->graph;
    // Displacements from vertex 0; on a torus the minimal image, with a
    // displacement of exactly L/2 split evenly between +L/2 and -L/2.
    std::vector<std::vector<Point>> images(gr.n);
    int L = 0;
    for (int v = 0; v < gr.n; ++v) {
      std::vector<Point> pts{Point(gr.coords[v].size(), 0)};
      for (std::size_t a = 0; a < gr.coords[v].size(); ++a) {
        int dx = gr.coords[v][a] - gr.coords[0][a];
        if (gr.torus) {
          dx = ((dx % gr.L) + gr.L) % gr.L;
          if (2 * dx > gr.L) dx -= gr.L;
        }
        std::vector<Point> next;
        for (auto p : pts) {
          p[a] = dx;
          next.push_back(p);
          if (gr.torus && gr.L % 2 == 0 && 2 * dx == gr.L) {
            p[a] = -dx;
            next.push_back(p);
          }
        }
        pts = std::move(next);
      }
      for (const auto& p : pts) L = std::max(L, norm_inf(p));
      images[v] = std::move(pts);
    }
    ModelPoint p;
    p.beta = beta;
    p.G = LatticeField(static_cast<int>(gr.coords[0].size()), L);
    for (int v = 0; v < gr.n; ++v) {
      double val = ex->at(0, v).eval(beta) / static_cast<double>(images[v].size());
      for (const auto& x : images[v]) p.G.values[p.G.index_of(x)] += val;
    }
    p.G.symmetric = gr.torus;
    p.tail = "exact";
    return p;
  };
  return s;
}

ModelSource ising_source(std::shared_ptr<const IsingExact> ex) {
  ModelSource s;
  s.kind = ModelKind::Ising;
  s.label = "ising " + ex->volume.name;
  s.kernel = ex->volume.kernel;
  s.beta_max = 1.0;
  s.period = ex->volume.period;
  s.at = [ex](double beta) {
    const IsingVolume& v = ex->volume;
    int L = 0;
    for (const auto& x : v.sites) L = std::max(L, norm_inf(x));
    ModelPoint p;
    p.beta = beta;
    p.G = LatticeField(v.kernel.d, L);
    for (int i = 0; i < v.size(); ++i) p.G.values[p.G.index_of(v.sites[i])] = ex->two_point(0, i, beta);
    p.G.symmetric = false;
    if (v.period > 0) {
      p.G = torus_fold(p.G, v.period);
      p.G.symmetric = true;
    }
    p.tail = "exact";
    return p;
  };
  return s;
}

ModelSource lt_source(std::shared_ptr<const TreeSeries> ser) {
  ModelSource s;
  s.kind = ModelKind::LatticeTrees;
  s.label = "lt " + ser->kernel.name() + " B=" + std::to_string(ser->B);
  s.kernel = ser->kernel;
  auto map = std::make_shared<BetaMap>(lt_beta_map(*ser));
  s.beta_max = map->beta_max;
  s.at = [ser, map](double beta) {
    ModelPoint p;
    p.beta = beta;
    p.G = values_only(lt_two_point_beta(*ser, *map, beta));
    p.tail = "none";
    return p;
  };
  return s;
}

Observables compute_observables(const ModelSource& src, double beta) {
  const AdmissibleKernel& J = src.kernel;
  ModelPoint pt = src.at(beta);
  Observables o;
  o.model = model_kind_name(src.kind);
  o.label = src.label;
  o.beta = beta;
  o.A = src.A;
  o.tail = pt.tail;

  if (pt.tail == "green") {
    green_observables(J, pt.G, o.chi, o.xi_sq);
    OriginDiagrams od = green_origin_diagrams(J, beta);
    o.bubble = {od.bubble, od.bubble + od.bubble_err, od.bubble};
    o.triangle = {od.triangle, od.triangle + od.triangle_err, od.triangle};
    o.square = {od.square, od.square + od.square_err, od.square};
    o.H = LatticeField(J.d, 0);
    o.H.values[0] = 0.0;
    o.H_l1 = Interval::point(0.0);
    o.H_m2 = Interval::point(0.0);
  } else {
    LatticeField G = values_only(pt.G);
    LatticeField F = values_only(kernel_apply(J, G, G.L + J.R));
    const double s = G.sum(), m2F = m2F_of(J, G);
    Diagrams dg = field_diagrams(G, F);
    double chi_extra = kInf, m2_extra = kInf, b_extra = kInf, t_extra = kInf, q_extra = kInf;
    if (pt.tail == "dominated") {
      const LatticeField& C = pt.C_trunc;
      LatticeField FC = values_only(kernel_apply(J, C, C.L + J.R));
      chi_extra = 1.0 / (1.0 - beta) - C.sum();
      m2_extra = J.sigma_sq / ((1.0 - beta) * (1.0 - beta)) - m2F_of(J, C);
      OriginDiagrams od = green_origin_diagrams(J, beta);
      Diagrams dc = field_diagrams(C, FC);
      b_extra = od.bubble + od.bubble_err - dc.bubble;
      t_extra = od.triangle + od.triangle_err - dc.triangle;
      q_extra = od.square + od.square_err - dc.square;
    }
    o.chi = with_tail(s, pt.tail, chi_extra);
    Interval m2 = with_tail(m2F, pt.tail, m2_extra);
    o.xi_sq = divide_nonneg(m2, o.chi);
    if (pt.tail != "exact") o.xi_sq.est = m2.lo / o.chi.lo;
    o.bubble = with_tail(dg.bubble, pt.tail, b_extra);
    o.triangle = with_tail(dg.triangle, pt.tail, t_extra);
    o.square = with_tail(dg.square, pt.tail, q_extra);

    switch (src.kind) {
      case ModelKind::Saw: {
        o.H = LatticeField(J.d, 0);
        o.H.values[0] = src.lambda * o.bubble.est;
        o.H_l1 = src.lambda * o.bubble;
        o.H_m2 = Interval::point(0.0);
        break;
      }
      case ModelKind::Percolation: {
        LatticeField W = conv_window(G, F, G.L);
        o.H = pointwise_product(G, W);
        break;
      }
      case ModelKind::Ising: {
        LatticeField K = values_only(linear_combination(1.0, G, beta, F));
        LatticeField JK = values_only(kernel_apply(J, K, K.L + J.R));
        double kjk = origin_pair(K, JK);
        LatticeField D = values_only(linear_combination(1.0, delta_field(J.d), beta, J.field()));
        ConvOptions opt;
        opt.max_radius = 2 * D.L;
        opt.method = ConvMethod::Direct;
        LatticeField D2 = values_only(convolve(D, D, opt));
        o.H = scaled(D2, 3.0 * kjk);
        break;
      }
      case ModelKind::LatticeTrees: {
        const int L = G.L;
        LatticeField Q = conv_window(G, G, 2 * L);
        LatticeField T = conv_window(Q, G, 3 * L);
        LatticeField GT = pointwise_product(G, T);
        GT.values[GT.index_of(Point(J.d, 0))] -= 1.0;
        LatticeField t1 = values_only(kernel_apply(J, GT, GT.L + J.R));
        LatticeField t2 = pointwise_product(F, T);
        LatticeField GJG = conv_window(G, F, 2 * L + J.R);
        LatticeField t3 = pointwise_product(GJG, Q);
        o.H = values_only(linear_combination(1.0, linear_combination(1.0, t1, 1.0, t2), 1.0, t3));
        break;
      }
      default:
        break;
    }
    if (src.kind != ModelKind::Saw) {
      o.H = values_only(o.H);
      o.H_l1 = with_tail(o.H.sum(), pt.tail, kInf);
      o.H_m2 = with_tail(o.H.moment2(), pt.tail, kInf);
    }
  }
  o.E0_point = o.H_l1;
  if (o.H_m2.hi == 0.0) {
    o.E2_point = Interval::point(0.0);
  } else {
    o.E2_point = divide_nonneg(o.H_m2, o.xi_sq);
    if (o.xi_sq.est > 0) o.E2_point.est = o.H_m2.est / o.xi_sq.est;
  }
  o.E0 = o.E0_point;
  o.E2 = o.E2_point;
  o.E = o.E0_point + o.E2_point;
  return o;
}

std::vector<Observables> observe_grid(const ModelSource& src, const std::vector<double>& grid) {
  std::vector<Observables> rows(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) { rows[i] = compute_observables(src, grid[i]); });
  auto sup = [](Interval& run, const Interval& v) {
    run.lo = std::max(run.lo, v.lo);
    run.hi = std::max(run.hi, v.hi);
    run.est = std::max(run.est, v.est);
  };
  Interval e0{0, 0, 0}, e2{0, 0, 0}, e{0, 0, 0};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Interval pe = rows[i].E0_point + rows[i].E2_point;
    sup(e0, rows[i].E0_point);
    sup(e2, rows[i].E2_point);
    sup(e, pe);
    rows[i].E0 = e0;
    rows[i].E2 = e2;
    rows[i].E = e;
    rows[i].Z = i == 0 ? Interval::point(grid[0] == 0.0 ? 0.0 : kNaN)
                       : z_factor(rows[i - 1], grid[i]).value;
  }
  return rows;
}

std::vector<double> default_beta_grid(double beta_max, int n) {
  std::vector<double> g{0.0};
  if (n <= 1) return g;
  if (n == 2) return {0.0, beta_max};
  std::vector<double> lg = log_grid(beta_max * 1e-3, beta_max, n - 1);
  g.insert(g.end(), lg.begin(), lg.end());
  g.back() = beta_max;
  return g;
}

namespace {
nlohmann::json interval_json(const Interval& v) {
  auto num = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(fmt(x)); };
  return {{"lo", num(v.lo)}, {"hi", num(v.hi)}, {"est", num(v.est)}};
}
std::string g17(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace

nlohmann::json Observables::to_json(bool with_fields) const {
  nlohmann::json j;
  j["model"] = model;
  j["label"] = label;
  j["beta"] = beta;
  j["tail"] = tail;
  j["A"] = A;
  j["chi"] = interval_json(chi);
  j["xi_sq"] = interval_json(xi_sq);
  j["open_bubble"] = interval_json(bubble);
  j["open_triangle"] = interval_json(triangle);
  j["open_square"] = interval_json(square);
  j["H_l1"] = interval_json(H_l1);
  j["H_m2"] = interval_json(H_m2);
  j["E0"] = interval_json(E0);
  j["E2"] = interval_json(E2);
  j["E"] = interval_json(E);
  j["Z"] = interval_json(Z);
  // A = 1 for every model here, so the rescaled observables equal the raw ones.
  j["rescaled_equals_raw"] = A == 1.0;
  if (with_fields) j["H_field"] = nlohmann::json::parse(field_to_json(H));
  return j;
}

std::string observables_csv(const std::vector<Observables>& rows) {
  std::ostringstream os;
  os << "model,label,beta,chi,chi_lo,chi_hi,xi2,xi2_lo,xi2_hi,bubble,triangle,square,E0,E2,E,E_hi,Z,tail\n";
  for (const auto& r : rows) {
    os << r.model << ",\"" << r.label << "\"," << g17(r.beta) << ',' << g17(r.chi.est) << ',' << g17(r.chi.lo) << ','
       << g17(r.chi.hi) << ',' << g17(r.xi_sq.est) << ',' << g17(r.xi_sq.lo) << ',' << g17(r.xi_sq.hi) << ','
       << g17(r.bubble.est) << ',' << g17(r.triangle.est) << ',' << g17(r.square.est) << ',' << g17(r.E0.est) << ','
       << g17(r.E2.est) << ',' << g17(r.E.est) << ',' << g17(r.E.hi) << ',' << g17(r.Z.est) << ',' << r.tail << '\n';
  }
  return os.str();
}

nlohmann::json BetaOfDelta::to_json() const {
  return {{"beta", beta}, {"bracket", {bracket_lo, bracket_hi}}, {"saturated", saturated}, {"certified", certified}};
}

BetaOfDelta beta_of_delta(const std::vector<Observables>& rows, double delta) {
  BetaOfDelta r;
  if (rows.empty() || delta <= 0.0) return r;
  bool finite = true;
  for (const auto& o : rows) finite &= std::isfinite(o.E.hi);
  r.certified = finite;
  std::size_t last = rows.size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double e = finite ? rows[i].E.hi : rows[i].E.lo;
    if (e < delta) last = i;
    else break;
  }
  if (last == rows.size()) return r;
  r.beta = rows[last].beta;
  r.bracket_lo = rows[last].beta;
  if (last + 1 < rows.size()) {
    r.bracket_hi = rows[last + 1].beta;
  } else {
    r.bracket_hi = rows[last].beta;
    r.saturated = true;
  }
  return r;
}

ZFactor z_factor(const Observables& low, double beta_high) {
  ZFactor z;
  z.beta_low = low.beta;
  z.beta_high = beta_high;
  z.value = (beta_high - low.beta) * low.chi;
  return z;
}

nlohmann::json ScalingFit::to_json() const {
  return {{"d", d}, {"beta", beta}, {"diagram", diagram}, {"R", Rs}, {"sigma", sigmas}, {"values", values},
          {"slope", slope}, {"intercept", intercept}};
}

ScalingFit sigma_scaling_scan(int d, const std::vector<int>& Rs, double beta, const std::string& diagram) {
  int dc = diagram == "bubble" ? 4 : diagram == "triangle" ? 6 : diagram == "square" ? 8 : -1;
  if (dc < 0) throw std::invalid_argument("sigma scan: unknown diagram " + diagram);
  if (d <= dc)
    throw std::invalid_argument("sigma scan: the " + diagram + " diagram needs d > " + std::to_string(dc) +
                                "; at d = " + std::to_string(d) + " it does not decay like sigma^-d");
  ScalingFit f;
  f.d = d;
  f.beta = beta;
  f.diagram = diagram;
  f.Rs = Rs;
  for (int R : Rs) {
    AdmissibleKernel J = uniform_spread_out(d, R);
    OriginDiagrams od = green_origin_diagrams(J, beta);
    f.sigmas.push_back(J.sigma);
    f.values.push_back(diagram == "bubble" ? od.bubble : diagram == "triangle" ? od.triangle : od.square);
  }
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < Rs.size(); ++i) {
    xs.push_back(std::log(f.sigmas[i]));
    ys.push_back(std::log(f.values[i]));
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= xs.size();
  my /= ys.size();
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (xs.size() < 2 || sxx <= 1e-24) throw std::invalid_argument("sigma scan: need at least two distinct ranges");
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  return f;
}

InequalityReport sigma_scaling_check(const ScalingFit& fit, double slope_lo, double slope_hi) {
  InequalityReport r = make_report("sigma_scaling", "origin " + fit.diagram + " of C_beta at most of order sigma_J^-d", 0.0);
  r.grid = "d=" + std::to_string(fit.d) + " beta=" + fmt(fit.beta) + " R in {";
  for (std::size_t i = 0; i < fit.Rs.size(); ++i) r.grid += (i ? "," : "") + std::to_string(fit.Rs[i]);
  r.grid += "}";
  r.record(std::min(fit.slope - slope_lo, slope_hi - fit.slope), "slope " + fmt(fit.slope));
  r.details = fit.to_json();
  r.details["slope_window"] = {slope_lo, slope_hi};
  r.finalize();
  return r;
}

InequalityReport moment_identity_check(const ModelSource& src, const std::vector<double>& grid, double tol) {
  InequalityReport r = make_report("moment_identity", "||x|^2 G||_1 = ||x|^2 F||_1 - sigma_J^2 chi", tol);
  r.grid = src.label + "; " + std::to_string(grid.size()) + " beta values";
  const AdmissibleKernel& J = src.kernel;
  for (double b : grid) {
    LatticeField G = values_only(src.at(b).G);
    LatticeField F = values_only(kernel_apply(J, G, G.L + J.R));
    double lhs = G.moment2();
    double rhs = F.moment2() - J.sigma_sq * G.sum();
    double scale = std::max(1.0, F.moment2());
    r.record(-std::abs(lhs - rhs) / scale, "beta=" + fmt(b));
  }
  r.details["relative"] = true;
  r.finalize();
  return r;
}

InequalityReport h_zero_check(const ModelSource& src, double tol) {
  InequalityReport r = make_report("H_zero", "H_0 = 0", tol);
  r.grid = src.label + "; beta = 0";
  Observables o = compute_observables(src, 0.0);
  double mx = 0.0;
  for (double v : o.H.values) mx = std::max(mx, std::abs(v));
  r.record(-mx, "max |H_0(x)|");
  r.record(-std::abs(o.H_l1.est), "||H_0||_1");
  r.finalize();
  return r;
}

InequalityReport e_refinement_check(const ModelSource& src, double beta_end, int n, double rel) {
  InequalityReport r = make_report("E_refinement", "E(beta) on two grid resolutions", rel);
  r.grid = src.label + "; " + std::to_string(n) + " and " + std::to_string(2 * n - 1) + " points up to " + fmt(beta_end);
  auto a = observe_grid(src, default_beta_grid(beta_end, n));
  auto b = observe_grid(src, default_beta_grid(beta_end, 2 * n - 1));
  double ea = a.back().E.est, eb = b.back().E.est;
  double scale = std::max({std::abs(ea), std::abs(eb), 1e-300});
  double diff = (ea == 0.0 && eb == 0.0) ? 0.0 : std::abs(ea - eb) / scale;
  r.record(-diff, "E at beta=" + fmt(beta_end));
  r.details["E_coarse"] = ea;
  r.details["E_fine"] = eb;
  r.finalize();
  return r;
}

}  // namespace mflab

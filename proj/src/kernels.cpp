#include "mflab/kernels.hpp"

#include <cstring>

#include <cmath>
#include <sstream>

namespace mflab {

namespace {

constexpr double kMaxKernelSites = 2.0e7;

KernelValidationError make_error(std::vector<KernelViolation> v) { return KernelValidationError(std::move(v)); }

std::string describe(const std::vector<KernelViolation>& v) {
  std::ostringstream os;
  os << "kernel validation failed:";
  for (const auto& x : v) os << " [" << x.clause << ": " << x.detail << "]";
  return os.str();
}

void certify_c0(AdmissibleKernel& k) {
  double rd = std::pow(static_cast<double>(k.R), k.d);
  k.c0 = std::min({k.sigma / k.R, 1.0 / (k.max_value * rd), 1.0});
}

}  // namespace

KernelValidationError::KernelValidationError(std::vector<KernelViolation> v)
    : std::runtime_error(describe(v)), violations_(std::move(v)) {}

const LatticeField& AdmissibleKernel::field() const {
  if (!field_ptr) throw std::length_error("kernel " + name() + " is too large to materialise as a field");
  return *field_ptr;
}

std::vector<std::pair<Point, double>> AdmissibleKernel::support() const {
  std::vector<std::pair<Point, double>> out;
  const LatticeField& f = field();
  f.for_each([&](std::size_t i, const int* x) {
    if (f.values[i] != 0.0) out.emplace_back(Point(x, x + f.d), f.values[i]);
  });
  return out;
}

double AdmissibleKernel::value(const Point& x) const {
  if (field_ptr) return field_ptr->at(x);
  int n = norm_inf(x);
  if (n == 0 || n > R) return 0.0;
  if (family == KernelFamily::NearestNeighbour && norm2_sq(x) != 1) return 0.0;
  return weight.get_d();
}

std::string AdmissibleKernel::name() const {
  std::ostringstream os;
  switch (family) {
    case KernelFamily::NearestNeighbour: os << "nn(d=" << d << ")"; break;
    case KernelFamily::SpreadOut: os << "spread_out(d=" << d << ",R=" << R << ")"; break;
    case KernelFamily::Custom: os << "custom(d=" << d << ",R=" << R << ")"; break;
  }
  return os.str();
}

AdmissibleKernel nearest_neighbour(int d) {
  if (d < 1) throw std::invalid_argument("nearest_neighbour: d must be >= 1");
  AdmissibleKernel k;
  k.family = KernelFamily::NearestNeighbour;
  k.d = d;
  k.R = 1;
  k.weight = Rational(1, 2 * d);
  k.sigma_sq_exact = 1;
  k.sigma_sq = 1.0;
  k.sigma = 1.0;
  k.max_value = k.weight.get_d();
  k.support_size = 2 * d;
  auto f = std::make_shared<LatticeField>(d, 1);
  for (int a = 0; a < d; ++a) {
    f->set(unit_vector(d, a, 1), k.max_value);
    f->set(unit_vector(d, a, -1), k.max_value);
  }
  k.field_ptr = f;
  certify_c0(k);
  return k;
}

AdmissibleKernel uniform_spread_out(int d, int R) {
  if (d < 1) throw std::invalid_argument("uniform_spread_out: d must be >= 1");
  if (R < 1) throw std::invalid_argument("uniform_spread_out: R must be >= 1");
  AdmissibleKernel k;
  k.family = KernelFamily::SpreadOut;
  k.d = d;
  k.R = R;
  BigInt side = 2 * R + 1;
  BigInt V;
  mpz_pow_ui(V.get_mpz_t(), side.get_mpz_t(), static_cast<unsigned long>(d));
  k.weight = Rational(BigInt(1), V - 1);
  // sigma^2 = d (2R+1)^d R(R+1) / (3(|Λ_R|-1)).
  k.sigma_sq_exact = Rational(BigInt(d) * V * R * (R + 1), BigInt(3) * (V - 1));
  k.sigma_sq_exact.canonicalize();
  k.weight.canonicalize();
  k.sigma_sq = k.sigma_sq_exact.get_d();
  k.sigma = std::sqrt(k.sigma_sq);
  k.max_value = k.weight.get_d();
  k.support_size = static_cast<std::size_t>(V.get_d()) - 1;
  if (std::pow(2.0 * R + 1.0, d) <= kMaxKernelSites) {
    auto f = std::make_shared<LatticeField>(d, R);
    double w = k.max_value;
    for (double& v : f->values) v = w;
    f->values[f->values.size() / 2] = 0.0;
    k.field_ptr = f;
  }
  certify_c0(k);
  return k;
}

AdmissibleKernel validate(const LatticeField& field) {
  std::vector<KernelViolation> bad;
  const int d = field.d;
  if (field.origin() != 0.0) bad.push_back({"J_0=0", "value at the origin is " + std::to_string(field.origin())});
  bool negative = false;
  int R = 0;
  double maxv = 0.0;
  Rational total = 0;
  field.for_each([&](std::size_t i, const int* x) {
    double v = field.values[i];
    if (v < 0) negative = true;
    if (v > 0) {
      int n = 0;
      for (int a = 0; a < d; ++a) n = std::max(n, std::abs(x[a]));
      R = std::max(R, n);
      maxv = std::max(maxv, v);
    }
    if (v != 0.0) total += rational_from_double(v);
  });
  if (negative) bad.push_back({"nonnegativity", "field has negative values"});
  double mass = total.get_d();
  if (total != 1 && std::fabs(mass - 1.0) > 1e-12)
    bad.push_back({"normalization", "sum of J is " + std::to_string(mass)});
  if (field.tail_bound > 0) bad.push_back({"finite range", "field carries a nonzero tail bound"});
  if (!is_symmetric(field, 1e-12)) bad.push_back({"symmetry", "values are not invariant under the hyperoctahedral group"});
  if (R == 0) bad.push_back({"c0", "empty support: no range or spread to certify"});
  if (!bad.empty()) throw make_error(std::move(bad));

  AdmissibleKernel k;
  k.family = KernelFamily::Custom;
  k.d = d;
  k.R = R;
  k.weight = 0;
  k.max_value = maxv;
  Rational s2 = 0;
  bool uniform = true;
  double first = -1.0;
  std::size_t count = 0;
  field.for_each([&](std::size_t i, const int* x) {
    double v = field.values[i];
    if (v == 0.0) return;
    long long n2 = 0;
    for (int a = 0; a < d; ++a) n2 += static_cast<long long>(x[a]) * x[a];
    s2 += rational_from_double(v) * Rational(BigInt(std::to_string(n2)));
    if (first < 0) first = v;
    uniform = uniform && v == first;
    ++count;
  });
  k.sigma_sq_exact = s2;
  k.sigma_sq = s2.get_d();
  k.sigma = std::sqrt(k.sigma_sq);
  k.support_size = count;
  k.field_ptr = std::make_shared<LatticeField>(field.restricted(R));
  certify_c0(k);
  if (!(k.c0 > 0)) throw make_error({{"c0", "no positive c0 satisfies both bounds"}});
  return k;
}

AdmissibleKernel make_kernel(const std::string& family, int d, int R) {
  if (family == "nn") return nearest_neighbour(d);
  if (family == "spread_out") return uniform_spread_out(d, R);
  throw std::invalid_argument("unknown kernel family '" + family + "' (expected nn or spread_out)");
}

LatticeField kernel_apply(const AdmissibleKernel& J, const LatticeField& v, int cap) {
  if (J.d != v.d) throw std::invalid_argument("kernel_apply: dimension mismatch");
  if (J.family != KernelFamily::SpreadOut) {
    ConvOptions opt;
    opt.max_radius = cap;
    opt.method = ConvMethod::Direct;
    return convolve(J.field(), v, opt);
  }
  // Spread-out: J*v = (box_sum(v) - v) / (|Λ_R| - 1), box sums separable.
  const int d = v.d, R = J.R, L = v.L + R;
  LatticeField s = v.embedded(L);
  const std::size_t side = s.side();
  std::vector<double> tmp;
  std::size_t st = s.size();
  for (int a = 0; a < d; ++a) {
    st /= side;
    // For fixed leading coordinates the axis-a slab is contiguous: side
    // blocks of length st.
    const std::size_t slab = side * st;
    for (std::size_t h = 0; h < s.size(); h += slab) {
      double* base = &s.values[h];
      tmp.assign(base, base + slab);
      if (st == 1) {
        for (std::size_t k = 0; k < side; ++k) {
          const std::size_t lo = k >= static_cast<std::size_t>(R) ? k - R : 0;
          const std::size_t hi = std::min(side - 1, k + R);
          double acc = 0.0;
          for (std::size_t j = lo; j <= hi; ++j) acc += tmp[j];
          base[k] = acc;
        }
      } else if (R <= 8) {
        // Direct window sums: no running-sum drift into the small tails.
        for (std::size_t k = 0; k < side; ++k) {
          const std::size_t lo = k >= static_cast<std::size_t>(R) ? k - R : 0;
          const std::size_t hi = std::min(side - 1, k + R);
          double* o = base + k * st;
          std::memcpy(o, &tmp[lo * st], st * sizeof(double));
          for (std::size_t j = lo + 1; j <= hi; ++j) {
            const double* in = &tmp[j * st];
            for (std::size_t t = 0; t < st; ++t) o[t] += in[t];
          }
        }
      } else {
        std::vector<double> acc(st, 0.0);
        for (std::size_t k = 0; k < side + R; ++k) {
          if (k < side)
            for (std::size_t t = 0; t < st; ++t) acc[t] += tmp[k * st + t];
          if (k >= static_cast<std::size_t>(2 * R + 1))
            for (std::size_t t = 0; t < st; ++t) acc[t] -= tmp[(k - 2 * R - 1) * st + t];
          if (k >= static_cast<std::size_t>(R)) std::memcpy(base + (k - R) * st, acc.data(), st * sizeof(double));
        }
      }
    }
  }
  // Remove the centre term, row by row over v's box.
  {
    const std::size_t vs = v.side();
    const std::size_t rows = v.size() / vs;
    for (std::size_t row = 0; row < rows; ++row) {
      std::size_t rr = row, off = R, mul = side;
      for (int ax = d - 2; ax >= 0; --ax) {
        off += (rr % vs + R) * mul;
        rr /= vs;
        mul *= side;
      }
      double* o = &s.values[off];
      const double* in = &v.values[row * vs];
      for (std::size_t k = 0; k < vs; ++k) o[k] -= in[k];
    }
  }
  const double inv = 1.0 / (std::pow(2.0 * R + 1.0, d) - 1.0);
  for (double& x : s.values) x = x > 0 ? x * inv : 0.0;
  s.symmetric = v.symmetric;
  s.tail_exact = v.tail_exact && v.symmetric;
  s.tail_bound = v.tail_bound;
  s.tail_m2 = v.tail_bound > 0 ? v.tail_m2 + J.sigma_sq * v.tail_bound : v.tail_m2;
  if (!v.symmetric && v.tail_bound > 0)
    s.tail_m2 += 2.0 * std::sqrt(J.sigma_sq * v.tail_bound * v.tail_m2);
  int c = cap > 0 ? cap : max_radius();
  if (L > c) s = s.restricted(c);
  return s;
}

double kernel_axis_mgf(const AdmissibleKernel& J, double t) {
  if (J.family == KernelFamily::NearestNeighbour) return (J.d - 1 + std::cosh(t)) / J.d;
  if (J.family == KernelFamily::SpreadOut) {
    double line = 0.0;
    for (int j = -J.R; j <= J.R; ++j) line += std::exp(t * j);
    double side = 2.0 * J.R + 1.0;
    double V = std::pow(side, J.d);
    return (std::pow(side, J.d - 1) * line - 1.0) / (V - 1.0);
  }
  double m = 0.0;
  const LatticeField& f = J.field();
  f.for_each([&](std::size_t i, const int* x) {
    if (f.values[i] != 0.0) m += f.values[i] * std::exp(t * x[0]);
  });
  return m;
}

}  // namespace mflab

#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "mflab/interval.hpp"

namespace mflab {

using Point = std::vector<int>;

int norm_inf(const Point& x);
long long norm2_sq(const Point& x);
double norm2(const Point& x);
Point unit_vector(int d, int axis, int length = 1);

// Λ_k(center) = {x : |x - center| <= k}.
struct LatticeBox {
  int d = 1;
  int k = 0;
  Point center;

  LatticeBox(int dim, int radius);
  LatticeBox(int radius, Point c);
  std::size_t site_count() const;
  bool contains(const Point& x) const;
  std::vector<Point> sites() const;
};

// Run-wide caps. Convolutions whose natural radius exceeds max_radius are
// truncated and the discarded mass moves into the tail.
void set_max_radius(int radius);
int max_radius();
void set_max_sites(std::size_t sites);
std::size_t max_sites();

// Dense field on Λ_L, row-major with the last axis fastest.
// tail_bound bounds the l1 mass missing from `values` (outside the box or
// lost through truncation); tail_m2 bounds the missing second moment.
// tail_exact marks both as exact bookkeeping rather than upper bounds.
struct LatticeField {
  int d = 1;
  int L = 0;
  std::vector<double> values;
  double tail_bound = 0.0;
  double tail_m2 = 0.0;
  bool tail_exact = true;
  bool symmetric = true;

  LatticeField() = default;
  LatticeField(int dim, int radius);

  static LatticeField delta(int dim, double value = 1.0);

  std::size_t side() const { return static_cast<std::size_t>(2 * L + 1); }
  std::size_t size() const { return values.size(); }
  bool in_box(const Point& x) const;
  std::size_t index_of(const Point& x) const;
  Point point_of(std::size_t idx) const;
  double at(const Point& x) const;
  void set(const Point& x, double v);
  double origin() const { return values[values.size() / 2]; }

  double sum() const;
  double moment2() const;
  double max_value() const;
  Interval l1_norm() const;
  Interval second_moment() const;

  // Visits every site with its coordinates.
  template <class Fn>
  void for_each(Fn&& fn) const {
    std::vector<int> x(d, -L);
    for (std::size_t i = 0; i < values.size(); ++i) {
      fn(i, static_cast<const int*>(x.data()));
      for (int a = d - 1; a >= 0; --a) {
        if (++x[a] <= L) break;
        x[a] = -L;
      }
    }
  }

  // Smaller box; discarded mass and second moment are added to the tail.
  LatticeField restricted(int radius) const;
  // Same values in a larger box.
  LatticeField embedded(int radius) const;
};

// Squared Euclidean norm per site of Λ_L.
std::vector<double> norm2_table(int d, int L);

enum class ConvMethod { Auto, Direct, Fft };

struct ConvOptions {
  int max_radius = -1;  // -1: run-wide cap
  ConvMethod method = ConvMethod::Auto;
};

LatticeField convolve(const LatticeField& f, const LatticeField& g, const ConvOptions& opt = {});

LatticeField symmetrize(const LatticeField& f);

// a*f + b*g on the larger of the two boxes. Tails combine by |a|,|b|.
LatticeField linear_combination(double a, const LatticeField& f, double b, const LatticeField& g);
LatticeField scaled(const LatticeField& f, double s);
// Pointwise product on the common box.
LatticeField pointwise_product(const LatticeField& f, const LatticeField& g);
// f(-x).
LatticeField reflected(const LatticeField& f);
bool is_symmetric(const LatticeField& f, double rel_tol = 1e-12);

std::string field_to_json(const LatticeField& f);
LatticeField field_from_json(const std::string& text);
void write_field_binary(const LatticeField& f, const std::string& path);
LatticeField read_field_binary(const std::string& path);

}  // namespace mflab

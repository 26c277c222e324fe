#pragma once

#include <cstddef>
#include <iosfwd>
#include <utility>
#include <vector>

#include "semirec/mesh.hpp"

namespace semirec {

/// Positive per-triangle coefficient (the diffusivity sigma).
class PiecewiseCoefficient {
 public:
  PiecewiseCoefficient() = default;
  /// `lower_bound` defaults to the smallest value; every value must be at
  /// least `lower_bound` and `lower_bound` must be positive.
  explicit PiecewiseCoefficient(std::vector<double> values, double lower_bound = 0.0);

  static PiecewiseCoefficient constant(std::size_t num_triangles, double value);
  static PiecewiseCoefficient from_regions(const Partition& partition, const std::vector<double>& region_values,
                                           double lower_bound = 0.0);

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t t) const { return values_[t]; }
  const std::vector<double>& values() const { return values_; }
  double lower_bound() const { return lower_bound_; }

  PiecewiseCoefficient scaled(double factor) const;

 private:
  std::vector<double> values_;
  double lower_bound_ = 0.0;
};

/// a(x, y) = sum_{k=2}^{K} a_k(x) y^k / k!, with a_k constant per triangle.
/// a_0 = a_1 = 0 are implicit and never stored.
class NonlinearitySeries {
 public:
  NonlinearitySeries() = default;
  /// All-zero series of truncation order `order` (>= 2).
  NonlinearitySeries(std::size_t num_triangles, int order);

  int order() const { return order_; }
  std::size_t num_triangles() const { return num_triangles_; }

  /// a_k on triangle t; zero for k < 2 or k > order().
  double coefficient(std::size_t t, int k) const;

  /// Copy with a_k replaced by the given per-triangle values.
  NonlinearitySeries with_coefficient(int k, const std::vector<double>& values) const;
  /// Copy with truncation order changed (new coefficients are zero, dropped ones discarded).
  NonlinearitySeries with_order(int order) const;

  std::vector<double> coefficient_field(int k) const;

  /// max_{k,T} |a_k(T)|.
  double sup_norm() const { return sup_norm_; }
  bool is_zero() const { return sup_norm_ == 0.0; }

 private:
  void refresh_sup_norm();

  std::size_t num_triangles_ = 0;
  int order_ = 2;
  std::vector<double> coefficients_;  // row-major, num_triangles x (order - 1), column j holds a_{j+2}
  double sup_norm_ = 0.0;
};

double eval_a(const NonlinearitySeries& series, std::size_t triangle, double y);

/// l-th derivative in y: sum_{k=0}^{K-l} a_{k+l} y^k / k!. Zero for l > K.
double eval_a_deriv(const NonlinearitySeries& series, std::size_t triangle, double y, int l);

/// Coefficients c_k = a_{k+l}(T), k = 0..K-l, of the shifted series whose
/// plain evaluation sum_k c_k y^k / k! is the l-th derivative.
std::vector<double> shifted_coefficients(const NonlinearitySeries& series, std::size_t triangle, int l);

/// Evaluates sum_k c_k y^k / k! for a dense coefficient list.
double eval_power_series(const std::vector<double>& coefficients, double y);

struct DiskInclusion {
  Disk disk;
  double value = 0.0;
};

/// Geometric description of a piecewise-constant field: a background value
/// and disk inclusions (first inclusion containing a triangle's barycenter
/// wins). Evaluates to per-triangle values on any mesh.
struct PiecewiseField {
  double background = 0.0;
  std::vector<DiskInclusion> inclusions;

  std::vector<double> evaluate(const Mesh& mesh) const;
  double at(Point p) const;
  /// Partition induced by the inclusions (label 0 = background).
  Partition partition(const Mesh& mesh) const;
  /// Value per partition label, matching partition().
  std::vector<double> region_values() const;
};

void write_coefficients(std::ostream& out, const PiecewiseCoefficient& sigma, const NonlinearitySeries& series);
std::pair<PiecewiseCoefficient, NonlinearitySeries> read_coefficients(std::istream& in, const Mesh& mesh);

}  // namespace semirec

#include "semirec/coefficients.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <string>

#include "semirec/error.hpp"

namespace semirec {

PiecewiseCoefficient::PiecewiseCoefficient(std::vector<double> values, double lower_bound)
    : values_(std::move(values)) {
  if (values_.empty()) throw Error(ErrorCode::InvalidArgument, "coefficient has no values");
  const double smallest = *std::min_element(values_.begin(), values_.end());
  lower_bound_ = lower_bound > 0.0 ? lower_bound : smallest;
  if (!(lower_bound_ > 0.0) || !std::isfinite(lower_bound_))
    throw Error(ErrorCode::InvalidArgument, "coefficient lower bound must be positive");
  if (smallest < lower_bound_)
    throw Error(ErrorCode::InvalidArgument, "coefficient value below its lower bound");
  for (double v : values_)
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "coefficient value not finite");
}

PiecewiseCoefficient PiecewiseCoefficient::constant(std::size_t num_triangles, double value) {
  return PiecewiseCoefficient(std::vector<double>(num_triangles, value));
}

PiecewiseCoefficient PiecewiseCoefficient::from_regions(const Partition& partition,
                                                        const std::vector<double>& region_values,
                                                        double lower_bound) {
  if (static_cast<int>(region_values.size()) != partition.count)
    throw Error(ErrorCode::DimensionMismatch, "one value per region required");
  std::vector<double> v(partition.labels.size());
  for (std::size_t t = 0; t < v.size(); ++t) v[t] = region_values[partition.labels[t]];
  return PiecewiseCoefficient(std::move(v), lower_bound);
}

PiecewiseCoefficient PiecewiseCoefficient::scaled(double factor) const {
  std::vector<double> v = values_;
  for (double& x : v) x *= factor;
  return PiecewiseCoefficient(std::move(v), lower_bound_ * factor);
}

NonlinearitySeries::NonlinearitySeries(std::size_t num_triangles, int order)
    : num_triangles_(num_triangles), order_(order) {
  if (order < 2) throw Error(ErrorCode::InvalidArgument, "truncation order must be at least 2");
  coefficients_.assign(num_triangles * static_cast<std::size_t>(order - 1), 0.0);
}

double NonlinearitySeries::coefficient(std::size_t t, int k) const {
  if (k < 2 || k > order_) return 0.0;
  return coefficients_[t * static_cast<std::size_t>(order_ - 1) + static_cast<std::size_t>(k - 2)];
}

NonlinearitySeries NonlinearitySeries::with_coefficient(int k, const std::vector<double>& values) const {
  if (k < 2 || k > order_) throw Error(ErrorCode::InvalidArgument, "coefficient index outside 2..K");
  if (values.size() != num_triangles_) throw Error(ErrorCode::DimensionMismatch, "one value per triangle required");
  NonlinearitySeries copy = *this;
  for (std::size_t t = 0; t < num_triangles_; ++t) {
    if (!std::isfinite(values[t])) throw Error(ErrorCode::InvalidArgument, "coefficient not finite");
    copy.coefficients_[t * static_cast<std::size_t>(order_ - 1) + static_cast<std::size_t>(k - 2)] = values[t];
  }
  copy.refresh_sup_norm();
  return copy;
}

NonlinearitySeries NonlinearitySeries::with_order(int order) const {
  NonlinearitySeries copy(num_triangles_, order);
  for (int k = 2; k <= std::min(order, order_); ++k)
    for (std::size_t t = 0; t < num_triangles_; ++t)
      copy.coefficients_[t * static_cast<std::size_t>(order - 1) + static_cast<std::size_t>(k - 2)] =
          coefficient(t, k);
  copy.refresh_sup_norm();
  return copy;
}

std::vector<double> NonlinearitySeries::coefficient_field(int k) const {
  std::vector<double> v(num_triangles_);
  for (std::size_t t = 0; t < num_triangles_; ++t) v[t] = coefficient(t, k);
  return v;
}

void NonlinearitySeries::refresh_sup_norm() {
  sup_norm_ = 0.0;
  for (double c : coefficients_) sup_norm_ = std::max(sup_norm_, std::abs(c));
}

double eval_power_series(const std::vector<double>& coefficients, double y) {
  // Horner in the form c0 + y (c1 + y/2 (c2 + y/3 (...))).
  if (coefficients.empty()) return 0.0;
  double acc = coefficients.back();
  for (std::size_t k = coefficients.size() - 1; k-- > 0;) acc = coefficients[k] + acc * y / static_cast<double>(k + 1);
  return acc;
}

std::vector<double> shifted_coefficients(const NonlinearitySeries& series, std::size_t triangle, int l) {
  if (l < 0) throw Error(ErrorCode::InvalidArgument, "derivative order must be non-negative");
  std::vector<double> c;
  for (int k = 0; k + l <= series.order(); ++k) c.push_back(series.coefficient(triangle, k + l));
  return c;
}

double eval_a(const NonlinearitySeries& series, std::size_t triangle, double y) {
  return eval_a_deriv(series, triangle, y, 0);
}

double eval_a_deriv(const NonlinearitySeries& series, std::size_t triangle, double y, int l) {
  if (l > series.order()) return 0.0;
  return eval_power_series(shifted_coefficients(series, triangle, l), y);
}

double PiecewiseField::at(Point p) const {
  for (const auto& inc : inclusions)
    if (std::hypot(p.x - inc.disk.center.x, p.y - inc.disk.center.y) <= inc.disk.radius) return inc.value;
  return background;
}

std::vector<double> PiecewiseField::evaluate(const Mesh& mesh) const {
  std::vector<double> v(mesh.num_triangles());
  for (std::size_t t = 0; t < v.size(); ++t) v[t] = at(mesh.barycenter(t));
  return v;
}

Partition PiecewiseField::partition(const Mesh& mesh) const {
  std::vector<Disk> disks;
  for (const auto& inc : inclusions) disks.push_back(inc.disk);
  return partition_from_disks(mesh, disks);
}

std::vector<double> PiecewiseField::region_values() const {
  std::vector<double> v{background};
  for (const auto& inc : inclusions) v.push_back(inc.value);
  return v;
}

void write_coefficients(std::ostream& out, const PiecewiseCoefficient& sigma, const NonlinearitySeries& series) {
  const auto old_precision = out.precision(17);
  out << "COEF v1\n";
  out << "SIGMA " << sigma.size() << '\n';
  for (double v : sigma.values()) out << v << '\n';
  out << "A " << series.order() << '\n';
  for (std::size_t t = 0; t < series.num_triangles(); ++t) {
    for (int k = 2; k <= series.order(); ++k) out << (k > 2 ? " " : "") << series.coefficient(t, k);
    out << '\n';
  }
  out.precision(old_precision);
}

std::pair<PiecewiseCoefficient, NonlinearitySeries> read_coefficients(std::istream& in, const Mesh& mesh) {
  auto fail = [](const std::string& msg) { return Error(ErrorCode::ParseError, "coefficient file: " + msg); };
  std::string magic, version;
  if (!(in >> magic >> version) || magic != "COEF" || version != "v1") throw fail("missing COEF v1 header");
  const std::size_t nt = mesh.num_triangles();

  std::string key;
  if (!(in >> key)) throw fail("missing SIGMA block");
  std::vector<double> sigma(nt);
  if (key == "SIGMA") {
    std::size_t n = 0;
    if (!(in >> n) || n != nt) throw fail("SIGMA block size differs from triangle count");
    for (auto& v : sigma)
      if (!(in >> v)) throw fail("truncated SIGMA block");
  } else if (key == "SIGMA_REGIONS") {
    std::size_t n = 0;
    if (!(in >> n)) throw fail("bad SIGMA_REGIONS header");
    std::map<int, double> by_label;
    for (std::size_t i = 0; i < n; ++i) {
      int label = 0;
      double value = 0.0;
      if (!(in >> label >> value)) throw fail("truncated SIGMA_REGIONS block");
      by_label[label] = value;
    }
    for (std::size_t t = 0; t < nt; ++t) {
      const auto it = by_label.find(mesh.cell_regions()[t]);
      if (it == by_label.end()) throw fail("no SIGMA_REGIONS value for region " + std::to_string(mesh.cell_regions()[t]));
      sigma[t] = it->second;
    }
  } else {
    throw fail("expected SIGMA or SIGMA_REGIONS, got " + key);
  }

  int order = 0;
  if (!(in >> key >> order) || key != "A" || order < 2) throw fail("bad A block header");
  NonlinearitySeries series(nt, order);
  std::vector<std::vector<double>> cols(static_cast<std::size_t>(order - 1), std::vector<double>(nt));
  for (std::size_t t = 0; t < nt; ++t)
    for (int k = 2; k <= order; ++k)
      if (!(in >> cols[static_cast<std::size_t>(k - 2)][t])) throw fail("truncated A block");
  for (int k = 2; k <= order; ++k) series = series.with_coefficient(k, cols[static_cast<std::size_t>(k - 2)]);
  return {PiecewiseCoefficient(std::move(sigma)), std::move(series)};
}

}  // namespace semirec

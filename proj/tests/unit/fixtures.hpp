#pragma once

#include <cmath>
#include <map>
#include <numbers>

#include "semirec/coefficients.hpp"
#include "semirec/fem.hpp"
#include "semirec/mesh.hpp"

namespace fixtures {

inline constexpr double kPi = std::numbers::pi;

inline const semirec::Mesh& disk(double h) {
  static std::map<double, semirec::Mesh> cache;
  auto it = cache.find(h);
  if (it == cache.end()) it = cache.emplace(h, semirec::tag_gamma(semirec::build_disk_mesh(1.0, std::nullopt, h),
                                                                  {0.0, 2.0 * kPi}))
                                  .first;
  return it->second;
}

inline const semirec::Mesh& half_disk_gamma(double h) {
  static std::map<double, semirec::Mesh> cache;
  auto it = cache.find(h);
  if (it == cache.end())
    it = cache.emplace(h, semirec::tag_gamma(semirec::build_disk_mesh(1.0, std::nullopt, h), {0.0, kPi})).first;
  return it->second;
}

inline semirec::PiecewiseCoefficient unit_sigma(const semirec::Mesh& m) {
  return semirec::PiecewiseCoefficient::constant(m.num_triangles(), 1.0);
}

inline semirec::NonlinearitySeries constant_series(const semirec::Mesh& m, int order, int k, double value) {
  return semirec::NonlinearitySeries(m.num_triangles(), order)
      .with_coefficient(k, std::vector<double>(m.num_triangles(), value));
}

}  // namespace fixtures

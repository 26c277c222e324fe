#include <doctest.h>

#include <cmath>
#include <map>

#include "fixtures.hpp"
#include "semirec/error.hpp"
#include "semirec/linearization.hpp"
#include "semirec/traces.hpp"

using namespace semirec;
using fixtures::kPi;

namespace {

double rel_l2(const Mesh& m, const NodalField& a, const NodalField& b) {
  return std::sqrt(l2_norm_squared(m, a - b) / l2_norm_squared(m, b));
}

// Shape multiset -> number of set partitions of {1..p} (t1) u {p+1..p+q} (t2)
// with that shape, by walking every restricted growth string.
std::map<std::vector<LatticeIndex>, long long> brute_force_partitions(int p, int q) {
  const int n = p + q;
  std::map<std::vector<LatticeIndex>, long long> out;
  std::vector<int> rgs(n, 0);
  while (true) {
    const int blocks = *std::max_element(rgs.begin(), rgs.end()) + 1;
    std::vector<LatticeIndex> shape(blocks);
    for (int i = 0; i < n; ++i) (i < p ? shape[rgs[i]].p : shape[rgs[i]].q)++;
    std::sort(shape.begin(), shape.end(), [](auto a, auto b) { return b < a; });
    ++out[shape];
    // Next restricted growth string.
    int i = n - 1;
    for (; i > 0; --i) {
      const int prefix_max = *std::max_element(rgs.begin(), rgs.begin() + i);
      if (rgs[i] <= prefix_max) {
        ++rgs[i];
        std::fill(rgs.begin() + i + 1, rgs.end(), 0);
        break;
      }
    }
    if (i == 0) break;
  }
  return out;
}

const long long kBell[] = {1, 1, 2, 5, 15, 52};

NonlinearitySeries two_region_series(const Mesh& m, int order) {
  NonlinearitySeries s(m.num_triangles(), order);
  for (int k = 2; k <= order; ++k) {
    std::vector<double> v(m.num_triangles());
    for (std::size_t t = 0; t < m.num_triangles(); ++t) {
      const Point c = m.barycenter(t);
      v[t] = (std::hypot(c.x - 0.2, c.y) < 0.4 ? 1.0 : -0.5) * (1.0 + 0.3 * k);
    }
    s = s.with_coefficient(k, v);
  }
  return s;
}

}  // namespace

TEST_CASE("chain-rule term counts match brute-force set partitions") {
  for (int n = 1; n <= 5; ++n)
    for (int p = 0; p <= n; ++p) {
      const auto terms = enumerate_chain_rule_terms(p, n - p, true);
      const auto brute = brute_force_partitions(p, n - p);
      CHECK(terms.size() == brute.size());
      long long total = 0;
      for (const auto& t : terms) {
        CHECK(t.count > 0);
        CHECK(brute.at(t.blocks) == t.count);
        int order = 0;
        for (const auto& b : t.blocks) order += b.order();
        CHECK(order == n);
        total += t.count;
      }
      CHECK(total == kBell[n]);
    }
}

TEST_CASE("single-block terms are never produced") {
  for (int n = 2; n <= 6; ++n)
    for (int p = 0; p <= n; ++p) {
      const auto& terms = chain_rule_terms(p, n - p);
      CHECK(terms.size() + 1 == enumerate_chain_rule_terms(p, n - p, true).size());
      for (const auto& t : terms) CHECK(t.j() >= 2);
    }
}

TEST_CASE("central difference weights") {
  const auto w1 = central_difference_weights(1);
  CHECK(w1.size() == 3);
  CHECK(w1[0] == doctest::Approx(-0.5));
  CHECK(w1[2] == doctest::Approx(0.5));
  const auto w2 = central_difference_weights(2);
  CHECK(w2[0] == doctest::Approx(1.0));
  CHECK(w2[1] == doctest::Approx(-2.0));
  for (int order = 1; order <= 4; ++order) {
    // Exact on polynomials of degree order+1.
    const auto w = central_difference_weights(order);
    const int r = static_cast<int>(w.size()) / 2;
    for (int deg = 0; deg <= order + 1; ++deg) {
      double s = 0.0;
      for (int j = -r; j <= r; ++j) s += w[j + r] * std::pow(j, deg);
      const double expect = deg == order ? std::tgamma(order + 1.0) : 0.0;
      CHECK(s == doctest::Approx(expect).epsilon(1e-10).scale(1.0));
    }
  }
}

TEST_CASE("first linearization") {
  const Mesh& m = fixtures::disk(0.1);
  const auto sigma = fixtures::unit_sigma(m);
  const BoundaryData fx = BoundaryData::from_function(m, [](Point p) { return p.x; });
  const NodalField u = first_linearization(m, sigma, fx);
  for (std::size_t v = 0; v < m.num_vertices(); ++v) CHECK(u[v] == doctest::Approx(m.vertices()[v].x));
  CHECK(first_linearization(m, sigma, BoundaryData::zeros(m)).cwiseAbs().maxCoeff() == 0.0);

  const auto series = fixtures::constant_series(m, 2, 2, 1.0);
  const BoundaryData f = trig_trace(m, 2, false, 1.0) + fx;
  const double d = 1e-3;
  const NodalField plus = solve_semilinear(m, sigma, series, f.scaled(d)).first;
  const NodalField minus = solve_semilinear(m, sigma, series, f.scaled(-d)).first;
  CHECK(rel_l2(m, (plus - minus) / (2 * d), first_linearization(m, sigma, f)) <= 1e-4);
}

TEST_CASE("chain-rule sources") {
  const Mesh& m = fixtures::half_disk_gamma(0.15);
  const auto sigma = fixtures::unit_sigma(m);
  const auto series = two_region_series(m, 3);
  const BoundaryData f1 = window_trace(m, 1.0), f2 = trig_trace(m, 1, false, 1.0);
  const DerivativeLattice lat = build_lattice(m, sigma, series, f1, f2, 3);
  const auto q = Quadrature::Interior3;
  auto at = [&](int p, int qq) { return interpolate(m, lat.at(p, qq), q).values; };

  const auto s20 = chain_rule_source(m, series, lat, 2, 0).values;
  const auto s21 = chain_rule_source(m, series, lat, 2, 1).values;
  const auto u10 = at(1, 0), u01 = at(0, 1), u20 = at(2, 0), u11 = at(1, 1);
  for (std::size_t t = 0; t < m.num_triangles(); ++t) {
    const double a2 = series.coefficient(t, 2), a3 = series.coefficient(t, 3);
    for (int k = 0; k < 3; ++k) {
      const auto i = static_cast<Eigen::Index>(t);
      CHECK(s20(i, k) == doctest::Approx(a2 * u10(i, k) * u10(i, k)));
      CHECK(s21(i, k) == doctest::Approx(a3 * u10(i, k) * u10(i, k) * u01(i, k) +
                                         a2 * (u20(i, k) * u01(i, k) + 2.0 * u11(i, k) * u10(i, k))));
    }
  }

  const NonlinearitySeries zero(m.num_triangles(), 4);
  const DerivativeLattice zl = build_lattice(m, sigma, zero, f1, f2, 4);
  for (const auto& [idx, u] : zl.entries())
    if (idx.order() >= 2) CHECK(u.cwiseAbs().maxCoeff() == 0.0);
  CHECK(chain_rule_source(m, zero, zl, 1, 3).values.cwiseAbs().maxCoeff() == 0.0);

  DerivativeLattice partial(f1, f2);
  partial.insert(1, 0, lat.at(1, 0));
  CHECK_THROWS_AS(chain_rule_source(m, series, partial, 1, 1), Error);
}

TEST_CASE("chain-rule source matches finite differences of a(x, S(t1 f1 + t2 f2))") {
  const Mesh& m = fixtures::half_disk_gamma(0.15);
  const auto sigma = fixtures::unit_sigma(m);
  const auto series = two_region_series(m, 3);
  const BoundaryData f1 = window_trace(m, 1.0), f2 = trig_trace(m, 1, true, 1.0);
  const DerivativeLattice lat = build_lattice(m, sigma, series, f1, f2, 3);
  FdOptions fd;
  const double s = fd.step;
  auto a_of = [&](int i, int j) {
    const NodalField u = solve_semilinear(m, sigma, series, (i * s) * f1 + (j * s) * f2, fd.newton).first;
    return nonlinearity_at_quadrature(m, series, u, Quadrature::Interior3).values;
  };
  const auto w2 = central_difference_weights(2), w1 = central_difference_weights(1);
  Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor> fd21 = Eigen::MatrixXd::Zero(m.num_triangles(), 3);
  for (int i = -1; i <= 1; ++i)
    for (int j = -1; j <= 1; ++j)
      if (w2[i + 1] * w1[j + 1] != 0.0) fd21 += w2[i + 1] * w1[j + 1] * a_of(i, j);
  fd21 /= s * s * s;
  const auto exact = chain_rule_source(m, series, lat, 2, 1).values;
  CHECK((fd21 - exact).norm() / exact.norm() <= 1e-2);
}

TEST_CASE("lattice against second differences and symmetry") {
  const Mesh& m = fixtures::disk(0.1);
  const auto sigma = fixtures::unit_sigma(m);
  const auto series = fixtures::constant_series(m, 2, 2, 1.0);
  const BoundaryData f1 = trig_trace(m, 1, false, 1.0), f2 = bump_trace(m, 1.0, 1.2, 1.0);
  const DerivativeLattice lat = build_lattice(m, sigma, series, f1, f2, 2);
  const double d = 1e-2;
  const FdOptions fd;
  const NodalField plus = solve_semilinear(m, sigma, series, f1.scaled(d), fd.newton).first;
  const NodalField minus = solve_semilinear(m, sigma, series, f1.scaled(-d), fd.newton).first;
  CHECK(rel_l2(m, (plus + minus) / (d * d), lat.at(2, 0)) <= 1e-2);

  const DerivativeLattice swapped = build_lattice(m, sigma, series, f2, f1, 2);
  CHECK((swapped.at(1, 1) - lat.at(1, 1)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((swapped.at(0, 2) - lat.at(2, 0)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(lat.max_order() == 2);
  // Higher-order entries carry zero boundary data.
  for (std::size_t v = 0; v < m.num_vertices(); ++v)
    if (m.is_constrained(v)) CHECK(lat.at(1, 1)[v] == 0.0);
}

TEST_CASE("DN derivatives: linear case, degenerate data, multilinearity") {
  const Mesh& m = fixtures::half_disk_gamma(0.12);
  const auto sigma = fixtures::unit_sigma(m);
  const NonlinearitySeries zero(m.num_triangles(), 3);
  const BoundaryData f1 = trig_trace(m, 2, false, 1.0), f2 = window_trace(m, 1.0);
  const DerivativeLattice zl = build_lattice(m, sigma, zero, f1, f2, 1);
  const DNMeasurement d10 = dn_derivative(m, sigma, zero, zl, 1, 0);
  CHECK((d10.values - dn_measure(m, sigma, zero, zl.at(1, 0), f1).values).cwiseAbs().maxCoeff() < 1e-13);

  const auto series = two_region_series(m, 3);
  const DerivativeLattice dl = build_lattice(m, sigma, series, BoundaryData::zeros(m), f2, 3);
  for (auto [p, q] : {std::pair{1, 0}, {2, 0}, {1, 1}, {2, 1}})
    CHECK(dn_derivative(m, sigma, series, dl, p, q).values.cwiseAbs().maxCoeff() < 1e-14);

  const double lam = 1.7, mu = -0.6;
  const DerivativeLattice a = build_lattice(m, sigma, series, f1, f2, 3);
  const DerivativeLattice b = build_lattice(m, sigma, series, f1.scaled(lam), f2.scaled(mu), 3);
  const auto a20 = dn_derivative(m, sigma, series, a, 2, 0).values;
  const auto a21 = dn_derivative(m, sigma, series, a, 2, 1).values;
  CHECK(relative_discrepancy(dn_derivative(m, sigma, series, b, 2, 0).values, lam * lam * a20) < 1e-10);
  CHECK(relative_discrepancy(dn_derivative(m, sigma, series, b, 2, 1).values, lam * lam * mu * a21) < 1e-10);
}

TEST_CASE("finite-difference oracle") {
  const Mesh& m = fixtures::half_disk_gamma(0.15);
  const auto sigma = fixtures::unit_sigma(m);
  const BoundaryData f1 = window_trace(m, 1.0), f2 = trig_trace(m, 1, false, 1.0);

  const NonlinearitySeries zero(m.num_triangles(), 2);
  const DerivativeLattice zl = build_lattice(m, sigma, zero, f1, f2, 1);
  CHECK(relative_discrepancy(fd_dn_derivative(m, sigma, zero, f1, f2, 1, 0).values,
                             dn_measure(m, sigma, zero, zl.at(1, 0), f1).values) < 1e-10);

  const auto series = two_region_series(m, 2);
  const DerivativeLattice lat = build_lattice(m, sigma, series, f1, f2, 2);
  const auto exact = dn_derivative(m, sigma, series, lat, 2, 0).values;
  FdOptions coarse;
  coarse.step = 4e-2;
  FdOptions fine = coarse;
  fine.step = 2e-2;
  const double e1 = relative_discrepancy(exact, fd_dn_derivative(m, sigma, series, f1, f2, 2, 0, coarse).values);
  const double e2 = relative_discrepancy(exact, fd_dn_derivative(m, sigma, series, f1, f2, 2, 0, fine).values);
  CHECK(e2 <= 1e-2);
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.15));
}

TEST_CASE("oracle equivalence up to order 4 on a coarse mesh") {
  const Mesh& m = fixtures::half_disk_gamma(0.2);
  const auto sigma = fixtures::unit_sigma(m);
  CounterRng rng(42, 7);
  for (int trial = 0; trial < 2; ++trial) {
    const int order = 4;
    NonlinearitySeries series(m.num_triangles(), order);
    for (int k = 2; k <= order; ++k) {
      const double inner = rng.normal(), outer = rng.normal();
      std::vector<double> v(m.num_triangles());
      for (std::size_t t = 0; t < m.num_triangles(); ++t) v[t] = m.barycenter(t).y > 0.3 ? inner : outer;
      series = series.with_coefficient(k, v);
    }
    const BoundaryData f1 = random_trace(m, rng, 3, 1.0), f2 = random_trace(m, rng, 3, 1.0);
    const DerivativeLattice lat = build_lattice(m, sigma, series, f1, f2, 4);
    for (int n = 1; n <= 4; ++n)
      for (int p = 0; p <= n; ++p) {
        const auto exact = dn_derivative(m, sigma, series, lat, p, n - p).values;
        const auto approx = fd_dn_derivative(m, sigma, series, f1, f2, p, n - p).values;
        CHECK(relative_discrepancy(exact, approx) <= 1e-2);
      }
  }
}

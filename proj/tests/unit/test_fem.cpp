#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "semirec/error.hpp"
#include "semirec/traces.hpp"

using namespace semirec;
using fixtures::kPi;

namespace {

BoundaryData trace_of(const Mesh& m, double (*fn)(double, double)) {
  return BoundaryData::from_function(m, [fn](Point p) { return fn(p.x, p.y); });
}

double sup(const Eigen::VectorXd& v) { return v.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("reference triangle stiffness") {
  const Mesh m({{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}}, {{0, 1, 2}},
               {{{0, 1}, EdgeTag::OuterRest}, {{1, 2}, EdgeTag::OuterRest}, {{2, 0}, EdgeTag::OuterRest}});
  const Eigen::MatrixXd k(assemble_stiffness(m, PiecewiseCoefficient::constant(1, 1.0)));
  Eigen::Matrix3d expected;
  expected << 2, -1, -1, -1, 1, 0, -1, 0, 1;
  expected *= 0.5;
  CHECK((k - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("stiffness is linear in sigma, symmetric, and annihilates constants") {
  const Mesh& m = fixtures::disk(0.2);
  std::vector<double> sv(m.num_triangles());
  for (std::size_t t = 0; t < m.num_triangles(); ++t) sv[t] = 1.0 + 0.5 * std::sin(static_cast<double>(t));
  const PiecewiseCoefficient sigma(sv);
  const Eigen::SparseMatrix<double> k1 = assemble_stiffness(m, sigma);
  const Eigen::SparseMatrix<double> k2 = assemble_stiffness(m, sigma.scaled(2.0));
  CHECK(Eigen::MatrixXd(k2 - 2.0 * k1).cwiseAbs().maxCoeff() < 1e-13);
  CHECK(Eigen::MatrixXd(k1 - Eigen::SparseMatrix<double>(k1.transpose())).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(sup(k1 * Eigen::VectorXd::Ones(k1.cols())) < 1e-12);
  CHECK_THROWS_AS(assemble_stiffness(m, PiecewiseCoefficient::constant(3, 1.0)), Error);
}

TEST_CASE("P1 reproduces linear harmonics and constants") {
  const Mesh& m = fixtures::disk(0.15);
  const auto sigma = fixtures::unit_sigma(m);
  const NodalField u = solve_linear(m, sigma, QuadratureField::zeros(m.num_triangles()),
                                    trace_of(m, [](double x, double) { return x; }));
  for (std::size_t v = 0; v < m.num_vertices(); ++v) CHECK(u[v] == doctest::Approx(m.vertices()[v].x).epsilon(1e-10));
  const NodalField c = LinearSolver(m, sigma).solve(BoundaryData(Eigen::VectorXd::Constant(m.gamma_nodes().size(), 0.7)));
  CHECK(sup(c.array() - 0.7) < 1e-11);
}

TEST_CASE("manufactured solution converges at second order") {
  std::vector<double> errs;
  for (double h : {0.2, 0.1, 0.05}) {
    const Mesh& m = fixtures::disk(h);
    const auto source = QuadratureField::per_triangle(std::vector<double>(m.num_triangles(), -4.0));
    const NodalField u = solve_linear(m, fixtures::unit_sigma(m), source,
                                      trace_of(m, [](double x, double y) { return x * x + y * y; }));
    errs.push_back(l2_error(m, u, [](Point p) { return p.x * p.x + p.y * p.y; }));
  }
  CHECK(errs[0] / errs[1] > 3.0);
  CHECK(errs[1] / errs[2] > 3.0);
}

TEST_CASE("Newton on the linear problem and with zero data") {
  const Mesh& m = fixtures::disk(0.15);
  const auto sigma = fixtures::unit_sigma(m);
  const BoundaryData f = trace_of(m, [](double x, double y) { return 0.05 * (x + y * y); });
  const auto [u, rep] = solve_semilinear(m, sigma, NonlinearitySeries(m.num_triangles(), 3), f);
  CHECK(rep.converged);
  CHECK(rep.iterations <= 1);
  CHECK(sup(u - LinearSolver(m, sigma).solve(f)) < 1e-12);

  const auto [z, zrep] = solve_semilinear(m, sigma, fixtures::constant_series(m, 2, 2, 1.0), BoundaryData::zeros(m));
  CHECK(zrep.converged);
  CHECK(sup(z) == 0.0);
}

TEST_CASE("nonlinear correction is quadratic in the data") {
  const Mesh& m = fixtures::disk(0.1);
  const auto sigma = fixtures::unit_sigma(m);
  const auto series = fixtures::constant_series(m, 2, 2, 1.0);
  const LinearSolver lin(m, sigma);
  double diff[2];
  for (int i = 0; i < 2; ++i) {
    const double amp = 0.05 / (1 << i);
    const BoundaryData f = trace_of(m, [](double x, double) { return x; }).scaled(amp);
    const auto [u, rep] = solve_semilinear(m, sigma, series, f);
    CHECK(rep.converged);
    for (std::size_t k = 1; k < rep.residual_norms.size(); ++k)
      CHECK(rep.residual_norms[k] < rep.residual_norms[k - 1]);
    diff[i] = sup(u - lin.solve(f));
  }
  CHECK(diff[0] / diff[1] == doctest::Approx(4.0).epsilon(0.02));
}

TEST_CASE("Newton rejects large data and diverging iterations") {
  const Mesh& m = fixtures::disk(0.2);
  const auto sigma = fixtures::unit_sigma(m);
  const BoundaryData big(Eigen::VectorXd::Constant(m.gamma_nodes().size(), 0.5));
  try {
    solve_semilinear(m, sigma, fixtures::constant_series(m, 2, 2, 1.0), big);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OutsideSmallDataRegime);
  }
  NewtonOptions opts;
  opts.small_data_threshold = 1e9;
  opts.max_iterations = 40;
  // a(y) = -500 y^2 / 2 with data of size 10 has no nearby solution.
  const BoundaryData huge(Eigen::VectorXd::Constant(m.gamma_nodes().size(), 10.0));
  try {
    solve_semilinear(m, sigma, fixtures::constant_series(m, 2, 2, -500.0), huge, opts);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK((e.code() == ErrorCode::NewtonDiverged || e.code() == ErrorCode::MaxIterations));
  }
}

TEST_CASE("DN measurement: energy pairing, scaling, zero") {
  const Mesh& m = fixtures::disk(0.05);
  const auto sigma = fixtures::unit_sigma(m);
  const NonlinearitySeries zero(m.num_triangles(), 2);
  const BoundaryData fx = trace_of(m, [](double x, double) { return x; });
  const NodalField u = LinearSolver(m, sigma).solve(fx);
  const DNMeasurement d = dn_measure(m, sigma, zero, u, fx);
  CHECK(std::abs(d.pair(fx) - kPi) / kPi < 0.01);

  const NodalField u2 = LinearSolver(m, sigma.scaled(2.0)).solve(fx);
  const DNMeasurement d2 = dn_measure(m, sigma.scaled(2.0), zero, u2, fx);
  CHECK(sup(d2.values - 2.0 * d.values) < 1e-12);

  const DNMeasurement z = dn_measure(m, sigma, zero, NodalField::Zero(m.num_vertices()), BoundaryData::zeros(m));
  CHECK(sup(z.values) == 0.0);

  CHECK_THROWS_AS(dn_measure(m, sigma, zero, NodalField::Ones(m.num_vertices()), fx), Error);
}

TEST_CASE("energy identity on random data") {
  const Mesh& m = fixtures::half_disk_gamma(0.1);
  std::vector<double> sv(m.num_triangles());
  for (std::size_t t = 0; t < m.num_triangles(); ++t) sv[t] = m.barycenter(t).x > 0 ? 2.0 : 0.5;
  const PiecewiseCoefficient sigma(sv);
  const LinearSolver lin(m, sigma);
  const Eigen::SparseMatrix<double> k = assemble_stiffness(m, sigma);
  CounterRng rng(5, 0);
  for (int i = 0; i < 10; ++i) {
    const BoundaryData f = random_trace(m, rng, 4, 1.0);
    const NodalField u = lin.solve(f);
    const double pairing = dn_measure(m, sigma, NonlinearitySeries(m.num_triangles(), 2), u, f).pair(f);
    const double energy = u.dot(k * u);
    CHECK(pairing == doctest::Approx(energy).epsilon(1e-9));
    CHECK(pairing > 0.0);
    CHECK(pairing >= 0.5 * u.dot(assemble_stiffness(m, fixtures::unit_sigma(m)) * u) * (1 - 1e-12));
  }
}

TEST_CASE("DN measurement does not depend on the extension") {
  const Mesh& m = fixtures::half_disk_gamma(0.1);
  const auto sigma = fixtures::unit_sigma(m);
  const auto series = fixtures::constant_series(m, 3, 2, 1.0).with_coefficient(3, std::vector<double>(m.num_triangles(), -2.0));
  const BoundaryData f = window_trace(m, 0.05);
  const auto [u, rep] = solve_semilinear(m, sigma, series, f);
  const DNMeasurement base = dn_measure(m, sigma, series, u, f);
  const auto ng = static_cast<Eigen::Index>(m.gamma_nodes().size());
  Eigen::MatrixXd ext = Eigen::MatrixXd::Zero(m.num_vertices(), ng);
  std::mt19937 gen(3);
  std::uniform_real_distribution<double> junk(-1.0, 1.0);
  for (Eigen::Index i = 0; i < ng; ++i) {
    ext(m.gamma_nodes()[i], i) = 1.0;
    for (std::size_t v = 0; v < m.num_vertices(); ++v)
      if (!m.is_constrained(v)) ext(static_cast<Eigen::Index>(v), i) = junk(gen);
  }
  const DNMeasurement other = dn_measure_with_extensions(m, sigma, series, u, ext);
  CHECK(sup(other.values - base.values) < 1e-8);
}

TEST_CASE("cavity nodes carry zero and the maximum principle holds") {
  const Mesh m = tag_gamma(build_disk_mesh(1.0, Disk{{0.0, 0.0}, 0.3}, 0.1), {0.0, kPi});
  const auto sigma = fixtures::unit_sigma(m);
  const BoundaryData psi = window_trace(m, 0.05);
  const auto [u, rep] = solve_semilinear(m, sigma, fixtures::constant_series(m, 2, 2, 1.0), psi);
  const NodalField lin = LinearSolver(m, sigma).solve(psi);
  for (std::size_t v = 0; v < m.num_vertices(); ++v) {
    if (m.node_tags()[v] == NodeTag::Cavity) {
      CHECK(u[v] == 0.0);
      CHECK(lin[v] == 0.0);
    }
    if (!m.is_constrained(v)) CHECK(lin[v] > 0.0);
    CHECK(lin[v] >= -1e-14);
  }
}

TEST_CASE("quadrature rules") {
  for (Quadrature q : {Quadrature::Interior3, Quadrature::Vertex}) {
    const auto& r = quadrature_rule(q);
    double w = 0.0;
    for (int k = 0; k < 3; ++k) {
      w += r.weights[k];
      CHECK(r.barycentric[k][0] + r.barycentric[k][1] + r.barycentric[k][2] == doctest::Approx(1.0));
    }
    CHECK(w == doctest::Approx(1.0));
  }
  // Interior3 integrates x^2 exactly on each triangle; sum against the P1 mass.
  const Mesh& m = fixtures::disk(0.2);
  NodalField x(m.num_vertices());
  for (std::size_t v = 0; v < m.num_vertices(); ++v) x[v] = m.vertices()[v].x;
  const QuadratureField xq = interpolate(m, x, Quadrature::Interior3);
  QuadratureField x2 = xq;
  x2.values = xq.values.cwiseProduct(xq.values);
  CHECK(load_vector(m, x2, Quadrature::Interior3).sum() == doctest::Approx(l2_norm_squared(m, x)).epsilon(1e-13));
}

#include "semirec/fem.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <string>

#include "semirec/error.hpp"

namespace semirec {

namespace {

constexpr double kLinearResidualTolerance = 1e-10;

using Triplets = std::vector<Eigen::Triplet<double>>;

double vector_sup_norm(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

}  // namespace

const QuadratureRule& quadrature_rule(Quadrature q) {
  static const QuadratureRule interior{{{{2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0},
                                         {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0},
                                         {1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0}}},
                                       {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}};
  static const QuadratureRule vertex{{{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}},
                                     {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}};
  return q == Quadrature::Vertex ? vertex : interior;
}

QuadratureField QuadratureField::zeros(std::size_t num_triangles) {
  QuadratureField f;
  f.values.setZero(static_cast<Eigen::Index>(num_triangles), 3);
  return f;
}

QuadratureField QuadratureField::per_triangle(const std::vector<double>& values) {
  QuadratureField f;
  f.values.resize(static_cast<Eigen::Index>(values.size()), 3);
  for (std::size_t t = 0; t < values.size(); ++t) f.values.row(static_cast<Eigen::Index>(t)).setConstant(values[t]);
  return f;
}

QuadratureField interpolate(const Mesh& mesh, const NodalField& u, Quadrature q) {
  if (static_cast<std::size_t>(u.size()) != mesh.num_vertices())
    throw Error(ErrorCode::DimensionMismatch, "nodal field length differs from vertex count");
  const auto& rule = quadrature_rule(q);
  QuadratureField f = QuadratureField::zeros(mesh.num_triangles());
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles()[t];
    for (int k = 0; k < 3; ++k)
      f.values(static_cast<Eigen::Index>(t), k) = rule.barycentric[k][0] * u[tri[0]] +
                                                  rule.barycentric[k][1] * u[tri[1]] +
                                                  rule.barycentric[k][2] * u[tri[2]];
  }
  return f;
}

Eigen::VectorXd load_vector(const Mesh& mesh, const QuadratureField& source, Quadrature q) {
  if (source.num_triangles() != mesh.num_triangles())
    throw Error(ErrorCode::DimensionMismatch, "source field size differs from triangle count");
  const auto& rule = quadrature_rule(q);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.num_vertices()));
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles()[t];
    const double area = mesh.area(t);
    for (int k = 0; k < 3; ++k) {
      const double s = area * rule.weights[k] * source.values(static_cast<Eigen::Index>(t), k);
      for (int i = 0; i < 3; ++i) b[tri[i]] += s * rule.barycentric[k][i];
    }
  }
  return b;
}

QuadratureField nonlinearity_at_quadrature(const Mesh& mesh, const NonlinearitySeries& series, const NodalField& u,
                                           Quadrature q, int derivative) {
  if (series.num_triangles() != mesh.num_triangles())
    throw Error(ErrorCode::DimensionMismatch, "series size differs from triangle count");
  QuadratureField uq = interpolate(mesh, u, q);
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto coeffs = shifted_coefficients(series, t, std::min(derivative, series.order() + 1));
    for (int k = 0; k < 3; ++k) {
      auto& v = uq.values(static_cast<Eigen::Index>(t), k);
      v = derivative > series.order() ? 0.0 : eval_power_series(coeffs, v);
    }
  }
  return uq;
}

BoundaryData::BoundaryData(Eigen::VectorXd values) : values_(std::move(values)), sup_norm_(vector_sup_norm(values_)) {}

BoundaryData BoundaryData::zeros(const Mesh& mesh) {
  return BoundaryData(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.gamma_nodes().size())));
}

BoundaryData BoundaryData::from_function(const Mesh& mesh, const std::function<double(Point)>& fn) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(mesh.gamma_nodes().size()));
  for (std::size_t i = 0; i < mesh.gamma_nodes().size(); ++i)
    v[static_cast<Eigen::Index>(i)] = fn(mesh.vertices()[mesh.gamma_nodes()[i]]);
  return BoundaryData(std::move(v));
}

BoundaryData operator+(const BoundaryData& a, const BoundaryData& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "boundary data sizes differ");
  return BoundaryData(a.values_ + b.values_);
}

NodalField BoundaryData::to_nodal(const Mesh& mesh) const {
  if (size() != mesh.gamma_nodes().size())
    throw Error(ErrorCode::DimensionMismatch, "boundary data length differs from Gamma node count");
  NodalField u = NodalField::Zero(static_cast<Eigen::Index>(mesh.num_vertices()));
  for (std::size_t i = 0; i < size(); ++i) u[mesh.gamma_nodes()[i]] = values_[static_cast<Eigen::Index>(i)];
  return u;
}

double DNMeasurement::pair(const BoundaryData& g) const {
  if (static_cast<std::size_t>(values.size()) != g.size())
    throw Error(ErrorCode::DimensionMismatch, "measurement and boundary data sizes differ");
  return values.dot(g.values());
}

Eigen::Matrix<double, 3, 2> hat_gradients(const Mesh& mesh, std::size_t t) {
  const auto& tri = mesh.triangles()[t];
  const Point p0 = mesh.vertices()[tri[0]], p1 = mesh.vertices()[tri[1]], p2 = mesh.vertices()[tri[2]];
  const double two_area = 2.0 * mesh.area(t);
  Eigen::Matrix<double, 3, 2> g;
  g << p1.y - p2.y, p2.x - p1.x,
       p2.y - p0.y, p0.x - p2.x,
       p0.y - p1.y, p1.x - p0.x;
  return g / two_area;
}

Eigen::SparseMatrix<double> assemble_stiffness(const Mesh& mesh, const PiecewiseCoefficient& sigma) {
  if (sigma.size() != mesh.num_triangles())
    throw Error(ErrorCode::DimensionMismatch, "sigma has " + std::to_string(sigma.size()) + " values for " +
                                                  std::to_string(mesh.num_triangles()) + " triangles");
  Triplets trips;
  trips.reserve(9 * mesh.num_triangles());
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto g = hat_gradients(mesh, t);
    const Eigen::Matrix3d local = sigma[t] * mesh.area(t) * (g * g.transpose());
    const auto& tri = mesh.triangles()[t];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) trips.emplace_back(tri[i], tri[j], local(i, j));
  }
  const auto n = static_cast<Eigen::Index>(mesh.num_vertices());
  Eigen::SparseMatrix<double> k(n, n);
  k.setFromTriplets(trips.begin(), trips.end());
  return k;
}

LinearSolver::LinearSolver(const Mesh& mesh, const PiecewiseCoefficient& sigma, Quadrature q)
    : mesh_(&mesh), sigma_(sigma), quadrature_(q), stiffness_(assemble_stiffness(mesh, sigma)) {
  const std::size_t nv = mesh.num_vertices();
  free_index_.assign(nv, -1);
  std::vector<int> constrained_index(nv, -1);
  for (std::size_t v = 0; v < nv; ++v) {
    if (mesh.is_constrained(v)) {
      constrained_index[v] = static_cast<int>(constrained_nodes_.size());
      constrained_nodes_.push_back(static_cast<int>(v));
    } else {
      free_index_[v] = static_cast<int>(free_nodes_.size());
      free_nodes_.push_back(static_cast<int>(v));
    }
  }
  if (free_nodes_.empty()) throw Error(ErrorCode::InvalidArgument, "mesh has no interior nodes");

  Triplets ff, fc;
  for (int col = 0; col < stiffness_.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(stiffness_, col); it; ++it) {
      const int fi = free_index_[it.row()];
      if (fi < 0) continue;
      if (free_index_[it.col()] >= 0) ff.emplace_back(fi, free_index_[it.col()], it.value());
      else fc.emplace_back(fi, constrained_index[it.col()], it.value());
    }
  const auto nf = static_cast<Eigen::Index>(free_nodes_.size());
  k_ff_.resize(nf, nf);
  k_ff_.setFromTriplets(ff.begin(), ff.end());
  k_fc_.resize(nf, static_cast<Eigen::Index>(constrained_nodes_.size()));
  k_fc_.setFromTriplets(fc.begin(), fc.end());

  factor_ = std::make_shared<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
  factor_->compute(k_ff_);
  if (factor_->info() != Eigen::Success) factor_.reset();
}

Eigen::VectorXd LinearSolver::solve_free(const Eigen::VectorXd& rhs) const {
  const double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0) return Eigen::VectorXd::Zero(rhs.size());
  if (factor_) {
    Eigen::VectorXd x = factor_->solve(rhs);
    if (factor_->info() == Eigen::Success && (k_ff_ * x - rhs).norm() <= kLinearResidualTolerance * rhs_norm)
      return x;
  }
  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                           Eigen::DiagonalPreconditioner<double>>
      cg;
  cg.setTolerance(1e-13);
  cg.setMaxIterations(std::max<Eigen::Index>(1000, 20 * rhs.size()));
  cg.compute(k_ff_);
  Eigen::VectorXd x = cg.solve(rhs);
  if (cg.info() != Eigen::Success || (k_ff_ * x - rhs).norm() > kLinearResidualTolerance * rhs_norm)
    throw Error(ErrorCode::SolverBreakdown, "linear solve missed the 1e-10 relative residual contract");
  return x;
}

NodalField LinearSolver::solve(const BoundaryData& bdry) const {
  return solve_with_boundary(nullptr, bdry.to_nodal(*mesh_));
}

NodalField LinearSolver::solve(const QuadratureField& source, const BoundaryData& bdry) const {
  return solve_with_boundary(&source, bdry.to_nodal(*mesh_));
}

NodalField LinearSolver::solve_with_boundary(const QuadratureField* source, const NodalField& boundary) const {
  const auto nc = static_cast<Eigen::Index>(constrained_nodes_.size());
  Eigen::VectorXd uc(nc);
  for (Eigen::Index i = 0; i < nc; ++i) uc[i] = boundary[constrained_nodes_[i]];
  Eigen::VectorXd rhs = -(k_fc_ * uc);
  if (source) {
    const Eigen::VectorXd b = load_vector(*mesh_, *source, quadrature_);
    for (std::size_t i = 0; i < free_nodes_.size(); ++i) rhs[static_cast<Eigen::Index>(i)] += b[free_nodes_[i]];
  }
  const Eigen::VectorXd uf = solve_free(rhs);
  NodalField u(static_cast<Eigen::Index>(mesh_->num_vertices()));
  for (Eigen::Index i = 0; i < nc; ++i) u[constrained_nodes_[i]] = uc[i];
  for (std::size_t i = 0; i < free_nodes_.size(); ++i) u[free_nodes_[i]] = uf[static_cast<Eigen::Index>(i)];
  return u;
}

Eigen::VectorXd LinearSolver::weak_residual(const NodalField& u, const QuadratureField* source) const {
  Eigen::VectorXd r = stiffness_ * u;
  if (source) r += load_vector(*mesh_, *source, quadrature_);
  return r;
}

NodalField solve_linear(const Mesh& mesh, const PiecewiseCoefficient& sigma, const QuadratureField& source,
                        const BoundaryData& bdry, Quadrature q) {
  // Weak form int sigma grad v . grad phi = int source phi.
  return LinearSolver(mesh, sigma, q).solve(source, bdry);
}

std::pair<NodalField, NewtonReport> solve_semilinear(const Mesh& mesh, const PiecewiseCoefficient& sigma,
                                                     const NonlinearitySeries& series, const BoundaryData& f,
                                                     const NewtonOptions& opts) {
  if (f.sup_norm() > opts.small_data_threshold)
    throw Error(ErrorCode::OutsideSmallDataRegime,
                "sup norm of the data " + std::to_string(f.sup_norm()) + " exceeds the small-data threshold " +
                    std::to_string(opts.small_data_threshold));
  if (series.num_triangles() != mesh.num_triangles())
    throw Error(ErrorCode::DimensionMismatch, "series size differs from triangle count");

  const LinearSolver lin(mesh, sigma, opts.quadrature);
  NodalField u = lin.solve(f);
  NewtonReport report;

  const auto& free_nodes = lin.free_nodes();
  const auto& free_index = lin.free_index();
  const auto nf = static_cast<Eigen::Index>(free_nodes.size());
  const auto& rule = quadrature_rule(opts.quadrature);

  auto free_residual = [&](const NodalField& w) {
    const QuadratureField a = nonlinearity_at_quadrature(mesh, series, w, opts.quadrature, 0);
    const Eigen::VectorXd full = lin.weak_residual(w, &a);
    Eigen::VectorXd r(nf);
    for (Eigen::Index i = 0; i < nf; ++i) r[i] = full[free_nodes[i]];
    return r;
  };

  Eigen::VectorXd r = free_residual(u);
  double norm = r.norm();
  report.residual_norms.push_back(norm);
  int polish_left = opts.polish_iterations;
  bool reached = norm <= opts.tolerance;

  while (!reached || polish_left > 0) {
    if (reached) --polish_left;
    if (report.iterations >= opts.max_iterations) {
      if (reached) break;
      throw Error(ErrorCode::MaxIterations, "Newton did not reach residual " + std::to_string(opts.tolerance) +
                                                " in " + std::to_string(opts.max_iterations) + " iterations");
    }

    const QuadratureField da = nonlinearity_at_quadrature(mesh, series, u, opts.quadrature, 1);
    Triplets trips;
    trips.reserve(static_cast<std::size_t>(lin.free_block().nonZeros()) + 9 * mesh.num_triangles());
    for (int col = 0; col < lin.free_block().outerSize(); ++col)
      for (Eigen::SparseMatrix<double>::InnerIterator it(lin.free_block(), col); it; ++it)
        trips.emplace_back(it.row(), it.col(), it.value());
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
      const auto& tri = mesh.triangles()[t];
      for (int k = 0; k < 3; ++k) {
        const double s = mesh.area(t) * rule.weights[k] * da.values(static_cast<Eigen::Index>(t), k);
        if (s == 0.0) continue;
        for (int i = 0; i < 3; ++i) {
          const int fi = free_index[tri[i]];
          if (fi < 0) continue;
          for (int j = 0; j < 3; ++j) {
            const int fj = free_index[tri[j]];
            if (fj >= 0) trips.emplace_back(fi, fj, s * rule.barycentric[k][i] * rule.barycentric[k][j]);
          }
        }
      }
    }
    Eigen::SparseMatrix<double> jac(nf, nf);
    jac.setFromTriplets(trips.begin(), trips.end());

    Eigen::VectorXd du;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(jac);
    if (ldlt.info() == Eigen::Success) du = ldlt.solve(r);
    if (ldlt.info() != Eigen::Success || !du.allFinite() || (jac * du - r).norm() > 1e-8 * std::max(r.norm(), 1e-300)) {
      Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
      lu.compute(jac);
      if (lu.info() != Eigen::Success) throw Error(ErrorCode::NewtonDiverged, "singular Newton Jacobian");
      du = lu.solve(r);
    }
    for (Eigen::Index i = 0; i < nf; ++i) u[free_nodes[i]] -= du[i];
    report.step_norms.push_back(du.norm());
    ++report.iterations;

    r = free_residual(u);
    const double next = r.norm();
    report.residual_norms.push_back(next);
    if (!std::isfinite(next) || !u.allFinite())
      throw Error(ErrorCode::NewtonDiverged, "non-finite Newton iterate");
    if (!reached && next > norm)
      throw Error(ErrorCode::NewtonDiverged, "Newton residual increased from " + std::to_string(norm) + " to " +
                                                 std::to_string(next));
    if (reached && next > norm) {
      // Polishing at round-off level made things worse: undo.
      for (Eigen::Index i = 0; i < nf; ++i) u[free_nodes[i]] += du[i];
      report.residual_norms.back() = norm;
      break;
    }
    norm = next;
    reached = reached || norm <= opts.tolerance;
  }
  report.final_residual = norm;
  report.converged = true;
  return {std::move(u), std::move(report)};
}

DNMeasurement dn_measure(const Mesh& mesh, const PiecewiseCoefficient& sigma, const NonlinearitySeries& series,
                         const NodalField& u, const BoundaryData& f, Quadrature q, double residual_tolerance) {
  if (static_cast<std::size_t>(u.size()) != mesh.num_vertices())
    throw Error(ErrorCode::DimensionMismatch, "nodal field length differs from vertex count");
  const NodalField expected = f.to_nodal(mesh);
  const double scale = 1.0 + f.sup_norm();
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v)
    if (mesh.is_constrained(v) && std::abs(u[static_cast<Eigen::Index>(v)] - expected[static_cast<Eigen::Index>(v)]) > 1e-12 * scale)
      throw Error(ErrorCode::NotASolution, "field violates the Dirichlet condition at node " + std::to_string(v));

  const Eigen::SparseMatrix<double> k = assemble_stiffness(mesh, sigma);
  const QuadratureField a = nonlinearity_at_quadrature(mesh, series, u, q, 0);
  const Eigen::VectorXd full = k * u + load_vector(mesh, a, q);

  double interior = 0.0;
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v)
    if (!mesh.is_constrained(v)) interior += full[static_cast<Eigen::Index>(v)] * full[static_cast<Eigen::Index>(v)];
  interior = std::sqrt(interior);
  if (interior > residual_tolerance)
    throw Error(ErrorCode::NotASolution, "interior residual " + std::to_string(interior) + " exceeds tolerance");

  DNMeasurement m;
  m.values.resize(static_cast<Eigen::Index>(mesh.gamma_nodes().size()));
  for (std::size_t i = 0; i < mesh.gamma_nodes().size(); ++i) m.values[static_cast<Eigen::Index>(i)] = full[mesh.gamma_nodes()[i]];
  return m;
}

DNMeasurement dn_measure_with_extensions(const Mesh& mesh, const PiecewiseCoefficient& sigma,
                                         const NonlinearitySeries& series, const NodalField& u,
                                         const Eigen::MatrixXd& extensions, Quadrature q) {
  const auto ng = static_cast<Eigen::Index>(mesh.gamma_nodes().size());
  if (extensions.rows() != static_cast<Eigen::Index>(mesh.num_vertices()) || extensions.cols() != ng)
    throw Error(ErrorCode::DimensionMismatch, "extension matrix must be vertices x Gamma nodes");
  const Eigen::SparseMatrix<double> k = assemble_stiffness(mesh, sigma);
  const QuadratureField a = nonlinearity_at_quadrature(mesh, series, u, q, 0);
  const Eigen::VectorXd full = k * u + load_vector(mesh, a, q);
  DNMeasurement m;
  m.values = extensions.transpose() * full;
  return m;
}

double l2_error(const Mesh& mesh, const NodalField& u, const std::function<double(Point)>& exact) {
  // Degree-4 six-point rule.
  static constexpr double a1 = 0.445948490915965, w1 = 0.223381589678011;
  static constexpr double a2 = 0.091576213509771, w2 = 0.109951743655322;
  static const std::array<std::array<double, 4>, 6> pts{{{a1, a1, 1 - 2 * a1, w1},
                                                         {a1, 1 - 2 * a1, a1, w1},
                                                         {1 - 2 * a1, a1, a1, w1},
                                                         {a2, a2, 1 - 2 * a2, w2},
                                                         {a2, 1 - 2 * a2, a2, w2},
                                                         {1 - 2 * a2, a2, a2, w2}}};
  double sum = 0.0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles()[t];
    const Point p0 = mesh.vertices()[tri[0]], p1 = mesh.vertices()[tri[1]], p2 = mesh.vertices()[tri[2]];
    for (const auto& q : pts) {
      const Point x{q[0] * p0.x + q[1] * p1.x + q[2] * p2.x, q[0] * p0.y + q[1] * p1.y + q[2] * p2.y};
      const double uh = q[0] * u[tri[0]] + q[1] * u[tri[1]] + q[2] * u[tri[2]];
      const double e = uh - exact(x);
      sum += mesh.area(t) * q[3] * e * e;
    }
  }
  return std::sqrt(sum);
}

double l2_norm_squared(const Mesh& mesh, const NodalField& u, const std::vector<int>& triangles) {
  auto element = [&](std::size_t t) {
    const auto& tri = mesh.triangles()[t];
    const double a = u[tri[0]], b = u[tri[1]], c = u[tri[2]];
    // |T|/12 * v^T [[2,1,1],[1,2,1],[1,1,2]] v
    return mesh.area(t) / 12.0 * (2.0 * (a * a + b * b + c * c) + 2.0 * (a * b + b * c + a * c));
  };
  double s = 0.0;
  if (triangles.empty()) {
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) s += element(t);
  } else {
    for (int t : triangles) s += element(static_cast<std::size_t>(t));
  }
  return s;
}

}  // namespace semirec

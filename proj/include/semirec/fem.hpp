#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <array>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "semirec/coefficients.hpp"
#include "semirec/mesh.hpp"

namespace semirec {

/// One value per mesh vertex.
using NodalField = Eigen::VectorXd;

/// Three-point rules on triangles. Interior3 sits at barycentric (2/3,1/6,1/6)
/// and permutations (exact for quadratics); Vertex is the mass-lumped rule.
enum class Quadrature { Interior3, Vertex };

struct QuadratureRule {
  std::array<std::array<double, 3>, 3> barycentric;
  std::array<double, 3> weights;  // sum to 1, multiply by the triangle area
};

const QuadratureRule& quadrature_rule(Quadrature q);

/// Values at the three quadrature points of every triangle.
struct QuadratureField {
  Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor> values;

  static QuadratureField zeros(std::size_t num_triangles);
  static QuadratureField per_triangle(const std::vector<double>& values);
  std::size_t num_triangles() const { return static_cast<std::size_t>(values.rows()); }
};

/// P1 interpolation of a nodal field at the quadrature points.
QuadratureField interpolate(const Mesh& mesh, const NodalField& u, Quadrature q);

/// Load vector b_i = sum_T sum_q |T| w_q s(x_q) phi_i(x_q).
Eigen::VectorXd load_vector(const Mesh& mesh, const QuadratureField& source, Quadrature q);

/// Quadrature-point values of d^l/dy^l a(x, u(x)).
QuadratureField nonlinearity_at_quadrature(const Mesh& mesh, const NonlinearitySeries& series,
                                           const NodalField& u, Quadrature q, int derivative = 0);

/// Dirichlet data on the Gamma nodes, in Mesh::gamma_nodes() order. Every
/// other boundary node (OuterRest, Cavity) carries zero.
class BoundaryData {
 public:
  BoundaryData() = default;
  explicit BoundaryData(Eigen::VectorXd values);

  static BoundaryData zeros(const Mesh& mesh);
  /// Samples fn at the Gamma nodes.
  static BoundaryData from_function(const Mesh& mesh, const std::function<double(Point)>& fn);

  const Eigen::VectorXd& values() const { return values_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }
  double sup_norm() const { return sup_norm_; }

  BoundaryData scaled(double factor) const { return BoundaryData(values_ * factor); }
  friend BoundaryData operator+(const BoundaryData& a, const BoundaryData& b);
  friend BoundaryData operator*(double s, const BoundaryData& a) { return a.scaled(s); }

  /// Full nodal vector: data on Gamma nodes, zero elsewhere.
  NodalField to_nodal(const Mesh& mesh) const;

 private:
  Eigen::VectorXd values_;
  double sup_norm_ = 0.0;
};

/// Discrete flux functional on Gamma: component i is the weak-form flux
/// tested against the hat function of gamma_nodes()[i].
struct DNMeasurement {
  Eigen::VectorXd values;

  /// <measurement, g> as a finite sum over Gamma nodes.
  double pair(const BoundaryData& g) const;
};

/// Unit-coefficient P1 gradients of the three hat functions on triangle t (rows).
Eigen::Matrix<double, 3, 2> hat_gradients(const Mesh& mesh, std::size_t t);

/// Global stiffness matrix over all nodes: sum_T sigma_T int_T grad phi_i . grad phi_j.
Eigen::SparseMatrix<double> assemble_stiffness(const Mesh& mesh, const PiecewiseCoefficient& sigma);

/// Factorised Dirichlet problem -div(sigma grad v) = source with every
/// boundary node constrained. Immutable after construction; concurrent solves
/// are safe.
class LinearSolver {
 public:
  LinearSolver(const Mesh& mesh, const PiecewiseCoefficient& sigma, Quadrature q = Quadrature::Interior3);

  NodalField solve(const BoundaryData& bdry) const;
  NodalField solve(const QuadratureField& source, const BoundaryData& bdry) const;
  /// General form: `boundary` supplies values on constrained nodes (interior entries ignored).
  NodalField solve_with_boundary(const QuadratureField* source, const NodalField& boundary) const;

  const Mesh& mesh() const { return *mesh_; }
  const PiecewiseCoefficient& sigma() const { return sigma_; }
  Quadrature quadrature() const { return quadrature_; }
  const Eigen::SparseMatrix<double>& stiffness() const { return stiffness_; }
  const std::vector<int>& free_nodes() const { return free_nodes_; }
  const std::vector<int>& free_index() const { return free_index_; }
  const Eigen::SparseMatrix<double>& free_block() const { return k_ff_; }

  /// Weak residual K u + load(source) over all nodes.
  Eigen::VectorXd weak_residual(const NodalField& u, const QuadratureField* source) const;

 private:
  Eigen::VectorXd solve_free(const Eigen::VectorXd& rhs) const;

  const Mesh* mesh_;
  PiecewiseCoefficient sigma_;
  Quadrature quadrature_;
  Eigen::SparseMatrix<double> stiffness_;
  Eigen::SparseMatrix<double> k_ff_;
  Eigen::SparseMatrix<double> k_fc_;
  std::vector<int> free_nodes_;
  std::vector<int> free_index_;
  std::vector<int> constrained_nodes_;
  std::shared_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> factor_;
};

/// Solves -div(sigma grad v) = source, v = bdry on Gamma, v = 0 on the
/// remaining boundary nodes.
NodalField solve_linear(const Mesh& mesh, const PiecewiseCoefficient& sigma, const QuadratureField& source,
                        const BoundaryData& bdry, Quadrature q = Quadrature::Interior3);

struct NewtonOptions {
  int max_iterations = 25;
  double tolerance = 1e-10;             // on the Euclidean norm of the free-node residual
  double small_data_threshold = 0.1;    // sup norm bound on the Dirichlet data
  int polish_iterations = 0;            // extra Newton steps after reaching the tolerance
  Quadrature quadrature = Quadrature::Interior3;
};

struct NewtonReport {
  int iterations = 0;
  double final_residual = 0.0;
  std::vector<double> residual_norms;
  std::vector<double> step_norms;
  bool converged = false;
};

/// Newton's method for -div(sigma grad u) + a(x,u) = 0, u = f on Gamma,
/// u = 0 on the rest of the boundary (including any cavity), started from
/// the linear solution. Throws NewtonDiverged when the residual grows or
/// becomes non-finite and MaxIterations when the budget is exhausted.
std::pair<NodalField, NewtonReport> solve_semilinear(const Mesh& mesh, const PiecewiseCoefficient& sigma,
                                                     const NonlinearitySeries& series, const BoundaryData& f,
                                                     const NewtonOptions& opts = {});

/// Variational Neumann data of a discrete solution u of the semilinear
/// problem with data f. Throws NotASolution when the interior residual of u
/// exceeds `residual_tolerance` or u violates the boundary conditions.
DNMeasurement dn_measure(const Mesh& mesh, const PiecewiseCoefficient& sigma, const NonlinearitySeries& series,
                         const NodalField& u, const BoundaryData& f, Quadrature q = Quadrature::Interior3,
                         double residual_tolerance = 1e-8);

/// Same flux, tested against an arbitrary extension of each Gamma hat
/// function: extensions.col(i) must equal 1 at gamma_nodes()[i] and 0 at all
/// other boundary nodes.
DNMeasurement dn_measure_with_extensions(const Mesh& mesh, const PiecewiseCoefficient& sigma,
                                         const NonlinearitySeries& series, const NodalField& u,
                                         const Eigen::MatrixXd& extensions, Quadrature q = Quadrature::Interior3);

/// L2 norm of u - exact over the mesh, using a degree-4 quadrature.
double l2_error(const Mesh& mesh, const NodalField& u, const std::function<double(Point)>& exact);

/// Exact P1 integral of u^2 over the listed triangles (all when empty).
double l2_norm_squared(const Mesh& mesh, const NodalField& u, const std::vector<int>& triangles = {});

}  // namespace semirec

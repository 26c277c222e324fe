#include "semirec/localized.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "semirec/error.hpp"

namespace semirec {

namespace {

void check_regions(const Mesh& mesh, const RegionMask& d1, const RegionMask& d2) {
  if (d1.empty()) throw Error(ErrorCode::EmptyMask, "D1 has no triangles");
  for (int t : d1.triangles())
    if (d2.contains(static_cast<std::size_t>(t)))
      throw Error(ErrorCode::RegionsNotDisjoint, "D1 and D2 share triangle " + std::to_string(t));
  if (d2.empty()) return;

  std::vector<bool> outside(mesh.num_triangles(), true);
  for (int t : d2.triangles()) outside[t] = false;
  const auto [comp, count] = triangle_components(mesh, outside);
  if (count != 1) throw Error(ErrorCode::D2DisconnectsDomain, "the complement of D2 is not connected");

  for (int t : gamma_triangles(mesh))
    if (outside[t]) return;
  throw Error(ErrorCode::D2DisconnectsDomain, "D2 covers every Gamma edge");
}

}  // namespace

Eigen::MatrixXd boundary_mass_matrix(const Mesh& mesh) {
  const auto ng = static_cast<Eigen::Index>(mesh.gamma_nodes().size());
  Eigen::MatrixXd n = Eigen::MatrixXd::Zero(ng, ng);
  const auto& gi = mesh.gamma_index();
  for (const auto& e : mesh.boundary_edges()) {
    if (e.tag == EdgeTag::Cavity) continue;
    const Point a = mesh.vertices()[e.nodes[0]], b = mesh.vertices()[e.nodes[1]];
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        const int r = gi[e.nodes[i]], c = gi[e.nodes[j]];
        if (r >= 0 && c >= 0) n(r, c) += len / 6.0 * (i == j ? 2.0 : 1.0);
      }
  }
  return n;
}

Eigen::SparseMatrix<double> region_mass_matrix(const Mesh& mesh, const RegionMask& mask) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(9 * mask.size());
  for (int t : mask.triangles()) {
    const auto& tri = mesh.triangles()[t];
    const double a = mesh.area(static_cast<std::size_t>(t));
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) trips.emplace_back(tri[i], tri[j], a / 12.0 * (i == j ? 2.0 : 1.0));
  }
  const auto nv = static_cast<Eigen::Index>(mesh.num_vertices());
  Eigen::SparseMatrix<double> m(nv, nv);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

EnergyOperatorPair build_energy_operators(const Mesh& mesh, const PiecewiseCoefficient& sigma, const RegionMask& d1,
                                          const RegionMask& d2, Quadrature q) {
  check_regions(mesh, d1, d2);
  const LinearSolver lin(mesh, sigma, q);
  const auto ng = static_cast<Eigen::Index>(mesh.gamma_nodes().size());
  Eigen::MatrixXd v(static_cast<Eigen::Index>(mesh.num_vertices()), ng);
  for (Eigen::Index i = 0; i < ng; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(ng);
    e[i] = 1.0;
    v.col(i) = lin.solve(BoundaryData(std::move(e)));
  }
  auto gram = [&](const RegionMask& mask) {
    const Eigen::MatrixXd m = v.transpose() * (region_mass_matrix(mesh, mask) * v);
    return Eigen::MatrixXd(0.5 * (m + m.transpose()));
  };
  EnergyOperatorPair pair;
  pair.m1 = gram(d1);
  pair.m2 = d2.empty() ? Eigen::MatrixXd::Zero(ng, ng) : gram(d2);
  pair.boundary_mass = boundary_mass_matrix(mesh);
  pair.solutions = std::move(v);
  pair.d1 = d1;
  pair.d2 = d2;
  return pair;
}

PotentialSequence localized_potential_sequence(const EnergyOperatorPair& pair, int steps, double delta0) {
  if (steps < 2) throw Error(ErrorCode::InvalidArgument, "need at least two regularisation steps");
  if (!(delta0 > 0.0)) throw Error(ErrorCode::InvalidArgument, "initial regularisation must be positive");
  PotentialSequence seq;
  for (int k = 0; k < steps; ++k) {
    const double delta = delta0 * std::ldexp(1.0, -k);
    const Eigen::MatrixXd b = pair.m2 + delta * pair.boundary_mass;
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(pair.m1, b);
    if (ges.info() != Eigen::Success)
      throw Error(ErrorCode::EigensolverFailure, "generalized eigensolver failed at step " + std::to_string(k));
    const Eigen::Index last = ges.eigenvalues().size() - 1;
    const double lambda = ges.eigenvalues()[last];
    Eigen::VectorXd x = ges.eigenvectors().col(last);
    if (!(lambda > 0.0) || !x.allFinite())
      throw Error(ErrorCode::EigensolverFailure, "no positive leading eigenvalue at step " + std::to_string(k));

    const double target = std::sqrt(delta);
    const double current = pair.d2_empty() ? delta * x.dot(pair.boundary_mass * x) : x.dot(pair.m2 * x);
    if (!(current > 0.0)) throw Error(ErrorCode::EigensolverFailure, "leading eigenvector has zero norm");
    x *= std::sqrt(target / current);
    Eigen::Index imax = 0;
    x.cwiseAbs().maxCoeff(&imax);
    if (x[imax] < 0.0) x = -x;

    PotentialStep step;
    step.energy_d1 = x.dot(pair.m1 * x);
    step.energy_d2 = x.dot(pair.m2 * x);
    step.delta = delta;
    step.eigenvalue = lambda;
    step.rayleigh_quotient = step.energy_d1 / x.dot(b * x);
    step.phi = BoundaryData(std::move(x));
    seq.steps.push_back(std::move(step));
  }
  const auto& first = seq.steps.front();
  const auto& last = seq.steps.back();
  const bool grew = pair.d2_empty() ? last.energy_d1 > first.energy_d1 : last.ratio() > first.ratio();
  if (!grew) throw Error(ErrorCode::NoLocalization, "D1/D2 energy ratio does not grow along the sequence");
  return seq;
}

double energy_on_region(const Mesh& mesh, const NodalField& v, const RegionMask& mask) {
  return l2_norm_squared(mesh, v, mask.triangles());
}

}  // namespace semirec

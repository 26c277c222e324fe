#pragma once

#include <vector>

#include "semirec/fem.hpp"

namespace semirec {

/// Gram matrices of phi -> v_phi|_{D_j} over the Gamma-node coefficients,
/// where v_phi is the linear solution with data phi.
struct EnergyOperatorPair {
  Eigen::MatrixXd m1;
  Eigen::MatrixXd m2;
  /// P1 mass matrix of the outer boundary restricted to Gamma nodes.
  Eigen::MatrixXd boundary_mass;
  /// Column i: linear solution for the i-th Gamma hat function.
  Eigen::MatrixXd solutions;
  RegionMask d1;
  RegionMask d2;

  bool d2_empty() const { return d2.empty(); }
  /// Nodal solution for Gamma data phi.
  NodalField solution(const BoundaryData& phi) const { return solutions * phi.values(); }
};

/// P1 mass matrix of the outer boundary edges, over Gamma nodes.
Eigen::MatrixXd boundary_mass_matrix(const Mesh& mesh);

/// Element mass matrix sum over the mask (all vertices x all vertices).
Eigen::SparseMatrix<double> region_mass_matrix(const Mesh& mesh, const RegionMask& mask);

/// Checks the hypotheses on (D1, D2) and assembles the pair. D2 may be empty.
/// Errors: EmptyMask (D1 empty), RegionsNotDisjoint, D2DisconnectsDomain
/// (Omega minus D2 not connected or Gamma covered by D2).
EnergyOperatorPair build_energy_operators(const Mesh& mesh, const PiecewiseCoefficient& sigma, const RegionMask& d1,
                                          const RegionMask& d2, Quadrature q = Quadrature::Interior3);

struct PotentialStep {
  BoundaryData phi;
  double energy_d1 = 0.0;
  double energy_d2 = 0.0;
  double delta = 0.0;
  double eigenvalue = 0.0;
  /// phi' M1 phi / phi' (M2 + delta N) phi, equal to `eigenvalue` up to round-off.
  double rayleigh_quotient = 0.0;

  double ratio() const { return energy_d1 / energy_d2; }
};

struct PotentialSequence {
  std::vector<PotentialStep> steps;
};

/// For delta_k = delta0 2^-k, phi_k is the leading eigenvector of
/// M1 x = lambda (M2 + delta_k N) x, scaled so that phi' M2 phi = sqrt(delta_k)
/// (or delta_k phi' N phi = sqrt(delta_k) when D2 is empty). Throws
/// EigensolverFailure or NoLocalization (the D1/D2 energy ratio does not grow).
PotentialSequence localized_potential_sequence(const EnergyOperatorPair& pair, int steps, double delta0);

/// sum over the mask of int_T v^2 with the exact element mass matrix.
double energy_on_region(const Mesh& mesh, const NodalField& v, const RegionMask& mask);

}  // namespace semirec

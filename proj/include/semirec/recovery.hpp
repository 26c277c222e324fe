#pragma once

#include <optional>
#include <string>
#include <vector>

#include "semirec/linearization.hpp"
#include "semirec/localized.hpp"
#include "semirec/traces.hpp"

namespace semirec {

/// One DN-derivative observation: the (p,q) derivative of
/// t -> Lambda(t1 f1 + t2 f2) at 0.
struct Experiment {
  BoundaryData f1;
  BoundaryData f2;
  LatticeIndex order;
  DNMeasurement data;
};

struct MeasurementSet {
  std::vector<Experiment> experiments;
  double noise_level = 0.0;

  std::vector<Experiment> select(LatticeIndex order) const;
};

/// Noise-free DN derivatives of the given order for each data pair.
MeasurementSet simulate_measurements(const Mesh& mesh, const PiecewiseCoefficient& sigma,
                                     const NonlinearitySeries& series,
                                     const std::vector<std::pair<BoundaryData, BoundaryData>>& data, LatticeIndex order,
                                     Quadrature q = Quadrature::Interior3);

/// d_i -> d_i (1 + eta z_i) with z_i standard normal, i.i.d. over all components.
void add_relative_noise(MeasurementSet& set, double eta, CounterRng& rng);

/// Region indicator fields as stiffness matrices: K = sum_R sigma_R K_R.
std::vector<Eigen::SparseMatrix<double>> region_stiffness(const Mesh& mesh, const Partition& partition);

struct SigmaOptions {
  double sigma_min = 0.05;
  std::vector<double> initial;  // empty: all ones
  int max_iterations = 60;
  double step_tolerance = 1e-13;
};

struct SigmaRecovery {
  std::vector<double> values;
  double initial_misfit = 0.0;
  double misfit = 0.0;  // relative: ||sim - data|| / ||data|| over all pairings
  int iterations = 0;
  int rank = 0;
  double condition = 0.0;
};

/// Per-region conductivities from order-(1,0) data by projected
/// Gauss-Newton on the pairings <Lambda f_i, f_j>, i <= j. Errors:
/// InsufficientData (too few pairings or rank-deficient Jacobian),
/// MisfitNotReduced (no descent step from the initial guess).
SigmaRecovery recover_sigma_linearized(const Mesh& mesh, const Partition& partition, const MeasurementSet& data,
                                       const SigmaOptions& opts = {});

struct AmOptions {
  double lambda = 1e-8;  // Tikhonov weight relative to the mean diagonal of A'A
  int refine_iterations = 1;
  double max_condition = 1e12;
  Quadrature quadrature = Quadrature::Interior3;
};

struct AmRecovery {
  std::vector<double> values;
  double residual_before = 0.0;  // ||r|| with a_m = 0
  double residual_after = 0.0;   // ||r|| with the estimate
  double condition = 0.0;
  double lambda = 0.0;           // absolute Tikhonov weight used
  int equations = 0;
};

/// Stage m of the sequential recovery. `known` holds the coefficients of
/// order < m (anything at order >= m is ignored); `data` must contain
/// (2, m-2) experiments. Solves sum_R a_m(R) int_R u10^2 u01^(m-2) v_g = r_g
/// in the regularised least-squares sense.
AmRecovery recover_am_step(const Mesh& mesh, const PiecewiseCoefficient& sigma, const NonlinearitySeries& known, int m,
                           const Partition& partition, const MeasurementSet& data,
                           const std::vector<BoundaryData>& tests, const AmOptions& opts = {});

enum class CavityVerdict { None, Detected, Inconclusive };
std::string to_string(CavityVerdict v);

/// How candidate meshes are built during the cavity scan.
struct CavityModel {
  double outer_radius = 1.0;
  double h = 0.1;
  AngularArc gamma{0.0, 6.283185307179586};
  PiecewiseField sigma{1.0, {}};
  Quadrature quadrature = Quadrature::Interior3;

  Mesh mesh(std::optional<Disk> cavity) const;
};

struct CavityScan {
  std::vector<double> radii{0.15, 0.25, 0.35, 0.45};
  double grid_spacing = 0.2;
  bool refine = true;
  int starts = 4;  // best grid candidates refined by pattern search
  double detection_factor = 3.0;
  bool localize_when_none = false;
  /// Refit the sigma values on each candidate mesh (regions from the model's sigma layout).
  bool refit_sigma = false;
};

struct CandidateMisfit {
  Disk disk;
  double residual = 0.0;
};

struct CavityResult {
  CavityVerdict verdict = CavityVerdict::None;
  double stage1_residual = 0.0;
  double noise_floor = 0.0;
  std::optional<Disk> disk;
  double disk_residual = 0.0;
  std::vector<double> sigma;  // region values used for the reported disk
  std::vector<CandidateMisfit> landscape;
  int refinement_steps = 0;
};

/// Relative mismatch ||P_data - P_model|| / ||P_data|| of the pairing
/// matrices <Lambda f_i, f_j> for the order-(1,0) experiments.
double linearized_residual(const Mesh& mesh, const PiecewiseCoefficient& sigma, const MeasurementSet& data);

/// Stage 1 compares the data with the cavity-free model; stage 2 scans
/// candidate disks and refines the best one by pattern search.
CavityResult detect_cavity(const CavityModel& model, const MeasurementSet& data, const CavityScan& scan = {});

/// Triangles of `mesh` lying inside the detected disk (empty when none).
RegionMask cavity_estimate(const Mesh& mesh, const CavityResult& result);

enum class SignCase { I, II };

struct SignSplit {
  RegionMask d1;
  RegionMask d2;
  SignCase orientation = SignCase::I;
};

/// D1 and D2 for the comparison of two per-region fields: in case I,
/// a - b > tol on D1 and a >= b - tol outside D2 (case II with the roles
/// of a and b exchanged). Pockets cut off by D2 are merged into D2 so that
/// the complement stays connected and touches Gamma.
SignSplit piecewise_sign_regions(const Mesh& mesh, const Partition& partition, const std::vector<double>& a,
                                 const std::vector<double>& b, double tolerance = 1e-12);

struct ContradictionStep {
  double d1 = 0.0;
  double d2 = 0.0;
  double rest = 0.0;
  double total() const { return d1 + d2 + rest; }
};

/// int diff * w_k^2 * u_psi^(m-2) * v_g along the sequence, split over D1,
/// D2 and the rest, where w_k solves the linear problem with phi_k.
std::vector<ContradictionStep> contradiction_functional(const Mesh& mesh, const PiecewiseCoefficient& sigma,
                                                        const std::vector<double>& diff, int m,
                                                        const EnergyOperatorPair& pair, const PotentialSequence& seq,
                                                        const BoundaryData& psi, const BoundaryData* g = nullptr,
                                                        Quadrature q = Quadrature::Interior3);

}  // namespace semirec

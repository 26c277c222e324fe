#pragma once

#include <compare>
#include <map>
#include <vector>

#include "semirec/fem.hpp"

namespace semirec {

struct LatticeIndex {
  int p = 0;
  int q = 0;
  int order() const { return p + q; }
  auto operator<=>(const LatticeIndex&) const = default;
};

/// One term of the multivariate Faa di Bruno expansion of
/// d^p/dt1^p d^q/dt2^q a(x, F(t1, t2)) at 0:
///   count * a_j(x) * prod_b u_{blocks[b]}(x),  j = blocks.size().
struct ChainRuleTerm {
  std::vector<LatticeIndex> blocks;  // non-increasing order
  long long count = 0;
  int j() const { return static_cast<int>(blocks.size()); }
};

/// All partitions of the multiset {t1^p, t2^q} grouped by block shape, with
/// the number of set partitions of each shape. Terms with a single block
/// (j = 1) are dropped unless `include_linear`: they multiply a_1 = 0.
std::vector<ChainRuleTerm> enumerate_chain_rule_terms(int p, int q, bool include_linear = false);

/// Memoised enumerate_chain_rule_terms(p, q, false).
const std::vector<ChainRuleTerm>& chain_rule_terms(int p, int q);

/// Mixed derivatives u_{p,q} of t -> S(t1 f1 + t2 f2) at 0.
class DerivativeLattice {
 public:
  DerivativeLattice(BoundaryData f1, BoundaryData f2) : f1_(std::move(f1)), f2_(std::move(f2)) {}

  const BoundaryData& f1() const { return f1_; }
  const BoundaryData& f2() const { return f2_; }

  bool contains(int p, int q) const { return entries_.count({p, q}) != 0; }
  /// Throws MissingLatticeEntry.
  const NodalField& at(int p, int q) const;
  void insert(int p, int q, NodalField u) { entries_[{p, q}] = std::move(u); }
  /// Largest total order M with every entry of order <= M present.
  int max_order() const;
  const std::map<LatticeIndex, NodalField>& entries() const { return entries_; }

 private:
  BoundaryData f1_;
  BoundaryData f2_;
  std::map<LatticeIndex, NodalField> entries_;
};

/// Linear solution with data f and zero source.
NodalField first_linearization(const Mesh& mesh, const PiecewiseCoefficient& sigma, const BoundaryData& f,
                               Quadrature q = Quadrature::Interior3);

/// d^p/dt1^p d^q/dt2^q [a(x, F(t1,t2))] at 0, at the quadrature points.
/// Needs every lattice entry of order below p+q; 2 <= p+q.
QuadratureField chain_rule_source(const Mesh& mesh, const NonlinearitySeries& series,
                                  const DerivativeLattice& lattice, int p, int q,
                                  Quadrature quad = Quadrature::Interior3);

/// Every u_{p,q} with 1 <= p+q <= max_order. Orders above the series
/// truncation are allowed; their sources only involve a_j with j <= K.
DerivativeLattice build_lattice(const Mesh& mesh, const PiecewiseCoefficient& sigma, const NonlinearitySeries& series,
                                const BoundaryData& f1, const BoundaryData& f2, int max_order,
                                Quadrature quad = Quadrature::Interior3);

/// Same, reusing a factorised solver (its quadrature is used throughout).
DerivativeLattice build_lattice(const LinearSolver& lin, const NonlinearitySeries& series, const BoundaryData& f1,
                                const BoundaryData& f2, int max_order);

/// Flux of u_{p,q} with the inhomogeneous weak form K u_{p,q} + load(source_{p,q}).
DNMeasurement dn_derivative(const Mesh& mesh, const PiecewiseCoefficient& sigma, const NonlinearitySeries& series,
                            const DerivativeLattice& lattice, int p, int q, Quadrature quad = Quadrature::Interior3);

DNMeasurement dn_derivative(const LinearSolver& lin, const NonlinearitySeries& series,
                            const DerivativeLattice& lattice, int p, int q);

/// Weights w_j on offsets -r..r (r = (order+1)/2) of the second-order
/// accurate central difference for the order-th derivative: sum_j w_j g(j s) / s^order.
std::vector<double> central_difference_weights(int order);

struct FdOptions {
  double step = 1e-2;
  NewtonOptions newton = [] {
    NewtonOptions o;
    o.tolerance = 1e-13;
    o.polish_iterations = 1;
    return o;
  }();
};

/// Tensor-product central differences of t -> Lambda(t1 f1 + t2 f2) at 0.
/// Throws StencilOutsideNeighborhood when a stencil solve fails.
DNMeasurement fd_dn_derivative(const Mesh& mesh, const PiecewiseCoefficient& sigma, const NonlinearitySeries& series,
                               const BoundaryData& f1, const BoundaryData& f2, int p, int q,
                               const FdOptions& opts = {});

/// ||a - b|| / max(||a||, scale), the discrepancy used by the oracle checks.
double relative_discrepancy(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double scale = 0.0);

}  // namespace semirec

#include "semirec/linearization.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <string>

#include "semirec/error.hpp"

namespace semirec {

namespace {

long long factorial(int n) {
  long long r = 1;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

// Block shapes in decreasing order; each recursion level may only use
// shapes at or after the previous one so every multiset appears once.
void enumerate_shapes(const std::vector<LatticeIndex>& shapes, std::size_t first, int rp, int rq,
                      std::vector<LatticeIndex>& current, std::vector<std::vector<LatticeIndex>>& out) {
  if (rp == 0 && rq == 0) {
    out.push_back(current);
    return;
  }
  for (std::size_t s = first; s < shapes.size(); ++s) {
    if (shapes[s].p > rp || shapes[s].q > rq) continue;
    current.push_back(shapes[s]);
    enumerate_shapes(shapes, s, rp - shapes[s].p, rq - shapes[s].q, current, out);
    current.pop_back();
  }
}

}  // namespace

std::vector<ChainRuleTerm> enumerate_chain_rule_terms(int p, int q, bool include_linear) {
  if (p < 0 || q < 0 || p + q < 1) throw Error(ErrorCode::InvalidArgument, "derivative order must be positive");
  std::vector<LatticeIndex> shapes;
  for (int a = p; a >= 0; --a)
    for (int b = q; b >= 0; --b)
      if (a + b >= 1) shapes.push_back({a, b});
  std::vector<std::vector<LatticeIndex>> multisets;
  std::vector<LatticeIndex> current;
  enumerate_shapes(shapes, 0, p, q, current, multisets);

  std::vector<ChainRuleTerm> terms;
  for (auto& blocks : multisets) {
    if (blocks.size() == 1 && !include_linear) continue;
    // p! q! / (prod_B p_B! q_B! * prod_shape multiplicity!)
    long long denom = 1;
    for (const auto& b : blocks) denom *= factorial(b.p) * factorial(b.q);
    for (std::size_t i = 0; i < blocks.size();) {
      std::size_t k = i;
      while (k < blocks.size() && blocks[k] == blocks[i]) ++k;
      denom *= factorial(static_cast<int>(k - i));
      i = k;
    }
    terms.push_back({std::move(blocks), factorial(p) * factorial(q) / denom});
  }
  return terms;
}

const std::vector<ChainRuleTerm>& chain_rule_terms(int p, int q) {
  static std::mutex mutex;
  static std::map<LatticeIndex, std::vector<ChainRuleTerm>> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find({p, q});
  if (it == cache.end()) it = cache.emplace(LatticeIndex{p, q}, enumerate_chain_rule_terms(p, q)).first;
  return it->second;
}

const NodalField& DerivativeLattice::at(int p, int q) const {
  auto it = entries_.find({p, q});
  if (it == entries_.end())
    throw Error(ErrorCode::MissingLatticeEntry,
                "lattice entry (" + std::to_string(p) + "," + std::to_string(q) + ") not present");
  return it->second;
}

int DerivativeLattice::max_order() const {
  int m = 0;
  for (;; ++m) {
    const int n = m + 1;
    for (int p = 0; p <= n; ++p)
      if (!contains(p, n - p)) return m;
  }
}

NodalField first_linearization(const Mesh& mesh, const PiecewiseCoefficient& sigma, const BoundaryData& f,
                               Quadrature q) {
  return LinearSolver(mesh, sigma, q).solve(f);
}

QuadratureField chain_rule_source(const Mesh& mesh, const NonlinearitySeries& series,
                                  const DerivativeLattice& lattice, int p, int q, Quadrature quad) {
  if (p + q < 2) throw Error(ErrorCode::InvalidArgument, "chain-rule sources start at total order 2");
  const auto& terms = chain_rule_terms(p, q);
  std::map<LatticeIndex, QuadratureField> values;
  for (const auto& term : terms)
    for (const auto& b : term.blocks)
      if (!values.count(b)) values.emplace(b, interpolate(mesh, lattice.at(b.p, b.q), quad));

  QuadratureField s = QuadratureField::zeros(mesh.num_triangles());
  for (const auto& term : terms) {
    if (term.j() > series.order()) continue;
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
      const double a = series.coefficient(t, term.j());
      if (a == 0.0) continue;
      const auto row = static_cast<Eigen::Index>(t);
      for (int k = 0; k < 3; ++k) {
        double prod = static_cast<double>(term.count) * a;
        for (const auto& b : term.blocks) prod *= values.at(b).values(row, k);
        s.values(row, k) += prod;
      }
    }
  }
  return s;
}

DerivativeLattice build_lattice(const LinearSolver& lin, const NonlinearitySeries& series, const BoundaryData& f1,
                                const BoundaryData& f2, int max_order) {
  if (max_order < 1) throw Error(ErrorCode::InvalidArgument, "lattice order must be at least 1");
  const Mesh& mesh = lin.mesh();
  DerivativeLattice lattice(f1, f2);
  lattice.insert(1, 0, lin.solve(f1));
  lattice.insert(0, 1, lin.solve(f2));
  const BoundaryData zero = BoundaryData::zeros(mesh);
  for (int n = 2; n <= max_order; ++n)
    for (int p = n; p >= 0; --p) {
      QuadratureField s = chain_rule_source(mesh, series, lattice, p, n - p, lin.quadrature());
      s.values *= -1.0;
      lattice.insert(p, n - p, lin.solve(s, zero));
    }
  return lattice;
}

DerivativeLattice build_lattice(const Mesh& mesh, const PiecewiseCoefficient& sigma, const NonlinearitySeries& series,
                                const BoundaryData& f1, const BoundaryData& f2, int max_order, Quadrature quad) {
  return build_lattice(LinearSolver(mesh, sigma, quad), series, f1, f2, max_order);
}

DNMeasurement dn_derivative(const LinearSolver& lin, const NonlinearitySeries& series,
                            const DerivativeLattice& lattice, int p, int q) {
  const Mesh& mesh = lin.mesh();
  const NodalField& u = lattice.at(p, q);
  Eigen::VectorXd r = lin.stiffness() * u;
  if (p + q >= 2)
    r += load_vector(mesh, chain_rule_source(mesh, series, lattice, p, q, lin.quadrature()), lin.quadrature());
  const auto& gamma = mesh.gamma_nodes();
  DNMeasurement out{Eigen::VectorXd(static_cast<Eigen::Index>(gamma.size()))};
  for (std::size_t i = 0; i < gamma.size(); ++i) out.values[static_cast<Eigen::Index>(i)] = r[gamma[i]];
  return out;
}

DNMeasurement dn_derivative(const Mesh& mesh, const PiecewiseCoefficient& sigma, const NonlinearitySeries& series,
                            const DerivativeLattice& lattice, int p, int q, Quadrature quad) {
  return dn_derivative(LinearSolver(mesh, sigma, quad), series, lattice, p, q);
}

std::vector<double> central_difference_weights(int order) {
  if (order < 0) throw Error(ErrorCode::InvalidArgument, "negative derivative order");
  if (order == 0) return {1.0};
  const int r = (order + 1) / 2;
  const int n = 2 * r + 1;
  // Moment conditions sum_j w_j j^k = k! delta_{k,order}, k = 0..n-1.
  Eigen::MatrixXd v(n, n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < n; ++k)
    for (int j = -r; j <= r; ++j) v(k, j + r) = std::pow(static_cast<double>(j), k);
  rhs[order] = static_cast<double>(factorial(order));
  const Eigen::VectorXd w = v.fullPivLu().solve(rhs);
  return {w.data(), w.data() + n};
}

DNMeasurement fd_dn_derivative(const Mesh& mesh, const PiecewiseCoefficient& sigma, const NonlinearitySeries& series,
                               const BoundaryData& f1, const BoundaryData& f2, int p, int q, const FdOptions& opts) {
  if (!(opts.step > 0.0)) throw Error(ErrorCode::InvalidArgument, "finite-difference step must be positive");
  const auto w1 = central_difference_weights(p);
  const auto w2 = central_difference_weights(q);
  const int r1 = static_cast<int>(w1.size()) / 2;
  const int r2 = static_cast<int>(w2.size()) / 2;
  const auto ng = static_cast<Eigen::Index>(mesh.gamma_nodes().size());
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(ng);
  for (int i = -r1; i <= r1; ++i)
    for (int j = -r2; j <= r2; ++j) {
      const double w = w1[i + r1] * w2[j + r2];
      if (w == 0.0) continue;
      const BoundaryData f = (i * opts.step) * f1 + (j * opts.step) * f2;
      try {
        const auto [u, report] = solve_semilinear(mesh, sigma, series, f, opts.newton);
        acc += w * dn_measure(mesh, sigma, series, u, f, opts.newton.quadrature).values;
      } catch (const Error& e) {
        throw Error(ErrorCode::StencilOutsideNeighborhood,
                    "stencil point (" + std::to_string(i) + "," + std::to_string(j) + ") failed: " + e.what());
      }
    }
  return DNMeasurement{acc / std::pow(opts.step, p + q)};
}

double relative_discrepancy(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double scale) {
  const double denom = std::max(a.norm(), scale);
  const double diff = (a - b).norm();
  return denom > 0.0 ? diff / denom : diff;
}

}  // namespace semirec

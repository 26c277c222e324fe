#include "semirec/recovery.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <tuple>

#include "semirec/error.hpp"

namespace semirec {

namespace {

std::vector<Experiment> order_10(const MeasurementSet& data) {
  auto e = data.select({1, 0});
  if (e.empty()) throw Error(ErrorCode::InsufficientData, "no order-(1,0) measurements");
  return e;
}

void check_gamma_size(const Mesh& mesh, const std::vector<Experiment>& e) {
  const std::size_t ng = mesh.gamma_nodes().size();
  for (const auto& x : e)
    if (x.f1.size() != ng || static_cast<std::size_t>(x.data.values.size()) != ng)
      throw Error(ErrorCode::DimensionMismatch, "measurement size differs from the Gamma node count");
}

// Pairings <d_i, f_j> for all i, j.
Eigen::MatrixXd data_pairings(const std::vector<Experiment>& e) {
  const auto n = static_cast<Eigen::Index>(e.size());
  Eigen::MatrixXd p(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) p(i, j) = e[i].data.values.dot(e[j].f1.values());
  return p;
}

double singular_condition(const Eigen::MatrixXd& a, int* rank = nullptr) {
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& s = svd.singularValues();
  if (rank) {
    *rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) *rank += s[i] > 1e-10 * s[0];
  }
  if (s.size() == 0 || s[s.size() - 1] == 0.0) return std::numeric_limits<double>::infinity();
  return s[0] / s[s.size() - 1];
}

PiecewiseCoefficient per_region(const Partition& partition, const std::vector<double>& values) {
  return PiecewiseCoefficient::from_regions(partition, values);
}

}  // namespace

std::vector<Experiment> MeasurementSet::select(LatticeIndex order) const {
  std::vector<Experiment> out;
  for (const auto& e : experiments)
    if (e.order == order) out.push_back(e);
  return out;
}

MeasurementSet simulate_measurements(const Mesh& mesh, const PiecewiseCoefficient& sigma,
                                     const NonlinearitySeries& series,
                                     const std::vector<std::pair<BoundaryData, BoundaryData>>& data, LatticeIndex order,
                                     Quadrature q) {
  const LinearSolver lin(mesh, sigma, q);
  MeasurementSet set;
  for (const auto& [f1, f2] : data) {
    const DerivativeLattice lat = build_lattice(lin, series, f1, f2, std::max(order.order(), 1));
    set.experiments.push_back({f1, f2, order, dn_derivative(lin, series, lat, order.p, order.q)});
  }
  return set;
}

void add_relative_noise(MeasurementSet& set, double eta, CounterRng& rng) {
  if (eta < 0.0) throw Error(ErrorCode::InvalidArgument, "noise level must be non-negative");
  for (auto& e : set.experiments)
    for (Eigen::Index i = 0; i < e.data.values.size(); ++i) e.data.values[i] *= 1.0 + eta * rng.normal();
  set.noise_level = std::max(set.noise_level, eta);
}

std::vector<Eigen::SparseMatrix<double>> region_stiffness(const Mesh& mesh, const Partition& partition) {
  if (partition.labels.size() != mesh.num_triangles())
    throw Error(ErrorCode::DimensionMismatch, "partition size differs from triangle count");
  std::vector<std::vector<Eigen::Triplet<double>>> trips(static_cast<std::size_t>(partition.count));
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto g = hat_gradients(mesh, t);
    const Eigen::Matrix3d local = mesh.area(t) * g * g.transpose();
    const auto& tri = mesh.triangles()[t];
    auto& out = trips[static_cast<std::size_t>(partition.labels[t])];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) out.emplace_back(tri[i], tri[j], local(i, j));
  }
  const auto nv = static_cast<Eigen::Index>(mesh.num_vertices());
  std::vector<Eigen::SparseMatrix<double>> k;
  for (auto& tr : trips) {
    Eigen::SparseMatrix<double> m(nv, nv);
    m.setFromTriplets(tr.begin(), tr.end());
    k.push_back(std::move(m));
  }
  return k;
}

SigmaRecovery recover_sigma_linearized(const Mesh& mesh, const Partition& partition, const MeasurementSet& data,
                                       const SigmaOptions& opts) {
  const auto exps = order_10(data);
  check_gamma_size(mesh, exps);
  const int nr = partition.count;
  const auto n = static_cast<Eigen::Index>(exps.size());
  const Eigen::Index pairs = n * (n + 1) / 2;
  if (pairs < static_cast<Eigen::Index>(nr) * nr)
    throw Error(ErrorCode::InsufficientData, std::to_string(pairs) + " pairings cannot determine " +
                                                 std::to_string(nr) + " regions");

  const auto kr = region_stiffness(mesh, partition);
  const Eigen::MatrixXd pd = data_pairings(exps);
  Eigen::VectorXd d(pairs);
  for (Eigen::Index i = 0, row = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) d[row++] = 0.5 * (pd(i, j) + pd(j, i));
  const double scale = std::max(d.norm(), std::numeric_limits<double>::min());

  Eigen::VectorXd sigma = Eigen::VectorXd::Ones(nr);
  if (!opts.initial.empty()) {
    if (static_cast<int>(opts.initial.size()) != nr)
      throw Error(ErrorCode::DimensionMismatch, "initial guess size differs from region count");
    sigma = Eigen::Map<const Eigen::VectorXd>(opts.initial.data(), nr);
  }
  sigma = sigma.cwiseMax(opts.sigma_min);

  // Pairings are linear in sigma for frozen solutions: sim = J sigma, and J
  // is also the exact derivative of the pairings.
  auto evaluate = [&](const Eigen::VectorXd& s) {
    const LinearSolver lin(mesh, per_region(partition, {s.data(), s.data() + nr}));
    std::vector<NodalField> u;
    for (const auto& e : exps) u.push_back(lin.solve(e.f1));
    Eigen::MatrixXd jac(pairs, nr);
    for (int r = 0; r < nr; ++r) {
      std::vector<Eigen::VectorXd> ku;
      for (const auto& ui : u) ku.push_back(kr[static_cast<std::size_t>(r)] * ui);
      for (Eigen::Index i = 0, row = 0; i < n; ++i)
        for (Eigen::Index j = i; j < n; ++j) jac(row++, r) = u[static_cast<std::size_t>(j)].dot(ku[static_cast<std::size_t>(i)]);
    }
    Eigen::VectorXd res = jac * s - d;
    return std::pair{jac, res};
  };

  auto [jac, res] = evaluate(sigma);
  SigmaRecovery out;
  out.condition = singular_condition(jac, &out.rank);
  if (out.rank < nr)
    throw Error(ErrorCode::InsufficientData, "pairing Jacobian has rank " + std::to_string(out.rank) + " < " +
                                                 std::to_string(nr));
  out.initial_misfit = res.norm() / scale;
  double misfit = out.initial_misfit;
  double mu = 1e-6;
  for (; out.iterations < opts.max_iterations; ++out.iterations) {
    if (misfit < 1e-15) break;
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd g = jac.transpose() * res;
    bool accepted = false;
    Eigen::VectorXd step;
    while (mu < 1e12) {
      Eigen::MatrixXd lhs = jtj;
      lhs.diagonal() += mu * jtj.diagonal();
      step = -lhs.ldlt().solve(g);
      const Eigen::VectorXd trial = (sigma + step).cwiseMax(opts.sigma_min);
      auto [tj, tr] = evaluate(trial);
      const double tm = tr.norm() / scale;
      if (tm < misfit) {
        step = trial - sigma;
        sigma = trial;
        jac = std::move(tj);
        res = std::move(tr);
        misfit = tm;
        mu = std::max(mu / 10.0, 1e-12);
        accepted = true;
        break;
      }
      mu *= 10.0;
    }
    if (!accepted) {
      if (out.iterations == 0 && misfit > 1e-12)
        throw Error(ErrorCode::MisfitNotReduced, "no Gauss-Newton step reduces the misfit");
      break;
    }
    if (step.norm() <= opts.step_tolerance * sigma.norm()) {
      ++out.iterations;
      break;
    }
  }
  out.values.assign(sigma.data(), sigma.data() + nr);
  out.misfit = misfit;
  return out;
}

AmRecovery recover_am_step(const Mesh& mesh, const PiecewiseCoefficient& sigma, const NonlinearitySeries& known, int m,
                           const Partition& partition, const MeasurementSet& data,
                           const std::vector<BoundaryData>& tests, const AmOptions& opts) {
  if (m < 2) throw Error(ErrorCode::InvalidArgument, "coefficient stages start at m = 2");
  if (tests.empty()) throw Error(ErrorCode::InsufficientData, "no test functions");
  const auto exps = data.select({2, m - 2});
  if (exps.empty()) throw Error(ErrorCode::InsufficientData, "no order-(2," + std::to_string(m - 2) + ") measurements");
  const std::size_t nt = mesh.num_triangles();
  const int nr = partition.count;

  NonlinearitySeries base(nt, m);
  for (int k = 2; k < m && k <= known.order(); ++k) base = base.with_coefficient(k, known.coefficient_field(k));

  const Quadrature quad = opts.quadrature;
  const auto& rule = quadrature_rule(quad);
  const LinearSolver lin(mesh, sigma, quad);
  std::vector<QuadratureField> vg;
  for (const auto& g : tests) vg.push_back(interpolate(mesh, lin.solve(g), quad));

  const auto rows = static_cast<Eigen::Index>(exps.size() * tests.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, nr);
  std::vector<DerivativeLattice> lattices;
  for (std::size_t e = 0; e < exps.size(); ++e) {
    lattices.push_back(build_lattice(lin, base, exps[e].f1, exps[e].f2, m));
    const QuadratureField u10 = interpolate(mesh, lattices.back().at(1, 0), quad);
    const QuadratureField u01 = interpolate(mesh, lattices.back().at(0, 1), quad);
    for (std::size_t g = 0; g < tests.size(); ++g) {
      const auto row = static_cast<Eigen::Index>(e * tests.size() + g);
      for (std::size_t t = 0; t < nt; ++t) {
        const auto i = static_cast<Eigen::Index>(t);
        double s = 0.0;
        for (int k = 0; k < 3; ++k)
          s += rule.weights[k] * u10.values(i, k) * u10.values(i, k) * std::pow(u01.values(i, k), m - 2) *
               vg[g].values(i, k);
        a(row, partition.labels[t]) += mesh.area(t) * s;
      }
    }
  }

  // Residual of the pairings for a given estimate of a_m.
  auto residual = [&](const std::vector<double>& am) {
    std::vector<double> field(nt);
    for (std::size_t t = 0; t < nt; ++t) field[t] = am[static_cast<std::size_t>(partition.labels[t])];
    const NonlinearitySeries est = base.with_coefficient(m, field);
    Eigen::VectorXd r(rows);
    for (std::size_t e = 0; e < exps.size(); ++e) {
      DerivativeLattice lat = lattices[e];
      // Only the order-m entries depend on a_m.
      for (int p = m; p >= 0; --p) {
        QuadratureField s = chain_rule_source(mesh, est, lat, p, m - p, quad);
        s.values *= -1.0;
        lat.insert(p, m - p, lin.solve(s, BoundaryData::zeros(mesh)));
      }
      const Eigen::VectorXd diff = exps[e].data.values - dn_derivative(lin, est, lat, 2, m - 2).values;
      for (std::size_t g = 0; g < tests.size(); ++g)
        r[static_cast<Eigen::Index>(e * tests.size() + g)] = diff.dot(tests[g].values());
    }
    return r;
  };

  AmRecovery out;
  out.equations = static_cast<int>(rows);
  out.condition = singular_condition(a);
  if (!std::isfinite(out.condition) || out.condition > opts.max_condition)
    throw Error(ErrorCode::IllConditionedSystem,
                "stage " + std::to_string(m) + " system has condition number " + std::to_string(out.condition));
  const Eigen::MatrixXd ata = a.transpose() * a;
  out.lambda = opts.lambda * ata.diagonal().mean();
  Eigen::MatrixXd lhs = ata;
  lhs.diagonal().array() += out.lambda;
  const auto solver = lhs.ldlt();

  std::vector<double> am(static_cast<std::size_t>(nr), 0.0);
  Eigen::VectorXd r = residual(am);
  out.residual_before = r.norm();
  for (int it = 0; it <= opts.refine_iterations; ++it) {
    const Eigen::VectorXd delta = solver.solve(a.transpose() * r);
    for (int k = 0; k < nr; ++k) am[static_cast<std::size_t>(k)] += delta[k];
    r = residual(am);
  }
  out.residual_after = r.norm();
  out.values = std::move(am);
  return out;
}

std::string to_string(CavityVerdict v) {
  switch (v) {
    case CavityVerdict::None: return "none";
    case CavityVerdict::Detected: return "detected";
    case CavityVerdict::Inconclusive: return "inconclusive";
  }
  return "unknown";
}

Mesh CavityModel::mesh(std::optional<Disk> cavity) const {
  return tag_gamma(build_disk_mesh(outer_radius, cavity, h), gamma);
}

double linearized_residual(const Mesh& mesh, const PiecewiseCoefficient& sigma, const MeasurementSet& data) {
  const auto exps = order_10(data);
  check_gamma_size(mesh, exps);
  const LinearSolver lin(mesh, sigma);
  const auto n = static_cast<Eigen::Index>(exps.size());
  const auto& gamma = mesh.gamma_nodes();
  Eigen::MatrixXd model(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd r = lin.stiffness() * lin.solve(exps[i].f1);
    Eigen::VectorXd flux(static_cast<Eigen::Index>(gamma.size()));
    for (std::size_t k = 0; k < gamma.size(); ++k) flux[static_cast<Eigen::Index>(k)] = r[gamma[k]];
    for (Eigen::Index j = 0; j < n; ++j) model(i, j) = flux.dot(exps[j].f1.values());
  }
  const Eigen::MatrixXd pd = data_pairings(exps);
  return (pd - model).norm() / pd.norm();
}

CavityResult detect_cavity(const CavityModel& model, const MeasurementSet& data, const CavityScan& scan) {
  CavityResult out;
  const Mesh base = model.mesh(std::nullopt);
  out.stage1_residual = linearized_residual(base, PiecewiseCoefficient(model.sigma.evaluate(base)), data);
  out.noise_floor = std::max(data.noise_level, 1e-9);
  const bool detected = out.stage1_residual > scan.detection_factor * out.noise_floor;
  if (!detected && !scan.localize_when_none) return out;

  std::map<std::tuple<long, long, long>, CandidateMisfit> cache;
  auto evaluate = [&](Disk d) -> std::optional<CandidateMisfit> {
    const auto key = std::tuple{std::lround(d.center.x * 1e9), std::lround(d.center.y * 1e9), std::lround(d.radius * 1e9)};
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    if (d.radius <= 0.0 || std::hypot(d.center.x, d.center.y) + d.radius > model.outer_radius - 2.0 * model.h)
      return std::nullopt;
    try {
      const Mesh mesh = model.mesh(d);
      std::vector<double> sv = model.sigma.evaluate(mesh);
      if (scan.refit_sigma) {
        const Partition part = model.sigma.partition(mesh);
        SigmaOptions so;
        so.initial = model.sigma.region_values();
        so.max_iterations = 20;
        const auto values = recover_sigma_linearized(mesh, part, data, so).values;
        for (std::size_t t = 0; t < mesh.num_triangles(); ++t) sv[t] = values[static_cast<std::size_t>(part.labels[t])];
      }
      CandidateMisfit c{d, linearized_residual(mesh, PiecewiseCoefficient(sv), data)};
      cache.emplace(key, c);
      return c;
    } catch (const Error&) {
      return std::nullopt;
    }
  };

  const int reach = static_cast<int>(std::floor(model.outer_radius / scan.grid_spacing));
  for (double rho : scan.radii)
    for (int i = -reach; i <= reach; ++i)
      for (int j = -reach; j <= reach; ++j)
        if (const auto c = evaluate({{i * scan.grid_spacing, j * scan.grid_spacing}, rho})) out.landscape.push_back(*c);
  if (out.landscape.empty()) throw Error(ErrorCode::InvalidArgument, "no admissible cavity candidate in the scan");

  std::vector<CandidateMisfit> starts = out.landscape;
  std::stable_sort(starts.begin(), starts.end(),
                   [](const CandidateMisfit& x, const CandidateMisfit& y) { return x.residual < y.residual; });
  starts.resize(std::min<std::size_t>(starts.size(), scan.refine ? static_cast<std::size_t>(std::max(scan.starts, 1)) : 1));

  double radius_gap = scan.grid_spacing;
  for (std::size_t k = 1; k < scan.radii.size(); ++k)
    radius_gap = std::min(radius_gap, std::abs(scan.radii[k] - scan.radii[k - 1]));
  std::optional<CandidateMisfit> best;
  for (CandidateMisfit local : starts) {
    double sc = 0.5 * scan.grid_spacing, sr = 0.5 * radius_gap;
    while (scan.refine && (sc >= 0.25 * model.h || sr >= 0.25 * model.h)) {
      std::optional<CandidateMisfit> move;
      const Disk d = local.disk;
      // all 26 neighbours in (x, y, r): size and depth trade off along diagonals
      for (int dx = -1; dx <= 1; ++dx)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dr = -1; dr <= 1; ++dr) {
            if (dx == 0 && dy == 0 && dr == 0) continue;
            const auto c = evaluate({{d.center.x + dx * sc, d.center.y + dy * sc}, d.radius + dr * sr});
            ++out.refinement_steps;
            if (c && c->residual < (move ? move->residual : local.residual)) move = c;
          }
      if (move) {
        local = *move;
      } else {
        sc *= 0.5;
        sr *= 0.5;
      }
    }
    if (!best || local.residual < best->residual) best = local;
  }

  out.disk = best->disk;
  out.disk_residual = best->residual;
  if (detected) {
    out.verdict = CavityVerdict::Detected;
  } else if (best->residual < 0.5 * out.stage1_residual) {
    out.verdict = CavityVerdict::Inconclusive;
  } else {
    out.disk.reset();
  }
  if (out.disk) {
    const Mesh mesh = model.mesh(out.disk);
    const Partition part = model.sigma.partition(mesh);
    if (scan.refit_sigma) {
      SigmaOptions so;
      so.initial = model.sigma.region_values();
      out.sigma = recover_sigma_linearized(mesh, part, data, so).values;
    } else {
      out.sigma = model.sigma.region_values();
    }
  }
  return out;
}

RegionMask cavity_estimate(const Mesh& mesh, const CavityResult& result) {
  if (!result.disk) return RegionMask();
  std::vector<int> tris;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const Point b = mesh.barycenter(t);
    if (std::hypot(b.x - result.disk->center.x, b.y - result.disk->center.y) < result.disk->radius)
      tris.push_back(static_cast<int>(t));
  }
  return RegionMask(mesh, std::move(tris));
}

SignSplit piecewise_sign_regions(const Mesh& mesh, const Partition& partition, const std::vector<double>& a,
                                 const std::vector<double>& b, double tolerance) {
  if (a.size() != b.size() || static_cast<int>(a.size()) != partition.count)
    throw Error(ErrorCode::DimensionMismatch, "field sizes differ from the region count");
  std::vector<double> diff(a.size());
  for (std::size_t r = 0; r < a.size(); ++r) diff[r] = a[r] - b[r];
  if (std::all_of(diff.begin(), diff.end(), [&](double d) { return std::abs(d) <= tolerance; }))
    throw Error(ErrorCode::FieldsEqual, "the fields agree on every region");

  const std::vector<int> gamma_tris = gamma_triangles(mesh);
  const std::size_t nt = mesh.num_triangles();

  // sign = +1: case I (D1 where a > b); sign = -1: case II.
  auto attempt = [&](double sign) -> std::optional<SignSplit> {
    std::vector<bool> outside(nt);
    for (std::size_t t = 0; t < nt; ++t) outside[t] = sign * diff[static_cast<std::size_t>(partition.labels[t])] >= -tolerance;
    const auto [comp, count] = triangle_components(mesh, outside);
    // Keep the largest component touching Gamma; everything else joins D2.
    std::vector<double> area(static_cast<std::size_t>(count), 0.0);
    for (std::size_t t = 0; t < nt; ++t)
      if (comp[t] >= 0) area[static_cast<std::size_t>(comp[t])] += mesh.area(t);
    int keep = -1;
    for (int t : gamma_tris) {
      const int c = comp[static_cast<std::size_t>(t)];
      if (c >= 0 && (keep < 0 || area[static_cast<std::size_t>(c)] > area[static_cast<std::size_t>(keep)])) keep = c;
    }
    if (keep < 0) return std::nullopt;
    std::vector<int> d1, d2;
    for (std::size_t t = 0; t < nt; ++t) {
      if (comp[t] != keep) {
        d2.push_back(static_cast<int>(t));
      } else if (sign * diff[static_cast<std::size_t>(partition.labels[t])] > tolerance) {
        d1.push_back(static_cast<int>(t));
      }
    }
    if (d1.empty()) return std::nullopt;
    return SignSplit{RegionMask(mesh, std::move(d1)), RegionMask(mesh, std::move(d2)),
                     sign > 0 ? SignCase::I : SignCase::II};
  };

  const auto first = attempt(1.0), second = attempt(-1.0);
  if (!first && !second) throw Error(ErrorCode::NoValidSplit, "no split keeps the complement of D2 connected to Gamma");
  if (!second) return *first;
  if (!first) return *second;
  const double a1 = first->d1.area(mesh), a2 = second->d1.area(mesh);
  return a2 > a1 * (1.0 + 1e-6) ? *second : *first;
}

std::vector<ContradictionStep> contradiction_functional(const Mesh& mesh, const PiecewiseCoefficient& sigma,
                                                        const std::vector<double>& diff, int m,
                                                        const EnergyOperatorPair& pair, const PotentialSequence& seq,
                                                        const BoundaryData& psi, const BoundaryData* g, Quadrature q) {
  if (m < 2) throw Error(ErrorCode::InvalidArgument, "the functional needs m >= 2");
  if (diff.size() != mesh.num_triangles()) throw Error(ErrorCode::DimensionMismatch, "diff size differs from triangle count");
  if (psi.values().size() > 0 && psi.values().minCoeff() < 0.0)
    throw Error(ErrorCode::InvalidArgument, "psi must be non-negative");
  const LinearSolver lin(mesh, sigma, q);
  const auto& rule = quadrature_rule(q);
  const QuadratureField up = interpolate(mesh, lin.solve(psi), q);
  const QuadratureField vg = interpolate(mesh, lin.solve(g ? *g : psi), q);
  std::vector<ContradictionStep> out;
  for (const auto& step : seq.steps) {
    const QuadratureField w = interpolate(mesh, pair.solution(step.phi), q);
    // rescaled so that E(D1) * E(D2) = 1
    const double e12 = step.energy_d1 * step.energy_d2;
    const double scale = e12 > 0.0 ? 1.0 / std::sqrt(e12) : 1.0;
    ContradictionStep c;
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
      if (diff[t] == 0.0) continue;
      const auto i = static_cast<Eigen::Index>(t);
      double s = 0.0;
      for (int k = 0; k < 3; ++k)
        s += rule.weights[k] * w.values(i, k) * w.values(i, k) * std::pow(up.values(i, k), m - 2) * vg.values(i, k);
      s *= scale * mesh.area(t) * diff[t];
      (pair.d1.contains(t) ? c.d1 : pair.d2.contains(t) ? c.d2 : c.rest) += s;
    }
    out.push_back(c);
  }
  return out;
}

}  // namespace semirec

#include "semirec/scenarios.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include <yaml-cpp/yaml.h>

namespace semirec {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kDeg = kPi / 180.0;
// ||u||_sup <= kGrowthBound ||f||_sup for data inside the well-posedness regime
constexpr double kGrowthBound = 3.0;

using json = nlohmann::ordered_json;

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::ConfigInvalid, what); }

// ---------------------------------------------------------------- config parsing

void expect_keys(const YAML::Node& node, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!node.IsMap()) invalid(where + " must be a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      invalid("unknown key '" + key + "' in " + where);
  }
}

template <class T>
T scalar(const YAML::Node& node, const std::string& where) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    invalid("bad value for " + where);
  }
}

template <class T>
void read(const YAML::Node& parent, const char* key, T& out, const std::string& where) {
  if (const YAML::Node n = parent[key]) out = scalar<T>(n, where + "." + key);
}

template <class T>
std::vector<T> list(const YAML::Node& node, const std::string& where) {
  if (!node.IsSequence()) invalid(where + " must be a list");
  std::vector<T> out;
  for (const auto& n : node) out.push_back(scalar<T>(n, where));
  return out;
}

Point point(const YAML::Node& node, const std::string& where) {
  const auto v = list<double>(node, where);
  if (v.size() != 2) invalid(where + " must be [x, y]");
  return {v[0], v[1]};
}

Disk disk(const YAML::Node& node, const std::string& where) {
  expect_keys(node, where, {"center", "radius"});
  if (!node["center"] || !node["radius"]) invalid(where + " needs center and radius");
  return {point(node["center"], where + ".center"), scalar<double>(node["radius"], where + ".radius")};
}

PiecewiseField field(const YAML::Node& node, const std::string& where) {
  if (node.IsScalar()) return {scalar<double>(node, where), {}};
  expect_keys(node, where, {"background", "inclusions"});
  PiecewiseField f;
  read(node, "background", f.background, where);
  if (const YAML::Node inc = node["inclusions"]) {
    if (!inc.IsSequence()) invalid(where + ".inclusions must be a list");
    for (std::size_t i = 0; i < inc.size(); ++i) {
      const std::string w = where + ".inclusions[" + std::to_string(i) + "]";
      expect_keys(inc[i], w, {"center", "radius", "value"});
      if (!inc[i]["center"] || !inc[i]["radius"] || !inc[i]["value"]) invalid(w + " needs center, radius and value");
      f.inclusions.push_back({{point(inc[i]["center"], w + ".center"), scalar<double>(inc[i]["radius"], w + ".radius")},
                              scalar<double>(inc[i]["value"], w + ".value")});
    }
  }
  return f;
}

ScenarioConfig from_yaml(const YAML::Node& root) {
  ScenarioConfig c;
  expect_keys(root, "config",
              {"scenario", "seed", "output", "mesh", "gamma", "phantom", "data", "forward", "linearization",
               "localized", "witness", "recovery", "cavity_scan", "tolerances"});
  if (!root["scenario"]) invalid("missing 'scenario'");
  c.scenario = scalar<std::string>(root["scenario"], "scenario");
  read(root, "seed", c.seed, "config");
  read(root, "output", c.output_dir, "config");

  if (const YAML::Node m = root["mesh"]) {
    expect_keys(m, "mesh", {"radius", "h", "cavity"});
    read(m, "radius", c.radius, "mesh");
    read(m, "h", c.h, "mesh");
    if (m["cavity"] && !m["cavity"].IsNull()) c.cavity = disk(m["cavity"], "mesh.cavity");
  }
  if (const YAML::Node g = root["gamma"]) {
    if (g.IsScalar()) {
      const auto s = scalar<std::string>(g, "gamma");
      if (s == "full") c.gamma = {0.0, 2.0 * kPi};
      else if (s == "upper_half") c.gamma = {0.0, kPi};
      else if (s == "quarter") c.gamma = {0.0, 0.5 * kPi};
      else invalid("gamma must be full, upper_half, quarter or {start, end}");
    } else {
      expect_keys(g, "gamma", {"start", "end"});
      double s = 0.0, e = 360.0;
      read(g, "start", s, "gamma");
      read(g, "end", e, "gamma");
      c.gamma = {s * kDeg, e * kDeg};
    }
  }
  if (const YAML::Node p = root["phantom"]) {
    expect_keys(p, "phantom", {"sigma", "a"});
    if (p["sigma"]) c.sigma = field(p["sigma"], "phantom.sigma");
    if (const YAML::Node a = p["a"]) {
      if (!a.IsMap()) invalid("phantom.a must map orders to fields");
      for (const auto& kv : a) {
        const int k = scalar<int>(kv.first, "phantom.a order");
        c.a[k] = field(kv.second, "phantom.a." + std::to_string(k));
      }
    }
  }
  if (const YAML::Node d = root["data"]) {
    expect_keys(d, "data", {"family", "modes", "count", "amplitude", "epsilon_max", "noise", "orders"});
    read(d, "family", c.family, "data");
    read(d, "modes", c.modes, "data");
    read(d, "count", c.count, "data");
    read(d, "amplitude", c.amplitude, "data");
    read(d, "epsilon_max", c.epsilon_max, "data");
    read(d, "noise", c.noise, "data");
    if (const YAML::Node o = d["orders"]) {
      if (!o.IsSequence()) invalid("data.orders must be a list of [p, q]");
      c.orders.clear();
      for (const auto& pq : o) {
        const auto v = list<int>(pq, "data.orders");
        if (v.size() != 2) invalid("data.orders entries must be [p, q]");
        c.orders.push_back({v[0], v[1]});
      }
    }
  }
  if (const YAML::Node f = root["forward"]) {
    expect_keys(f, "forward", {"h_values"});
    if (f["h_values"]) c.h_values = list<double>(f["h_values"], "forward.h_values");
  }
  if (const YAML::Node l = root["linearization"]) {
    expect_keys(l, "linearization", {"configurations", "max_order", "series_order", "zero_nonlinearity", "fd_step"});
    read(l, "configurations", c.configurations, "linearization");
    read(l, "max_order", c.max_order, "linearization");
    read(l, "series_order", c.series_order, "linearization");
    read(l, "zero_nonlinearity", c.zero_nonlinearity, "linearization");
    read(l, "fd_step", c.fd_step, "linearization");
  }
  if (const YAML::Node l = root["localized"]) {
    expect_keys(l, "localized", {"d1", "d2", "steps", "delta0"});
    if (l["d1"]) c.d1 = disk(l["d1"], "localized.d1");
    if (l["d2"]) c.d2 = disk(l["d2"], "localized.d2");
    read(l, "steps", c.steps, "localized");
    read(l, "delta0", c.delta0, "localized");
  }
  if (const YAML::Node w = root["witness"]) {
    expect_keys(w, "witness", {"order", "alternative"});
    read(w, "order", c.witness_order, "witness");
    if (w["alternative"]) c.alternative = field(w["alternative"], "witness.alternative");
  }
  if (const YAML::Node r = root["recovery"]) {
    expect_keys(r, "recovery", {"stages", "recover_sigma", "tikhonov"});
    if (r["stages"]) c.stages = list<int>(r["stages"], "recovery.stages");
    read(r, "recover_sigma", c.recover_sigma, "recovery");
    read(r, "tikhonov", c.tikhonov, "recovery");
  }
  if (const YAML::Node s = root["cavity_scan"]) {
    expect_keys(s, "cavity_scan",
                {"radii", "grid_spacing", "refine", "starts", "detection_factor", "localize_when_none", "refit_sigma"});
    if (s["radii"]) c.scan.radii = list<double>(s["radii"], "cavity_scan.radii");
    read(s, "grid_spacing", c.scan.grid_spacing, "cavity_scan");
    read(s, "refine", c.scan.refine, "cavity_scan");
    read(s, "starts", c.scan.starts, "cavity_scan");
    read(s, "detection_factor", c.scan.detection_factor, "cavity_scan");
    read(s, "localize_when_none", c.scan.localize_when_none, "cavity_scan");
    read(s, "refit_sigma", c.scan.refit_sigma, "cavity_scan");
  }
  if (const YAML::Node t = root["tolerances"]) {
    if (!t.IsMap()) invalid("tolerances must be a mapping");
    for (const auto& kv : t)
      c.tolerances[kv.first.as<std::string>()] = scalar<double>(kv.second, "tolerances." + kv.first.as<std::string>());
  }
  return c;
}

// ---------------------------------------------------------------- helpers

template <class Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  pool.clear();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

Mesh phantom_mesh(const ScenarioConfig& c, std::optional<Disk> cavity) {
  return tag_gamma(build_disk_mesh(c.radius, cavity, c.h), c.gamma);
}

int series_order(const ScenarioConfig& c) {
  int k = 2;
  for (const auto& [order, f] : c.a) k = std::max(k, order);
  for (int s : c.stages) k = std::max(k, s);
  return k;
}

NonlinearitySeries phantom_series(const ScenarioConfig& c, const Mesh& mesh, int order) {
  NonlinearitySeries s(mesh.num_triangles(), order);
  for (const auto& [k, f] : c.a)
    if (k <= order) s = s.with_coefficient(k, f.evaluate(mesh));
  return s;
}

std::vector<BoundaryData> family(const ScenarioConfig& c, const Mesh& mesh) {
  return c.family == "trig" ? trig_family(mesh, c.modes, c.amplitude) : bump_family(mesh, c.count, c.amplitude);
}

std::vector<std::pair<BoundaryData, BoundaryData>> experiment_pairs(const std::vector<BoundaryData>& fs, int q) {
  std::vector<std::pair<BoundaryData, BoundaryData>> out;
  if (q == 0) {
    for (const auto& f : fs) out.emplace_back(f, f);
  } else {
    for (const auto& a : fs)
      for (const auto& b : fs) out.emplace_back(a, b);
  }
  return out;
}

std::vector<double> spread(const Partition& p, const std::vector<double>& region_values) {
  std::vector<double> out(p.labels.size());
  for (std::size_t t = 0; t < out.size(); ++t) out[t] = region_values[static_cast<std::size_t>(p.labels[t])];
  return out;
}

/// max_R |est_R - true_R| / max(max_R |true_R|, floor)
double region_error(const std::vector<double>& est, const std::vector<double>& truth, double floor = 1e-12) {
  double scale = floor, err = 0.0;
  for (double v : truth) scale = std::max(scale, std::abs(v));
  for (std::size_t r = 0; r < est.size(); ++r) err = std::max(err, std::abs(est[r] - truth[r]));
  return err / scale;
}

void add_metric(RunReport& r, std::string name, double value, std::optional<double> tol, bool at_least = false) {
  Metric m{std::move(name), value, tol, at_least, true};
  if (tol) m.pass = std::isfinite(value) && (at_least ? value >= *tol : value <= *tol);
  r.metrics.push_back(std::move(m));
}

json disk_json(const Disk& d) { return json{{"center", {d.center.x, d.center.y}}, {"radius", d.radius}}; }

MeasurementSet simulate_orders(const Mesh& mesh, const PiecewiseCoefficient& sigma, const NonlinearitySeries& series,
                               const std::vector<BoundaryData>& fs, const std::vector<LatticeIndex>& orders, int jobs) {
  std::vector<MeasurementSet> parts(orders.size());
  parallel_for(orders.size(), jobs, [&](std::size_t i) {
    parts[i] = simulate_measurements(mesh, sigma, series, experiment_pairs(fs, orders[i].q), orders[i]);
  });
  MeasurementSet out;
  for (auto& p : parts) out.experiments.insert(out.experiments.end(), p.experiments.begin(), p.experiments.end());
  return out;
}

std::vector<LatticeIndex> stage_orders(const std::vector<int>& stages) {
  std::vector<LatticeIndex> out;
  for (int m : stages) out.push_back({2, m - 2});
  return out;
}

struct StageResult {
  int m;
  std::vector<double> values;
  std::vector<double> truth;
  AmRecovery report;
};

std::vector<StageResult> run_stages(const ScenarioConfig& c, const Mesh& mesh, const PiecewiseCoefficient& sigma,
                                    const MeasurementSet& data, const std::vector<BoundaryData>& tests) {
  std::vector<StageResult> out;
  NonlinearitySeries known(mesh.num_triangles(), series_order(c));
  AmOptions opts;
  opts.lambda = c.tikhonov;
  for (int m : c.stages) {
    const auto it = c.a.find(m);
    const PiecewiseField layout = it != c.a.end() ? it->second : PiecewiseField{0.0, {}};
    const Partition part = layout.partition(mesh);
    const AmRecovery r = recover_am_step(mesh, sigma, known, m, part, data, tests, opts);
    known = known.with_coefficient(m, spread(part, r.values));
    out.push_back({m, r.values, layout.region_values(), r});
  }
  return out;
}

void report_stages(RunReport& report, const ScenarioConfig& c, const std::vector<StageResult>& stages) {
  Table t{{"m", "region", "estimate", "truth"}, {}};
  json js = json::array();
  for (const auto& s : stages) {
    for (std::size_t r = 0; r < s.values.size(); ++r)
      t.rows.push_back({double(s.m), double(r), s.values[r], s.truth[r]});
    const std::string name = "a" + std::to_string(s.m) + "_error";
    add_metric(report, name, region_error(s.values, s.truth), c.tolerance(name, 0.05));
    js.push_back(json{{"m", s.m},
                      {"estimate", s.values},
                      {"truth", s.truth},
                      {"condition", s.report.condition},
                      {"residual_before", s.report.residual_before},
                      {"residual_after", s.report.residual_after},
                      {"equations", s.report.equations}});
  }
  report.tables["coefficients"] = std::move(t);
  report.details["stages"] = std::move(js);
}

// ---------------------------------------------------------------- scenarios

RunReport forward_convergence(const ScenarioConfig& c, int jobs) {
  RunReport r;
  std::vector<double> errors(c.h_values.size());
  std::vector<std::size_t> sizes(c.h_values.size());
  const auto exact = [](Point p) { return p.x * p.x + p.y * p.y; };
  parallel_for(c.h_values.size(), jobs, [&](std::size_t i) {
    const Mesh m = tag_gamma(build_disk_mesh(c.radius, std::nullopt, c.h_values[i]), {0.0, 2.0 * kPi});
    const auto source = QuadratureField::per_triangle(std::vector<double>(m.num_triangles(), -4.0));
    const NodalField u = solve_linear(m, PiecewiseCoefficient::constant(m.num_triangles(), 1.0), source,
                                      BoundaryData::from_function(m, exact));
    errors[i] = l2_error(m, u, exact);
    sizes[i] = m.num_triangles();
  });
  // least-squares slope of log(error) against log(h)
  const double n = static_cast<double>(errors.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  Table t{{"h", "triangles", "l2_error"}, {}};
  for (std::size_t i = 0; i < errors.size(); ++i) {
    const double x = std::log(c.h_values[i]), y = std::log(errors[i]);
    sx += x, sy += y, sxx += x * x, sxy += x * y;
    t.rows.push_back({c.h_values[i], double(sizes[i]), errors[i]});
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  r.tables["convergence"] = std::move(t);
  r.details["slope"] = slope;
  add_metric(r, "slope_deviation", std::abs(slope - 2.0), c.tolerance("slope_deviation", 0.2));
  r.mesh = tag_gamma(build_disk_mesh(c.radius, std::nullopt, c.h_values.back()), {0.0, 2.0 * kPi});
  return r;
}

RunReport linearization_check(const ScenarioConfig& c, int jobs) {
  RunReport r;
  const Mesh mesh = phantom_mesh(c, c.cavity);
  const PiecewiseCoefficient sigma(c.sigma.evaluate(mesh));
  const int n = c.configurations;
  std::vector<std::vector<std::array<double, 4>>> rows(static_cast<std::size_t>(n));
  std::vector<std::vector<double>> coeffs(static_cast<std::size_t>(n));
  parallel_for(static_cast<std::size_t>(n), jobs, [&](std::size_t i) {
    CounterRng rng(c.seed, i);
    const BoundaryData f1 = random_trace(mesh, rng, c.modes, 1.0);
    const BoundaryData f2 = random_trace(mesh, rng, c.modes, 1.0);
    NonlinearitySeries series(mesh.num_triangles(), c.series_order);
    if (!c.zero_nonlinearity) {
      for (int k = 2; k <= c.series_order; ++k) {
        const double base = 2.0 * rng.uniform() - 1.0, tilt = rng.uniform() - 0.5;
        std::vector<double> v(mesh.num_triangles());
        for (std::size_t t = 0; t < v.size(); ++t) v[t] = base + tilt * mesh.barycenter(t).x;
        series = series.with_coefficient(k, v);
        coeffs[i].push_back(base);
      }
    }
    const LinearSolver lin(mesh, sigma);
    const DerivativeLattice lat = build_lattice(lin, series, f1, f2, c.max_order);
    const double scale = c.zero_nonlinearity ? std::max(dn_derivative(lin, series, lat, 1, 0).values.norm(),
                                                        dn_derivative(lin, series, lat, 0, 1).values.norm())
                                             : 0.0;
    FdOptions fd;
    fd.step = c.fd_step;
    fd.newton.small_data_threshold = c.epsilon_max;
    for (int order = 1; order <= c.max_order; ++order)
      for (int p = order; p >= 0; --p) {
        const auto exact = dn_derivative(lin, series, lat, p, order - p).values;
        const auto approx = fd_dn_derivative(mesh, sigma, series, f1, f2, p, order - p, fd).values;
        rows[i].push_back({double(i), double(p), double(order - p), relative_discrepancy(exact, approx, scale)});
      }
  });
  Table t{{"configuration", "p", "q", "discrepancy"}, {}};
  double worst = 0.0;
  for (const auto& cfg : rows)
    for (const auto& row : cfg) {
      t.rows.push_back({row[0], row[1], row[2], row[3]});
      worst = std::max(worst, row[3]);
    }
  r.tables["discrepancies"] = std::move(t);
  r.details["series_coefficients"] = coeffs;
  add_metric(r, "max_discrepancy", worst, c.tolerance("max_discrepancy", c.zero_nonlinearity ? 1e-9 : 1e-2));
  r.mesh = mesh;
  return r;
}

RunReport localized_potentials(const ScenarioConfig& c, int) {
  RunReport r;
  const Mesh mesh = phantom_mesh(c, c.cavity);
  const PiecewiseCoefficient sigma(c.sigma.evaluate(mesh));
  const EnergyOperatorPair pair =
      build_energy_operators(mesh, sigma, region_mask_from_disk(mesh, c.d1), region_mask_from_disk(mesh, c.d2));
  const PotentialSequence seq = localized_potential_sequence(pair, c.steps, c.delta0);
  Table t{{"k", "delta", "eigenvalue", "energy_d1", "energy_d2", "ratio"}, {}};
  bool ratio_up = true, e2_down = true;
  for (std::size_t k = 0; k < seq.steps.size(); ++k) {
    const auto& s = seq.steps[k];
    t.rows.push_back({double(k), s.delta, s.eigenvalue, s.energy_d1, s.energy_d2, s.ratio()});
    if (k > 0) {
      ratio_up = ratio_up && s.ratio() > seq.steps[k - 1].ratio();
      e2_down = e2_down && s.energy_d2 <= seq.steps[k - 1].energy_d2;
    }
  }
  r.tables["potentials"] = std::move(t);
  r.details["d1_triangles"] = pair.d1.size();
  r.details["d2_triangles"] = pair.d2.size();
  add_metric(r, "ratio_strictly_increasing", ratio_up ? 1.0 : 0.0, 1.0, true);
  add_metric(r, "energy_d2_nonincreasing", e2_down ? 1.0 : 0.0, 1.0, true);
  add_metric(r, "ratio_growth", seq.steps.back().ratio() / seq.steps.front().ratio(),
             c.tolerance("ratio_growth", 10.0), true);
  r.mesh = mesh;
  return r;
}

RunReport recover_coefficients(const ScenarioConfig& c, int jobs) {
  RunReport r;
  const Mesh mesh = phantom_mesh(c, c.cavity);
  const PiecewiseCoefficient sigma_true(c.sigma.evaluate(mesh));
  const NonlinearitySeries truth = phantom_series(c, mesh, series_order(c));
  const auto fs = family(c, mesh);
  std::vector<LatticeIndex> orders = stage_orders(c.stages);
  if (c.recover_sigma) orders.insert(orders.begin(), LatticeIndex{1, 0});
  MeasurementSet data = simulate_orders(mesh, sigma_true, truth, fs, orders, jobs);
  CounterRng rng(c.seed, 1);
  if (c.noise > 0.0) add_relative_noise(data, c.noise, rng);

  PiecewiseCoefficient sigma = sigma_true;
  if (c.recover_sigma) {
    const Partition part = c.sigma.partition(mesh);
    const SigmaRecovery s = recover_sigma_linearized(mesh, part, data);
    sigma = PiecewiseCoefficient::from_regions(part, s.values);
    r.details["sigma"] = json{{"estimate", s.values}, {"truth", c.sigma.region_values()}, {"misfit", s.misfit},
                              {"condition", s.condition}};
    add_metric(r, "sigma_error", region_error(s.values, c.sigma.region_values()), c.tolerance("sigma_error", 0.05));
  }
  report_stages(r, c, run_stages(c, mesh, sigma, data, fs));
  r.mesh = mesh;
  r.coefficients = std::pair{sigma_true, truth};
  return r;
}

void cavity_metrics(RunReport& r, const ScenarioConfig& c, const CavityResult& res) {
  const CavityVerdict expected = c.cavity ? CavityVerdict::Detected : CavityVerdict::None;
  r.details["verdict"] = to_string(res.verdict);
  r.details["expected_verdict"] = to_string(expected);
  r.details["stage1_residual"] = res.stage1_residual;
  r.details["noise_floor"] = res.noise_floor;
  if (res.disk) {
    r.details["disk"] = disk_json(*res.disk);
    r.details["disk_residual"] = res.disk_residual;
  }
  r.details["refinement_steps"] = res.refinement_steps;
  add_metric(r, "verdict_matches", res.verdict == expected ? 1.0 : 0.0, 1.0, true);
  if (c.cavity && res.disk) {
    add_metric(r, "center_error",
               std::hypot(res.disk->center.x - c.cavity->center.x, res.disk->center.y - c.cavity->center.y),
               c.tolerance("center_error", c.h));
    add_metric(r, "radius_error", std::abs(res.disk->radius - c.cavity->radius), c.tolerance("radius_error", 2.0 * c.h));
  }
  Table t{{"x", "y", "radius", "residual"}, {}};
  for (const auto& m : res.landscape) t.rows.push_back({m.disk.center.x, m.disk.center.y, m.disk.radius, m.residual});
  r.tables["landscape"] = std::move(t);
}

CavityModel cavity_model(const ScenarioConfig& c) {
  CavityModel model;
  model.outer_radius = c.radius;
  model.h = c.h;
  model.gamma = c.gamma;
  model.sigma = c.sigma;
  return model;
}

RunReport detect_cavity_scenario(const ScenarioConfig& c, int jobs) {
  RunReport r;
  const Mesh mesh = phantom_mesh(c, c.cavity);
  const PiecewiseCoefficient sigma(c.sigma.evaluate(mesh));
  MeasurementSet data = simulate_orders(mesh, sigma, phantom_series(c, mesh, series_order(c)), family(c, mesh),
                                        {{1, 0}}, jobs);
  CounterRng rng(c.seed, 2);
  if (c.noise > 0.0) add_relative_noise(data, c.noise, rng);
  cavity_metrics(r, c, detect_cavity(cavity_model(c), data, c.scan));
  r.mesh = mesh;
  return r;
}

RunReport full_pipeline(const ScenarioConfig& c, int jobs) {
  RunReport r;
  const Mesh mesh = phantom_mesh(c, c.cavity);
  const PiecewiseCoefficient sigma_true(c.sigma.evaluate(mesh));
  const NonlinearitySeries truth = phantom_series(c, mesh, series_order(c));
  std::vector<LatticeIndex> orders = stage_orders(c.stages);
  orders.insert(orders.begin(), LatticeIndex{1, 0});
  MeasurementSet data = simulate_orders(mesh, sigma_true, truth, family(c, mesh), orders, jobs);
  CounterRng rng(c.seed, 3);
  if (c.noise > 0.0) add_relative_noise(data, c.noise, rng);

  // sigma on the cavity-free model, then the cavity with sigma refitted per candidate
  CavityModel model = cavity_model(c);
  const Mesh clean = model.mesh(std::nullopt);
  const SigmaRecovery s0 = recover_sigma_linearized(clean, c.sigma.partition(clean), data);
  for (std::size_t i = 0; i < model.sigma.inclusions.size(); ++i) model.sigma.inclusions[i].value = s0.values[i + 1];
  model.sigma.background = s0.values[0];
  CavityScan scan = c.scan;
  scan.refit_sigma = true;
  const CavityResult cav = detect_cavity(model, data, scan);
  cavity_metrics(r, c, cav);

  const Mesh found = model.mesh(cav.disk);
  const Partition sp = c.sigma.partition(found);
  SigmaOptions so;
  so.initial = s0.values;
  const SigmaRecovery s1 = recover_sigma_linearized(found, sp, data, so);
  r.details["sigma"] = json{{"initial_estimate", s0.values}, {"estimate", s1.values},
                            {"truth", c.sigma.region_values()}, {"misfit", s1.misfit}};
  add_metric(r, "sigma_error", region_error(s1.values, c.sigma.region_values()), c.tolerance("sigma_error", 0.05));

  // the a_m stages see the reconstructed geometry; tests are traces on its Gamma
  report_stages(r, c, run_stages(c, found, PiecewiseCoefficient::from_regions(sp, s1.values), data, family(c, found)));
  r.mesh = mesh;
  r.coefficients = std::pair{sigma_true, truth};
  return r;
}

RunReport contradiction_witness(const ScenarioConfig& c, int) {
  RunReport r;
  const Mesh mesh = phantom_mesh(c, c.cavity);
  const PiecewiseCoefficient sigma(c.sigma.evaluate(mesh));
  const int m = c.witness_order;
  const auto it = c.a.find(m);
  const PiecewiseField a = it != c.a.end() ? it->second : PiecewiseField{0.0, {}};

  // common refinement of the two layouts
  const Partition pa = a.partition(mesh), pb = c.alternative.partition(mesh);
  const int nb = pb.count;
  std::map<int, int> compact;
  Partition joint{std::vector<int>(mesh.num_triangles()), 0};
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto [pos, fresh] = compact.emplace(pa.labels[t] * nb + pb.labels[t], joint.count);
    if (fresh) ++joint.count;
    joint.labels[t] = pos->second;
  }
  const auto va = a.region_values(), vb = c.alternative.region_values();
  std::vector<double> ja(static_cast<std::size_t>(joint.count)), jb(ja.size());
  for (const auto& [key, label] : compact) {
    ja[static_cast<std::size_t>(label)] = va[static_cast<std::size_t>(key / nb)];
    jb[static_cast<std::size_t>(label)] = vb[static_cast<std::size_t>(key % nb)];
  }
  const SignSplit split = piecewise_sign_regions(mesh, joint, ja, jb);
  const double sign = split.orientation == SignCase::I ? 1.0 : -1.0;
  std::vector<double> diff(mesh.num_triangles());
  for (std::size_t t = 0; t < diff.size(); ++t) {
    const auto l = static_cast<std::size_t>(joint.labels[t]);
    diff[t] = sign * (ja[l] - jb[l]);
  }

  const EnergyOperatorPair pair = build_energy_operators(mesh, sigma, split.d1, split.d2);
  const PotentialSequence seq = localized_potential_sequence(pair, c.steps, c.delta0);
  const BoundaryData psi = window_trace(mesh, c.amplitude);
  const auto steps = contradiction_functional(mesh, sigma, diff, m, pair, seq, psi);
  const auto same = contradiction_functional(mesh, sigma, std::vector<double>(diff.size(), 0.0), m, pair, seq, psi);

  Table t{{"k", "delta", "d1", "d2", "rest", "total", "total_equal_fields"}, {}};
  bool d1_up = true;
  double equal_max = 0.0;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    t.rows.push_back({double(k), seq.steps[k].delta, steps[k].d1, steps[k].d2, steps[k].rest, steps[k].total(),
                      same[k].total()});
    if (k > 0) d1_up = d1_up && steps[k].d1 > steps[k - 1].d1;
    equal_max = std::max(equal_max, std::abs(same[k].total()));
  }
  r.tables["witness"] = std::move(t);
  r.details["orientation"] = split.orientation == SignCase::I ? "i" : "ii";
  r.details["d1_area"] = split.d1.area(mesh);
  r.details["d2_area"] = split.d2.area(mesh);
  add_metric(r, "d1_strictly_increasing", d1_up ? 1.0 : 0.0, 1.0, true);
  const double d2_ratio = steps.front().d2 != 0.0 ? std::abs(steps.back().d2 / steps.front().d2) : 0.0;
  add_metric(r, "d2_final_over_initial", d2_ratio, c.tolerance("d2_final_over_initial", 1e-3));
  add_metric(r, "equal_fields_max_total", equal_max, c.tolerance("equal_fields_max_total", 1e-12));
  r.mesh = mesh;
  return r;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::ScenarioFailed, "cannot write " + path.string());
  out << text;
}

}  // namespace

double ScenarioConfig::tolerance(const std::string& name, double fallback) const {
  const auto it = tolerances.find(name);
  return it == tolerances.end() ? fallback : it->second;
}

ScenarioConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    invalid(std::string("YAML: ") + e.what());
  }
  ScenarioConfig c = from_yaml(root);
  validate_config(c);
  return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) invalid("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void validate_config(const ScenarioConfig& c) {
  static const std::set<std::string> names{"forward_convergence",   "linearization_check", "localized_potentials",
                                           "recover_coefficients",  "detect_cavity",       "full_pipeline",
                                           "contradiction_witness"};
  if (!names.count(c.scenario)) invalid("unknown scenario '" + c.scenario + "'");
  if (!(c.radius > 0.0)) invalid("mesh.radius must be positive");
  if (!(c.h > 0.0) || c.h > 0.5 * c.radius) invalid("mesh.h must lie in (0, radius/2]");
  if (c.cavity && (c.cavity->radius <= 0.0 ||
                   std::hypot(c.cavity->center.x, c.cavity->center.y) + c.cavity->radius >= c.radius))
    invalid("mesh.cavity must lie inside the disk");
  if (c.family != "trig" && c.family != "bump") invalid("data.family must be trig or bump");
  if (c.modes < 1 || c.count < 1) invalid("data.modes and data.count must be positive");
  if (!(c.amplitude > 0.0)) invalid("data.amplitude must be positive");
  if (!(c.epsilon_max > 0.0)) invalid("data.epsilon_max must be positive");
  if (c.noise < 0.0) invalid("data.noise must be non-negative");
  for (const auto& o : c.orders)
    if (o.p < 0 || o.q < 0 || o.order() < 1) invalid("data.orders entries need p, q >= 0 and p + q >= 1");
  for (const auto& [k, f] : c.a)
    if (k < 2) invalid("phantom.a orders start at 2");
  for (double h : c.h_values)
    if (!(h > 0.0)) invalid("forward.h_values must be positive");
  if (c.scenario == "forward_convergence" && c.h_values.size() < 2) invalid("forward.h_values needs two entries");
  if (c.configurations < 1) invalid("linearization.configurations must be positive");
  if (c.max_order < 1 || c.max_order > 6) invalid("linearization.max_order must be in 1..6");
  if (c.series_order < 2) invalid("linearization.series_order must be at least 2");
  if (!(c.fd_step > 0.0)) invalid("linearization.fd_step must be positive");
  // largest stencil point: (order + 1)/2 steps along each of two unit directions
  if (c.scenario == "linearization_check" && 2.0 * ((c.max_order + 1) / 2) * c.fd_step > c.epsilon_max)
    invalid("linearization.fd_step puts stencil points outside epsilon_max");
  if (c.steps < 2 || !(c.delta0 > 0.0)) invalid("localized.steps must be >= 2 and delta0 positive");
  if (c.witness_order < 2) invalid("witness.order must be at least 2");
  for (int m : c.stages)
    if (m < 2) invalid("recovery.stages start at 2");
  for (std::size_t i = 1; i < c.stages.size(); ++i)
    if (c.stages[i] != c.stages[i - 1] + 1) invalid("recovery.stages must be consecutive");
  if (!c.stages.empty() && c.stages.front() != 2 &&
      (c.scenario == "recover_coefficients" || c.scenario == "full_pipeline"))
    invalid("recovery.stages must start at 2");
  if (!(c.tikhonov >= 0.0)) invalid("recovery.tikhonov must be non-negative");
  if (c.scan.radii.empty() || !(c.scan.grid_spacing > 0.0)) invalid("cavity_scan needs radii and a positive spacing");
  for (double rho : c.scan.radii)
    if (!(rho > 0.0)) invalid("cavity_scan.radii must be positive");
  for (const auto& [name, v] : c.tolerances)
    if (!std::isfinite(v)) invalid("tolerance " + name + " is not finite");
}

bool RunReport::passed() const {
  return std::all_of(metrics.begin(), metrics.end(), [](const Metric& m) { return m.pass; });
}

const Metric* RunReport::metric(const std::string& name) const {
  for (const auto& m : metrics)
    if (m.name == name) return &m;
  return nullptr;
}

json RunReport::summary(const ScenarioConfig& config) const {
  json j;
  j["schema_version"] = kSummarySchemaVersion;
  j["scenario"] = scenario;
  j["seed"] = config.seed;
  j["passed"] = passed();
  json ms = json::array();
  for (const auto& m : metrics) {
    json e{{"name", m.name}, {"value", m.value}};
    if (m.tolerance) {
      e["tolerance"] = *m.tolerance;
      e["comparison"] = m.at_least ? ">=" : "<=";
    }
    e["pass"] = m.pass;
    ms.push_back(std::move(e));
  }
  j["metrics"] = std::move(ms);
  j["details"] = details;
  json tables = json::array();
  for (const auto& [name, t] : this->tables) tables.push_back(name + ".csv");
  j["tables"] = std::move(tables);
  return j;
}

RunReport run_scenario(const ScenarioConfig& config, int jobs) {
  validate_config(config);
  const auto start = std::chrono::steady_clock::now();
  RunReport r;
  try {
    if (config.scenario == "forward_convergence") r = forward_convergence(config, jobs);
    else if (config.scenario == "linearization_check") r = linearization_check(config, jobs);
    else if (config.scenario == "localized_potentials") r = localized_potentials(config, jobs);
    else if (config.scenario == "recover_coefficients") r = recover_coefficients(config, jobs);
    else if (config.scenario == "detect_cavity") r = detect_cavity_scenario(config, jobs);
    else if (config.scenario == "full_pipeline") r = full_pipeline(config, jobs);
    else r = contradiction_witness(config, jobs);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigInvalid || e.code() == ErrorCode::ScenarioFailed) throw;
    throw Error(ErrorCode::ScenarioFailed, config.scenario + ": " + e.what());
  }
  r.scenario = config.scenario;
  r.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

void write_csv(std::ostream& out, const Table& table) {
  for (std::size_t i = 0; i < table.columns.size(); ++i) out << (i ? "," : "") << table.columns[i];
  out << '\n';
  char buf[32];
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", row[i]);
      out << (i ? "," : "") << buf;
    }
    out << '\n';
  }
}

void write_outputs(const RunReport& report, const ScenarioConfig& config, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "summary.json", report.summary(config).dump(2) + "\n");
  for (const auto& [name, table] : report.tables) {
    std::ostringstream s;
    write_csv(s, table);
    write_text(dir / (name + ".csv"), s.str());
  }
  if (report.mesh) {
    std::ostringstream s;
    write_mesh(s, *report.mesh);
    write_text(dir / "mesh.txt", s.str());
  }
  if (report.coefficients) {
    std::ostringstream s;
    write_coefficients(s, report.coefficients->first, report.coefficients->second);
    write_text(dir / "coefficients.txt", s.str());
  }
}

json generate_synthetic_data(const ScenarioConfig& c) {
  validate_config(c);
  if (c.amplitude > c.epsilon_max)
    throw Error(ErrorCode::PhantomOutsideWellposedness, "amplitude " + std::to_string(c.amplitude) +
                                                            " exceeds epsilon_max " + std::to_string(c.epsilon_max));
  const Mesh mesh = phantom_mesh(c, c.cavity);
  const PiecewiseCoefficient sigma(c.sigma.evaluate(mesh));
  const NonlinearitySeries series = phantom_series(c, mesh, series_order(c));
  const auto fs = family(c, mesh);

  NewtonOptions newton;
  newton.small_data_threshold = c.epsilon_max;
  for (std::size_t i = 0; i < fs.size(); ++i) {
    try {
      const auto [u, rep] = solve_semilinear(mesh, sigma, series, fs[i], newton);
      if (u.cwiseAbs().maxCoeff() > kGrowthBound * fs[i].sup_norm())
        throw Error(ErrorCode::PhantomOutsideWellposedness,
                    "solution for trace " + std::to_string(i) + " exceeds the growth bound");
    } catch (const Error& e) {
      if (e.code() == ErrorCode::PhantomOutsideWellposedness) throw;
      throw Error(ErrorCode::PhantomOutsideWellposedness,
                  "forward solve for trace " + std::to_string(i) + " failed: " + e.what());
    }
  }

  MeasurementSet data = simulate_orders(mesh, sigma, series, fs, c.orders, 1);
  CounterRng rng(c.seed, 4);
  if (c.noise > 0.0) add_relative_noise(data, c.noise, rng);

  json j;
  j["schema_version"] = kMeasurementSchemaVersion;
  j["seed"] = c.seed;
  j["noise"] = c.noise;
  j["mesh"] = json{{"radius", c.radius}, {"h", c.h}};
  if (c.cavity) j["mesh"]["cavity"] = disk_json(*c.cavity);
  j["gamma"] = json{{"start", c.gamma.start}, {"end", c.gamma.end}};
  json pos = json::array();
  for (int v : mesh.gamma_nodes()) pos.push_back({mesh.vertices()[v].x, mesh.vertices()[v].y});
  j["gamma_nodes"] = std::move(pos);
  json ex = json::array();
  for (const auto& e : data.experiments) {
    const auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    ex.push_back(json{{"order", {e.order.p, e.order.q}},
                      {"f1", vec(e.f1.values())},
                      {"f2", vec(e.f2.values())},
                      {"data", vec(e.data.values)}});
  }
  j["experiments"] = std::move(ex);
  return j;
}

MeasurementSet read_measurements(const json& file, const Mesh& mesh) {
  try {
    if (file.at("schema_version").get<int>() != kMeasurementSchemaVersion)
      throw Error(ErrorCode::ParseError, "unsupported measurement schema version");
    const std::size_t n = mesh.gamma_nodes().size();
    if (file.at("gamma_nodes").size() != n)
      throw Error(ErrorCode::DimensionMismatch, "measurement file has a different Gamma node count");
    MeasurementSet set;
    set.noise_level = file.at("noise").get<double>();
    const auto vec = [&](const json& a) {
      const auto v = a.get<std::vector<double>>();
      if (v.size() != n) throw Error(ErrorCode::DimensionMismatch, "measurement vector length differs from Gamma");
      return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    };
    for (const auto& e : file.at("experiments")) {
      const auto o = e.at("order").get<std::vector<int>>();
      if (o.size() != 2) throw Error(ErrorCode::ParseError, "order must be [p, q]");
      set.experiments.push_back(
          {BoundaryData(vec(e.at("f1"))), BoundaryData(vec(e.at("f2"))), {o[0], o[1]}, DNMeasurement{vec(e.at("data"))}});
    }
    return set;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("measurement file: ") + e.what());
  }
}

bool amplitude_wellposed(const Mesh& mesh, const PiecewiseCoefficient& sigma, const NonlinearitySeries& series,
                         double amplitude, std::uint64_t seed, const ProbeOptions& opts, int* iterations,
                         double* growth) {
  NewtonOptions newton;
  newton.max_iterations = opts.max_iterations;
  newton.small_data_threshold = std::numeric_limits<double>::infinity();
  int worst_it = 0;
  double worst_growth = 0.0;
  bool ok = true;
  for (int i = 0; i < opts.trials && ok; ++i) {
    CounterRng rng(seed, static_cast<std::uint64_t>(i));
    const BoundaryData f = random_trace(mesh, rng, opts.modes, amplitude);
    try {
      const auto [u, rep] = solve_semilinear(mesh, sigma, series, f, newton);
      const double g = u.cwiseAbs().maxCoeff() / f.sup_norm();
      worst_it = std::max(worst_it, rep.iterations);
      worst_growth = std::max(worst_growth, g);
      ok = rep.converged && g <= opts.growth_bound;
    } catch (const Error&) {
      ok = false;
    }
  }
  if (iterations) *iterations = worst_it;
  if (growth) *growth = worst_growth;
  return ok;
}

WellposednessProbe probe_wellposedness(const Mesh& mesh, const PiecewiseCoefficient& sigma,
                                       const NonlinearitySeries& series, std::uint64_t seed,
                                       const ProbeOptions& opts) {
  const auto ok = [&](double a) { return amplitude_wellposed(mesh, sigma, series, a, seed, opts); };
  double lo = opts.start;
  if (!ok(lo)) throw Error(ErrorCode::OutsideSmallDataRegime, "the starting amplitude already fails");
  double hi = 2.0 * lo;
  while (ok(hi)) {
    lo = hi;
    hi *= 2.0;
    if (hi > opts.ceiling) throw Error(ErrorCode::InvalidArgument, "no failing amplitude below the ceiling");
  }
  WellposednessProbe p;
  for (; p.bisection_steps < opts.bisection_steps && hi - lo > 1e-6 * hi; ++p.bisection_steps) {
    const double mid = std::sqrt(lo * hi);
    (ok(mid) ? lo : hi) = mid;
  }
  p.epsilon = lo;
  p.failing = hi;
  amplitude_wellposed(mesh, sigma, series, lo, seed, opts, &p.max_iterations_used, &p.max_growth);
  return p;
}

}  // namespace semirec

// Acceptance criteria. One line per criterion; exit status 1 when any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "semirec/scenarios.hpp"

using namespace semirec;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, double time_limit, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (time_limit > 0.0 && secs > time_limit) {
    o.pass = false;
    o.detail += "; runtime over " + std::to_string(time_limit) + " s";
  }
  if (!o.pass) ++failures;
  std::printf("%s  [%d] %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

RunReport run(const std::string& yaml) { return run_scenario(parse_config(yaml), 4); }

double metric(const RunReport& r, const std::string& name) {
  const Metric* m = r.metric(name);
  if (!m) throw std::runtime_error("missing metric " + name);
  return m->value;
}

// ---------------------------------------------------------------- configs

const char* kForward = R"(
scenario: forward_convergence
forward: {h_values: [0.2, 0.1, 0.05, 0.025]}
)";

const char* kLinearization = R"(
scenario: linearization_check
seed: 11
mesh: {h: 0.15}
gamma: upper_half
data: {modes: 4, epsilon_max: 0.1}
linearization: {configurations: 10, max_order: 4, series_order: 4, fd_step: 0.01}
)";

const char* kLinearizationZero = R"(
scenario: linearization_check
seed: 12
mesh: {h: 0.15}
gamma: upper_half
data: {modes: 4, epsilon_max: 0.1}
linearization: {configurations: 10, max_order: 4, zero_nonlinearity: true, fd_step: 0.01}
)";

const char* kLocalized = R"(
scenario: localized_potentials
mesh: {h: 0.1}
gamma: upper_half
localized:
  d1: {center: [0.0, 0.75], radius: 0.2}
  d2: {center: [0.0, -0.55], radius: 0.35}
  steps: 24
  delta0: 0.01
)";

std::string recovery_yaml(const char* gamma, bool with_a3) {
  std::string s = std::string(R"(
scenario: recover_coefficients
seed: 5
mesh: {h: 0.1}
gamma: )") + gamma + R"(
phantom:
  a:
    2:
      background: 0.0
      inclusions: [{center: [0.0, 0.0], radius: 0.45, value: 1.0}]
)";
  if (with_a3)
    s += R"(    3:
      background: 0.0
      inclusions: [{center: [0.2, 0.1], radius: 0.4, value: 1.0}]
recovery: {stages: [2, 3]}
)";
  return s + "data: {family: bump, count: 8, amplitude: 0.05}\n";
}

std::string cavity_yaml(bool cavity) {
  return std::string(R"(
scenario: detect_cavity
seed: 3
mesh:
  h: 0.1
)") + (cavity ? "  cavity: {center: [0.15, -0.1], radius: 0.3}\n" : "") + R"(
gamma: upper_half
phantom:
  a: {2: 1.0}
data: {family: bump, count: 8, amplitude: 0.05}
)";
}

const char* kWitness = R"(
scenario: contradiction_witness
mesh: {h: 0.1}
gamma: upper_half
phantom:
  a:
    2:
      background: 0.0
      inclusions: [{center: [0.0, 0.75], radius: 0.2, value: 1.0}]
witness:
  order: 2
  alternative:
    background: 0.0
    inclusions: [{center: [0.0, -0.55], radius: 0.15, value: 1.0}]
localized: {steps: 24, delta0: 0.01}
)";

const char* kPipeline = R"(
scenario: full_pipeline
seed: 9
mesh:
  h: 0.12
  cavity: {center: [0.1, -0.2], radius: 0.3}
gamma: full
phantom:
  sigma:
    background: 1.0
    inclusions: [{center: [-0.45, 0.35], radius: 0.25, value: 2.0}]
  a:
    2:
      background: 0.0
      inclusions: [{center: [0.35, 0.4], radius: 0.3, value: 1.0}]
data: {family: bump, count: 10, amplitude: 0.05, noise: 0.001}
)";

// ---------------------------------------------------------------- chain-rule oracle

// Set partitions of {0..p+q-1} by restricted growth strings, keyed by the
// sorted multiset of block shapes (#type-1, #type-2); elements < p are type 1.
std::map<std::vector<std::pair<int, int>>, long> brute_force_shapes(int p, int q) {
  const int n = p + q;
  std::map<std::vector<std::pair<int, int>>, long> out;
  std::vector<int> a(static_cast<std::size_t>(n), 0);
  std::function<void(int, int)> rec = [&](int i, int blocks) {
    if (i == n) {
      std::vector<std::pair<int, int>> shape(static_cast<std::size_t>(blocks), {0, 0});
      for (int k = 0; k < n; ++k) (k < p ? shape[a[k]].first : shape[a[k]].second)++;
      std::sort(shape.begin(), shape.end());
      ++out[shape];
      return;
    }
    for (int b = 0; b <= blocks; ++b) {
      a[static_cast<std::size_t>(i)] = b;
      rec(i + 1, std::max(blocks, b + 1));
    }
  };
  rec(0, 0);
  return out;
}

Outcome chain_rule_counts() {
  int checked = 0;
  for (int n = 2; n <= 5; ++n)
    for (int p = 0; p <= n; ++p) {
      const int q = n - p;
      auto expected = brute_force_shapes(p, q);
      expected.erase({{p, q}});  // the single block is the linear term
      std::map<std::vector<std::pair<int, int>>, long> got;
      for (const auto& t : chain_rule_terms(p, q)) {
        std::vector<std::pair<int, int>> shape;
        for (const auto& b : t.blocks) shape.push_back({b.p, b.q});
        std::sort(shape.begin(), shape.end());
        got[shape] += t.count;
      }
      if (got != expected) return {false, "mismatch at (p,q)=(" + std::to_string(p) + "," + std::to_string(q) + ")"};
      ++checked;
    }
  return {true, std::to_string(checked) + " lattice indices"};
}

double chain_rule_fd_error(const Mesh& m, const NonlinearitySeries& series, int p, int q) {
  const auto sigma = PiecewiseCoefficient::constant(m.num_triangles(), 1.0);
  const BoundaryData f1 = window_trace(m, 1.0), f2 = trig_trace(m, 1, true, 1.0);
  const DerivativeLattice lat = build_lattice(m, sigma, series, f1, f2, p + q);
  const FdOptions fd;
  const double s = fd.step;
  const auto w1 = central_difference_weights(p), w2 = central_difference_weights(q);
  const int r1 = static_cast<int>(w1.size() / 2), r2 = static_cast<int>(w2.size() / 2);
  Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor> acc = Eigen::MatrixXd::Zero(m.num_triangles(), 3);
  for (int i = -r1; i <= r1; ++i)
    for (int j = -r2; j <= r2; ++j) {
      const double w = w1[i + r1] * w2[j + r2];
      if (w == 0.0) continue;
      const NodalField u = solve_semilinear(m, sigma, series, (i * s) * f1 + (j * s) * f2, fd.newton).first;
      acc += w * nonlinearity_at_quadrature(m, series, u, Quadrature::Interior3).values;
    }
  acc /= std::pow(s, p + q);
  const auto exact = chain_rule_source(m, series, lat, p, q).values;
  return (acc - exact).norm() / exact.norm();
}

// ---------------------------------------------------------------- determinism

std::map<std::string, std::string> files_in(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    out[e.path().filename().string()] = ss.str();
  }
  return out;
}

}  // namespace

int main() {
  std::printf("acceptance criteria\n");

  criterion(1, "forward convergence", 30.0, [] {
    const RunReport r = run(kForward);
    const double dev = metric(r, "slope_deviation");
    return Outcome{dev <= 0.2, "slope " + fmt("%.4f", r.details.at("slope").get<double>()) + ", |slope-2| <= 0.2"};
  });

  criterion(2, "well-posedness contract", 60.0, [] {
    const Mesh m = tag_gamma(build_disk_mesh(1.0, std::nullopt, 0.1), {0.0, kPi});
    const auto sigma = PiecewiseCoefficient::constant(m.num_triangles(), 1.0);
    const auto a2 = NonlinearitySeries(m.num_triangles(), 2).with_coefficient(2, std::vector<double>(m.num_triangles(), 1.0));
    ProbeOptions po;
    po.trials = 20;
    po.max_iterations = 8;
    po.growth_bound = 3.0;
    const WellposednessProbe p = probe_wellposedness(m, sigma, a2, 2024, po);
    int iters = 0;
    double growth = 0.0;
    const bool ok = amplitude_wellposed(m, sigma, a2, p.epsilon, 2024, po, &iters, &growth);
    const bool fails_above = !amplitude_wellposed(m, sigma, a2, 10.0 * p.epsilon, 2024, po);
    return Outcome{ok && iters <= 8 && growth <= 3.0 && fails_above,
                   "epsilon " + fmt("%.4g", p.epsilon) + ", max Newton iterations " + std::to_string(iters) +
                       ", max growth " + fmt("%.3f", growth) + ", fails at 10 epsilon: " + (fails_above ? "yes" : "no")};
  });

  criterion(3, "linearization oracle", 120.0, [] {
    const double d = metric(run(kLinearization), "max_discrepancy");
    const double z = metric(run(kLinearizationZero), "max_discrepancy");
    return Outcome{d <= 1e-2 && z <= 1e-9,
                   "max discrepancy " + fmt("%.3g", d) + " (<= 1e-2), a=0: " + fmt("%.3g", z) + " (<= 1e-9)"};
  });

  criterion(4, "chain-rule source", 0.0, [] {
    const Outcome counts = chain_rule_counts();
    const Mesh m = tag_gamma(build_disk_mesh(1.0, std::nullopt, 0.15), {0.0, kPi});
    NonlinearitySeries series(m.num_triangles(), 4);
    for (int k = 2; k <= 4; ++k) {
      std::vector<double> v(m.num_triangles());
      for (std::size_t t = 0; t < v.size(); ++t) v[t] = (k % 2 ? -0.7 : 1.0) + 0.3 * m.barycenter(t).x;
      series = series.with_coefficient(k, v);
    }
    double worst = 0.0;
    for (int n = 2; n <= 4; ++n)
      for (int p = 0; p <= n; ++p) worst = std::max(worst, chain_rule_fd_error(m, series, p, n - p));
    return Outcome{counts.pass && worst <= 1e-2,
                   "FD relative error " + fmt("%.3g", worst) + " (<= 1e-2), counts: " + counts.detail};
  });

  criterion(5, "localized potentials", 60.0, [] {
    const RunReport r = run(kLocalized);
    const double growth = metric(r, "ratio_growth");
    const bool up = metric(r, "ratio_strictly_increasing") == 1.0, e2 = metric(r, "energy_d2_nonincreasing") == 1.0;
    const auto steps = r.tables.at("potentials").rows.size();
    return Outcome{up && e2 && growth >= 10.0 && steps >= 5,
                   std::to_string(steps) + " steps, ratio growth " + fmt("%.3g", growth) +
                       " (>= 10), strictly increasing: " + (up ? "yes" : "no") + ", E(D2) nonincreasing: " +
                       (e2 ? "yes" : "no")};
  });

  criterion(6, "coefficient recovery", 120.0, [] {
    const double full = metric(run(recovery_yaml("full", false)), "a2_error");
    const double quarter = metric(run(recovery_yaml("quarter", false)), "a2_error");
    const double a3 = metric(run(recovery_yaml("full", true)), "a3_error");
    return Outcome{full <= 0.05 && quarter <= 0.15 && a3 <= 0.15,
                   "a2 full " + fmt("%.2e", full) + " (<= 5%), a2 quarter " + fmt("%.2e", quarter) +
                       " (<= 15%), a3 " + fmt("%.2e", a3) + " (<= 15%)"};
  });

  criterion(7, "cavity detection", 120.0, [] {
    const RunReport none = run(cavity_yaml(false));
    const RunReport cav = run(cavity_yaml(true));
    const std::string v0 = none.details.at("verdict"), v1 = cav.details.at("verdict");
    const double ce = cav.metric("center_error") ? metric(cav, "center_error") : INFINITY;
    const double re = cav.metric("radius_error") ? metric(cav, "radius_error") : INFINITY;
    return Outcome{v0 == "none" && v1 == "detected" && ce <= 0.1 && re <= 0.2,
                   "no cavity -> " + v0 + ", r=0.3 -> " + v1 + ", center error " + fmt("%.3f", ce) +
                       " (<= h=0.1), radius error " + fmt("%.3f", re) + " (<= 2h)"};
  });

  criterion(8, "contradiction witness", 0.0, [] {
    const RunReport r = run(kWitness);
    const bool up = metric(r, "d1_strictly_increasing") == 1.0;
    const double d2 = metric(r, "d2_final_over_initial"), eq = metric(r, "equal_fields_max_total");
    return Outcome{up && d2 < 1e-3 && eq <= 1e-12,
                   std::string("D1 strictly increasing: ") + (up ? "yes" : "no") + ", D2 final/initial " +
                       fmt("%.2e", d2) + " (< 1e-3), equal-field total " + fmt("%.1e", eq) + " (<= 1e-12)"};
  });

  criterion(9, "determinism", 0.0, [] {
    const fs::path root = fs::temp_directory_path() / "semirec_acceptance";
    fs::remove_all(root);
    int compared = 0;
    const std::vector<std::string> configs{kForward,  kLinearization, kLocalized,          recovery_yaml("quarter", true),
                                           kWitness,  cavity_yaml(true), kPipeline};
    for (std::size_t i = 0; i < configs.size(); ++i) {
      const ScenarioConfig c = parse_config(configs[i]);
      std::map<std::string, std::string> first;
      for (int jobs : {1, 4}) {
        const fs::path dir = root / (std::to_string(i) + "_" + std::to_string(jobs));
        write_outputs(run_scenario(c, jobs), c, dir);
        const auto files = files_in(dir);
        if (jobs == 1) {
          first = files;
        } else if (files != first) {
          return Outcome{false, c.scenario + " outputs differ between runs"};
        }
      }
      compared += static_cast<int>(first.size());
    }
    const ScenarioConfig g = parse_config(recovery_yaml("quarter", false) + "seed: 8\n");
    ScenarioConfig noisy = g;
    noisy.noise = 0.01;
    if (generate_synthetic_data(noisy).dump() != generate_synthetic_data(noisy).dump())
      return Outcome{false, "measurement files differ"};
    fs::remove_all(root);
    return Outcome{true, std::to_string(compared) + " output files byte-identical across re-runs and job counts"};
  });

  std::printf("%s: %d of 9 criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}

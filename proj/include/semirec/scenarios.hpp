#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "semirec/error.hpp"
#include "semirec/recovery.hpp"

namespace semirec {

inline constexpr int kSummarySchemaVersion = 1;
inline constexpr int kMeasurementSchemaVersion = 1;

struct ScenarioConfig {
  std::string scenario;
  std::uint64_t seed = 1;
  std::string output_dir = "out";

  // mesh
  double radius = 1.0;
  double h = 0.1;
  std::optional<Disk> cavity;
  AngularArc gamma{0.0, 6.283185307179586};

  // phantom
  PiecewiseField sigma{1.0, {}};
  std::map<int, PiecewiseField> a;  // order k >= 2 -> a_k layout

  // boundary data
  std::string family = "bump";  // trig | bump
  int modes = 3;                // trig: 2*modes traces
  int count = 6;                // bump: number of bumps
  double amplitude = 0.05;
  double epsilon_max = 0.1;
  double noise = 0.0;
  std::vector<LatticeIndex> orders{{1, 0}, {2, 0}};

  // forward_convergence
  std::vector<double> h_values{0.2, 0.1, 0.05, 0.025};

  // linearization_check
  int configurations = 10;
  int max_order = 4;
  int series_order = 4;
  bool zero_nonlinearity = false;
  double fd_step = 1e-2;

  // localized_potentials and contradiction_witness
  Disk d1{{0.0, 0.75}, 0.2};
  Disk d2{{0.0, -0.55}, 0.35};
  int steps = 24;
  double delta0 = 1e-2;
  int witness_order = 2;
  PiecewiseField alternative{0.0, {}};  // the competing a_m

  // recover_coefficients and full_pipeline
  std::vector<int> stages{2};
  bool recover_sigma = false;
  double tikhonov = 1e-8;

  // detect_cavity and full_pipeline
  CavityScan scan;

  std::map<std::string, double> tolerances;

  double tolerance(const std::string& name, double fallback) const;
};

/// Parses the YAML text of a scenario configuration. Unknown keys and
/// out-of-range values raise ConfigInvalid.
ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::filesystem::path& path);
void validate_config(const ScenarioConfig& config);

struct Metric {
  std::string name;
  double value = 0.0;
  std::optional<double> tolerance;  // pass iff value <= tolerance (or >= when `at_least`)
  bool at_least = false;
  bool pass = true;
};

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct RunReport {
  std::string scenario;
  double wall_clock_seconds = 0.0;
  std::vector<Metric> metrics;
  std::map<std::string, Table> tables;
  nlohmann::ordered_json details = nlohmann::ordered_json::object();
  std::optional<Mesh> mesh;
  std::optional<std::pair<PiecewiseCoefficient, NonlinearitySeries>> coefficients;

  bool passed() const;
  const Metric* metric(const std::string& name) const;
  /// Deterministic summary (no wall-clock).
  nlohmann::ordered_json summary(const ScenarioConfig& config) const;
};

/// Runs the named scenario. `jobs` bounds the worker threads used for
/// independent steps; results do not depend on it.
RunReport run_scenario(const ScenarioConfig& config, int jobs = 1);

/// summary.json, one CSV per table, mesh.txt and coefficients.txt.
void write_outputs(const RunReport& report, const ScenarioConfig& config, const std::filesystem::path& dir);

void write_csv(std::ostream& out, const Table& table);

/// Synthetic DN-derivative data for the configured phantom and family.
/// Errors: PhantomOutsideWellposedness when the amplitude exceeds
/// epsilon_max or a forward Newton solve at that amplitude fails.
nlohmann::ordered_json generate_synthetic_data(const ScenarioConfig& config);
MeasurementSet read_measurements(const nlohmann::ordered_json& file, const Mesh& mesh);

struct WellposednessProbe {
  double epsilon = 0.0;        // largest amplitude found to pass
  double failing = 0.0;        // smallest amplitude found to fail
  int bisection_steps = 0;
  int max_iterations_used = 0; // at epsilon
  double max_growth = 0.0;     // max ||u||/||f|| at epsilon
};

struct ProbeOptions {
  int trials = 20;
  int modes = 4;
  int max_iterations = 8;
  double growth_bound = 3.0;
  double start = 1e-3;
  double ceiling = 1e3;
  int bisection_steps = 30;
};

/// True when every one of `opts.trials` random Gamma traces of sup norm
/// `amplitude` converges within opts.max_iterations Newton steps with
/// ||u||_sup <= growth_bound * amplitude.
bool amplitude_wellposed(const Mesh& mesh, const PiecewiseCoefficient& sigma, const NonlinearitySeries& series,
                         double amplitude, std::uint64_t seed, const ProbeOptions& opts, int* iterations = nullptr,
                         double* growth = nullptr);

/// Doubling then bisection on the amplitude.
WellposednessProbe probe_wellposedness(const Mesh& mesh, const PiecewiseCoefficient& sigma,
                                       const NonlinearitySeries& series, std::uint64_t seed,
                                       const ProbeOptions& opts = {});

}  // namespace semirec

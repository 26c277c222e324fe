#include "semirec/traces.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "semirec/error.hpp"

namespace semirec {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

}  // namespace

Eigen::VectorXd gamma_window(const Mesh& mesh) {
  const auto& gamma = mesh.gamma_nodes();
  const auto ng = static_cast<Eigen::Index>(gamma.size());
  std::vector<int> outer;
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v)
    if (mesh.node_tags()[v] == NodeTag::OuterGamma || mesh.node_tags()[v] == NodeTag::OuterRest)
      outer.push_back(static_cast<int>(v));
  std::stable_sort(outer.begin(), outer.end(), [&](int a, int b) {
    return mesh.angle_of(mesh.vertices()[a]) < mesh.angle_of(mesh.vertices()[b]);
  });

  // Graph distance (in boundary edges) to the nearest non-Gamma outer node.
  const int n = static_cast<int>(outer.size());
  std::vector<int> dist(n, std::numeric_limits<int>::max());
  for (int i = 0; i < n; ++i)
    if (mesh.node_tags()[outer[i]] != NodeTag::OuterGamma) dist[i] = 0;
  for (int sweep = 0; sweep < 2; ++sweep)
    for (int step = 0; step < 2 * n; ++step) {
      const int i = sweep == 0 ? step % n : (2 * n - 1 - step) % n;
      const int prev = sweep == 0 ? (i + n - 1) % n : (i + 1) % n;
      if (dist[prev] != std::numeric_limits<int>::max()) dist[i] = std::min(dist[i], dist[prev] + 1);
    }

  Eigen::VectorXd w = Eigen::VectorXd::Ones(ng);
  for (int i = 0; i < n; ++i) {
    const int gi = mesh.gamma_index()[outer[i]];
    if (gi < 0 || dist[i] == std::numeric_limits<int>::max()) continue;
    w[gi] = smoothstep(dist[i] / 3.0);
  }
  return w;
}

BoundaryData trig_trace(const Mesh& mesh, int mode, bool sine, double amplitude) {
  const Eigen::VectorXd w = gamma_window(mesh);
  Eigen::VectorXd v(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double th = mesh.angle_of(mesh.vertices()[mesh.gamma_nodes()[i]]);
    v[i] = amplitude * w[i] * (sine ? std::sin(mode * th) : std::cos(mode * th));
  }
  return BoundaryData(std::move(v));
}

BoundaryData bump_trace(const Mesh& mesh, double center_angle, double half_width, double amplitude) {
  if (!(half_width > 0.0)) throw Error(ErrorCode::InvalidArgument, "bump half width must be positive");
  const Eigen::VectorXd w = gamma_window(mesh);
  Eigen::VectorXd v(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double th = mesh.angle_of(mesh.vertices()[mesh.gamma_nodes()[i]]);
    double d = std::fmod(std::abs(th - center_angle), kTwoPi);
    d = std::min(d, kTwoPi - d);
    const double c = d < half_width ? std::cos(0.5 * std::numbers::pi * d / half_width) : 0.0;
    v[i] = amplitude * w[i] * c * c;
  }
  return BoundaryData(std::move(v));
}

BoundaryData window_trace(const Mesh& mesh, double amplitude) { return BoundaryData(amplitude * gamma_window(mesh)); }

std::vector<BoundaryData> trig_family(const Mesh& mesh, int modes, double amplitude) {
  std::vector<BoundaryData> out;
  for (int k = 1; k <= modes; ++k) {
    out.push_back(trig_trace(mesh, k, false, amplitude));
    out.push_back(trig_trace(mesh, k, true, amplitude));
  }
  return out;
}

std::vector<BoundaryData> bump_family(const Mesh& mesh, int count, double amplitude) {
  const auto& gamma = mesh.gamma_nodes();
  const double first = mesh.angle_of(mesh.vertices()[gamma.front()]);
  double last = mesh.angle_of(mesh.vertices()[gamma.back()]);
  while (last <= first) last += kTwoPi;
  const bool full = gamma.size() == static_cast<std::size_t>(std::count_if(
                                        mesh.node_tags().begin(), mesh.node_tags().end(), [](NodeTag t) {
                                          return t == NodeTag::OuterGamma || t == NodeTag::OuterRest;
                                        }));
  const double span = full ? kTwoPi : last - first;
  std::vector<BoundaryData> out;
  for (int k = 0; k < count; ++k) {
    const double c = full ? first + span * k / count : first + span * (k + 0.5) / count;
    const double half_width = full ? 2.0 * span / count : 1.5 * span / count;
    out.push_back(bump_trace(mesh, c, half_width, amplitude));
  }
  return out;
}

std::uint64_t CounterRng::next_u64() {
  return splitmix64(splitmix64(seed_ ^ splitmix64(stream_)) + counter_++);
}

double CounterRng::uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

double CounterRng::normal() {
  const double u1 = uniform(), u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

BoundaryData random_trace(const Mesh& mesh, CounterRng& rng, int modes, double sup_norm) {
  const Eigen::VectorXd w = gamma_window(mesh);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(w.size());
  std::vector<double> a(static_cast<std::size_t>(modes) + 1), b(static_cast<std::size_t>(modes) + 1);
  for (int k = 0; k <= modes; ++k) {
    a[k] = rng.normal();
    b[k] = rng.normal();
  }
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double th = mesh.angle_of(mesh.vertices()[mesh.gamma_nodes()[i]]);
    double s = 0.0;
    for (int k = 0; k <= modes; ++k) s += a[k] * std::cos(k * th) + b[k] * std::sin(k * th);
    v[i] = w[i] * s;
  }
  const double m = v.cwiseAbs().maxCoeff();
  if (m > 0.0) v *= sup_norm / m;
  return BoundaryData(std::move(v));
}

}  // namespace semirec

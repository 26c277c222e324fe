#pragma once

#include <cstdint>
#include <vector>

#include "semirec/fem.hpp"

namespace semirec {

/// Weight per Gamma node: 1 away from the ends of Gamma, smoothly ramping to
/// 0 over the two boundary edges next to each end. Identically 1 when Gamma
/// is the whole outer boundary.
Eigen::VectorXd gamma_window(const Mesh& mesh);

/// amplitude * window * cos(mode * angle) (or sin when `sine`).
BoundaryData trig_trace(const Mesh& mesh, int mode, bool sine, double amplitude);

/// Non-negative bump amplitude * window * cos^2(pi/2 * d / half_width) for
/// angular distance d < half_width from `center_angle`, zero elsewhere.
BoundaryData bump_trace(const Mesh& mesh, double center_angle, double half_width, double amplitude);

/// Windowed constant: the simplest non-negative Gamma datum.
BoundaryData window_trace(const Mesh& mesh, double amplitude);

/// Trig traces for modes 1..modes (cos and sin each), `2*modes` items.
std::vector<BoundaryData> trig_family(const Mesh& mesh, int modes, double amplitude);

/// `count` bumps with centres spread evenly over Gamma.
std::vector<BoundaryData> bump_family(const Mesh& mesh, int count, double amplitude);

/// Counter-based random stream: value i of stream s under a seed is a pure
/// function of (seed, s, i), so draw order across threads cannot change results.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

  std::uint64_t next_u64();
  /// Uniform in (0, 1).
  double uniform();
  double normal();
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

/// Random combination of windowed trig modes 0..modes, scaled to the given sup norm.
BoundaryData random_trace(const Mesh& mesh, CounterRng& rng, int modes, double sup_norm);

}  // namespace semirec

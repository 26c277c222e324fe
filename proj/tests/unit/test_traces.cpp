#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "semirec/traces.hpp"

using namespace semirec;
using fixtures::kPi;

TEST_CASE("window is one inside Gamma and ramps to zero at its ends") {
  const Mesh& half = fixtures::half_disk_gamma(0.1);
  const Eigen::VectorXd w = gamma_window(half);
  const auto n = w.size();
  CHECK(w[0] > 0.0);
  CHECK(w[0] < w[1]);
  CHECK(w[1] < w[2]);
  CHECK(w[2] == 1.0);
  CHECK(w[n - 1] == doctest::Approx(w[0]));
  CHECK(w.minCoeff() >= 0.0);
  CHECK(gamma_window(fixtures::disk(0.1)).minCoeff() == 1.0);
}

TEST_CASE("trace families") {
  const Mesh& m = fixtures::half_disk_gamma(0.1);
  const auto trig = trig_family(m, 3, 0.05);
  CHECK(trig.size() == 6);
  for (const auto& f : trig) CHECK(f.sup_norm() <= 0.05 + 1e-15);
  for (const auto& b : bump_family(m, 4, 1.0)) {
    CHECK(b.values().minCoeff() >= 0.0);
    CHECK(b.sup_norm() > 0.0);
  }
  const BoundaryData bump = bump_trace(m, kPi / 2, 0.3, 1.0);
  for (Eigen::Index i = 0; i < bump.values().size(); ++i) {
    const double th = m.angle_of(m.vertices()[m.gamma_nodes()[i]]);
    if (std::abs(th - kPi / 2) >= 0.3) CHECK(bump.values()[i] == 0.0);
  }
}

TEST_CASE("counter-based random streams") {
  CounterRng a(1, 2), b(1, 2), c(1, 3), d(2, 2);
  for (int i = 0; i < 10; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    CHECK(x != c.next_u64());
    CHECK(x != d.next_u64());
  }
  CounterRng u(7, 0);
  double mean = 0.0, var = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double z = u.normal();
    mean += z;
    var += z * z;
  }
  mean /= n;
  var = var / n - mean * mean;
  CHECK(std::abs(mean) < 0.03);
  CHECK(std::abs(var - 1.0) < 0.05);

  const Mesh& m = fixtures::half_disk_gamma(0.1);
  CounterRng r(3, 0);
  const BoundaryData f = random_trace(m, r, 4, 0.02);
  CHECK(f.sup_norm() == doctest::Approx(0.02));
}

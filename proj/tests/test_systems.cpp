#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dymon/systems.hpp"

using namespace dymon;

TEST_CASE("rk4 with zero derivative leaves the state unchanged") {
  auto deriv = [](const std::vector<double>& s) {
    return std::vector<double>(s.size(), 0.0);
  };
  const auto next = rk4_step(deriv, {1.5, -2.0}, 0.1);
  CHECK(next[0] == 1.5);
  CHECK(next[1] == -2.0);
}

TEST_CASE("rk4 on dx/dt = x reproduces the quartic taylor expansion") {
  auto deriv = [](const std::vector<double>& s) {
    return std::vector<double>{s[0]};
  };
  const double h = 0.1;
  // 1 + h + h^2/2 + h^3/6 + h^4/24
  const double expected = 1.0 + h + h * h / 2.0 + h * h * h / 6.0 +
                          h * h * h * h / 24.0;
  CHECK(rk4_step(deriv, {1.0}, h)[0] == Catch::Approx(expected).margin(1e-15));
}

TEST_CASE("rk4 on dx/dt = 1 advances by exactly dt") {
  auto deriv = [](const std::vector<double>& s) {
    return std::vector<double>(s.size(), 1.0);
  };
  CHECK(rk4_step(deriv, {3.0}, 0.25)[0] == 3.25);
}

TEST_CASE("rk4 rejects nonpositive dt") {
  auto deriv = [](const std::vector<double>& s) { return s; };
  CHECK_THROWS_AS(rk4_step(deriv, {1.0}, 0.0), config_error);
}

TEST_CASE("rk4 global error shrinks by about 2^4 when halving dt") {
  // small-angle pendulum has the analytic solution theta = theta0 cos(w t);
  // g = L gives w = 1, keeping the leading h^4 phase error dominant at t = 1
  const double g = 1.0, length = 1.0, theta0 = 1e-3;
  const double w = std::sqrt(g / length);
  auto deriv = [&](const std::vector<double>& s) {
    return std::vector<double>{s[1], -(g / length) * s[0]};
  };
  auto global_error = [&](double dt) {
    std::vector<double> s{theta0, 0.0};
    const std::size_t steps = static_cast<std::size_t>(std::llround(1.0 / dt));
    for (std::size_t i = 0; i < steps; ++i) s = rk4_step(deriv, s, dt);
    return std::fabs(s[0] - theta0 * std::cos(w * 1.0));
  };
  const double ratio = global_error(0.01) / global_error(0.005);
  CHECK(ratio > 12.0);
  CHECK(ratio < 20.0);
}

TEST_CASE("pendulum at the stable equilibrium stays put") {
  const Trajectory traj = simulate_pendulum(0.0, 0.0, 9.81, 1.0, 0.01, 100);
  for (std::size_t t = 0; t < traj.states.rows(); ++t) {
    CHECK(traj.states(t, 0) == 0.0);
    CHECK(traj.states(t, 1) == -1.0);
  }
}

TEST_CASE("pendulum energy drifts less than 1e-6 over 10000 steps") {
  const double g = 9.81, length = 1.0;
  auto deriv = [&](const std::vector<double>& s) {
    return pendulum_deriv(s, g, length);
  };
  std::vector<double> s{2.0, 0.0};
  const double e0 = pendulum_energy(s[0], s[1], g, length);
  double max_drift = 0.0;
  for (int i = 0; i < 10000; ++i) {
    s = rk4_step(deriv, s, 0.001);
    const double e = pendulum_energy(s[0], s[1], g, length);
    max_drift = std::max(max_drift, std::fabs(e - e0) / std::fabs(e0));
  }
  CHECK(max_drift < 1e-6);
}

TEST_CASE("pendulum states lie on the circle of radius L") {
  const Trajectory traj = simulate_pendulum(2.5, 1.0, 9.81, 1.7, 0.01, 500);
  for (std::size_t t = 0; t < traj.states.rows(); ++t) {
    const double r2 = traj.states(t, 0) * traj.states(t, 0) +
                      traj.states(t, 1) * traj.states(t, 1);
    CHECK(std::fabs(r2 - 1.7 * 1.7) < 1e-12);
  }
}

TEST_CASE("double pendulum equilibrium is constant") {
  const Trajectory traj =
      simulate_double_pendulum(0.0, 0.0, 0.0, 0.0, {}, 0.005, 100);
  for (std::size_t t = 0; t < traj.states.rows(); ++t) {
    CHECK(traj.states(t, 0) == 0.0);
    CHECK(traj.states(t, 1) == -1.0);
    CHECK(traj.states(t, 2) == 0.0);
    CHECK(traj.states(t, 3) == -2.0);
  }
}

TEST_CASE("double pendulum energy drifts less than 1e-5 over 10000 steps") {
  const DoublePendulumParams p;
  auto deriv = [&](const std::vector<double>& s) {
    return double_pendulum_deriv(s, p);
  };
  std::vector<double> s{2.0, 1.0, 0.0, 0.0};
  const double e0 = double_pendulum_energy(s, p);
  double max_drift = 0.0;
  for (int i = 0; i < 10000; ++i) {
    s = rk4_step(deriv, s, 0.001);
    const double e = double_pendulum_energy(s, p);
    max_drift = std::max(max_drift, std::fabs(e - e0) / std::fabs(e0));
  }
  CHECK(max_drift < 1e-5);
}

TEST_CASE("double pendulum is chaotic at high energy") {
  const DoublePendulumParams p;
  auto deriv = [&](const std::vector<double>& s) {
    return double_pendulum_deriv(s, p);
  };
  std::vector<double> a{3.0, 2.5, 0.0, 0.0};
  std::vector<double> b{3.0 + 1e-8, 2.5, 0.0, 0.0};
  const double sep0 = 1e-8;
  double sep = sep0;
  for (int i = 0; i < 5000; ++i) {
    a = rk4_step(deriv, a, 0.005);
    b = rk4_step(deriv, b, 0.005);
    double d2 = 0.0;
    for (std::size_t k = 0; k < 4; ++k) d2 += (a[k] - b[k]) * (a[k] - b[k]);
    sep = std::max(sep, std::sqrt(d2));
  }
  CHECK(sep / sep0 >= 1e3);
}

TEST_CASE("gmm pdf peak, symmetry and normalization") {
  const GmmSpec single{{{1.0, 0.0, 1.0}}};
  CHECK(gmm_pdf(single, 0.0) ==
        Catch::Approx(1.0 / std::sqrt(2.0 * 3.14159265358979323846))
            .epsilon(1e-12));
  const GmmSpec sym{{{0.5, -2.0, 1.0}, {0.5, 2.0, 1.0}}};
  CHECK(gmm_pdf(sym, 1.3) == Catch::Approx(gmm_pdf(sym, -1.3)).margin(1e-15));
  // Simpson quadrature over [-50, 50]
  const GmmSpec spec = GmmSpec::three_mode();
  const int n = 20000;
  const double a = -50.0, b = 50.0, h = (b - a) / n;
  double integral = gmm_pdf(spec, a) + gmm_pdf(spec, b);
  for (int i = 1; i < n; ++i)
    integral += (i % 2 == 1 ? 4.0 : 2.0) * gmm_pdf(spec, a + i * h);
  integral *= h / 3.0;
  CHECK(std::fabs(integral - 1.0) < 1e-6);
}

TEST_CASE("metropolis sampler recovers single gaussian moments") {
  const GmmSpec spec{{{1.0, 0.0, 1.0}}};
  const Trajectory traj = sample_gmm_metropolis(spec, 50000, 1.0, 1000, 42);
  double mean = 0.0;
  for (std::size_t t = 0; t < traj.states.rows(); ++t) mean += traj.states(t, 0);
  mean /= static_cast<double>(traj.states.rows());
  double var = 0.0;
  for (std::size_t t = 0; t < traj.states.rows(); ++t) {
    const double c = traj.states(t, 0) - mean;
    var += c * c;
  }
  var /= static_cast<double>(traj.states.rows());
  CHECK(std::fabs(mean) < 0.05);
  CHECK(std::fabs(std::sqrt(var) - 1.0) < 0.05);
}

TEST_CASE("metropolis sampler rejects degenerate proposal") {
  CHECK_THROWS_AS(
      sample_gmm_metropolis(GmmSpec::three_mode(), 100, 0.0, 0, 1),
      config_error);
}

TEST_CASE("metropolis occupancy matches mixture weights") {
  const GmmSpec spec = GmmSpec::three_mode();
  const Trajectory traj = sample_gmm_metropolis(spec, 50000, 2.0, 1000, 7);
  std::vector<double> occupancy(3, 0.0);
  for (std::size_t t = 0; t < traj.states.rows(); ++t) {
    const double x = traj.states(t, 0);
    std::size_t best = 0;
    for (std::size_t c = 1; c < 3; ++c)
      if (std::fabs(x - spec.components[c].mean) <
          std::fabs(x - spec.components[best].mean))
        best = c;
    occupancy[best] += 1.0;
  }
  for (auto& o : occupancy) o /= static_cast<double>(traj.states.rows());
  for (std::size_t c = 0; c < 3; ++c)
    CHECK(std::fabs(occupancy[c] - spec.components[c].weight) < 0.03);
}

TEST_CASE("metropolis chain satisfies detailed balance on coarse bins") {
  // five bins over the support; pi_i P_ij ~ pi_j P_ji means the raw
  // transition counts C_ij and C_ji should match within noise
  const GmmSpec spec = GmmSpec::three_mode();
  const Trajectory traj = sample_gmm_metropolis(spec, 200000, 2.0, 1000, 11);
  auto bin = [](double x) {
    const double edges[4] = {-4.0, -1.5, 1.5, 4.0};
    std::size_t b = 0;
    while (b < 4 && x > edges[b]) ++b;
    return b;
  };
  double counts[5][5] = {};
  for (std::size_t t = 0; t + 1 < traj.states.rows(); ++t)
    counts[bin(traj.states(t, 0))][bin(traj.states(t + 1, 0))] += 1.0;
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = i + 1; j < 5; ++j) {
      const double cij = counts[i][j], cji = counts[j][i];
      if (cij + cji < 50.0) continue;  // too rare to test
      const double stderr3 = 3.0 * std::sqrt(cij + cji);
      CHECK(std::fabs(cij - cji) <= stderr3);
    }
}

TEST_CASE("rotating sequence mass is constant within 2 percent") {
  const Trajectory traj = generate_rotating_sequence(24, 36);
  std::vector<double> mass(traj.states.rows());
  for (std::size_t t = 0; t < traj.states.rows(); ++t) {
    double s = 0.0;
    for (std::size_t k = 0; k < traj.states.cols(); ++k)
      s += traj.states(t, k);
    mass[t] = s;
  }
  for (double m : mass) {
    CHECK(std::fabs(m - mass[0]) / mass[0] < 0.02);
  }
}

TEST_CASE("glyph is asymmetric under rotation by pi") {
  const Trajectory traj = generate_rotating_sequence(24, 36);
  const std::size_t half = 18;
  double diff = 0.0;
  for (std::size_t k = 0; k < traj.states.cols(); ++k) {
    const double d = traj.states(0, k) - traj.states(half, k);
    diff += d * d;
  }
  diff /= static_cast<double>(traj.states.cols());
  CHECK(diff > 0.01);
}

TEST_CASE("quarter-turn frame equals the pixel-rotated base frame") {
  const std::size_t n = 24, frames = 36;
  const Trajectory traj = generate_rotating_sequence(n, frames);
  const std::size_t quarter = frames / 4;
  double mse = 0.0;
  for (std::size_t row = 0; row < n; ++row)
    for (std::size_t col = 0; col < n; ++col) {
      const double got = traj.states(quarter, row * n + col);
      const double expected = traj.states(0, (n - 1 - col) * n + row);
      mse += (got - expected) * (got - expected);
    }
  mse /= static_cast<double>(n * n);
  CHECK(mse < 1e-3);
}

TEST_CASE("rotating sequence validates parameters") {
  CHECK_THROWS_AS(generate_rotating_sequence(4, 36), config_error);
  CHECK_THROWS_AS(generate_rotating_sequence(24, 8), config_error);
}

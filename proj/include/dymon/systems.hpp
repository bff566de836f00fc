#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "dymon/errors.hpp"
#include "dymon/matrix.hpp"

namespace dymon {

struct Trajectory {
  Matrix states;     // T x d, time-ordered
  double dt = 0.0;   // seconds per step; 0 for index-time data
  std::string meta;
};

template <typename Deriv>
std::vector<double> rk4_step(const Deriv& deriv,
                             const std::vector<double>& state, double dt) {
  if (dt <= 0.0) throw config_error("rk4_step: dt must be positive");
  const std::size_t n = state.size();
  auto axpy = [&](const std::vector<double>& s, const std::vector<double>& k,
                  double h) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = s[i] + h * k[i];
    return out;
  };
  const std::vector<double> k1 = deriv(state);
  const std::vector<double> k2 = deriv(axpy(state, k1, dt / 2.0));
  const std::vector<double> k3 = deriv(axpy(state, k2, dt / 2.0));
  const std::vector<double> k4 = deriv(axpy(state, k3, dt));
  std::vector<double> next(n);
  for (std::size_t i = 0; i < n; ++i) {
    next[i] = state[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    if (!std::isfinite(next[i]))
      throw numeric_error("rk4_step: non-finite state component");
  }
  return next;
}

// State layout: (theta, omega).
inline std::vector<double> pendulum_deriv(const std::vector<double>& s,
                                          double g, double length) {
  return {s[1], -(g / length) * std::sin(s[0])};
}

// Integrates theta'' = -(g/L) sin(theta); emits the bob position
// x = L sin(theta), y = -L cos(theta).
inline Trajectory simulate_pendulum(double theta0, double omega0,
                                    double g = 9.81, double length = 1.0,
                                    double dt = 0.01, std::size_t steps = 1000) {
  if (length <= 0.0) throw config_error("simulate_pendulum: length must be > 0");
  if (dt <= 0.0) throw config_error("simulate_pendulum: dt must be > 0");
  auto deriv = [&](const std::vector<double>& s) {
    return pendulum_deriv(s, g, length);
  };
  if (steps < 1) throw config_error("simulate_pendulum: steps must be >= 1");
  Trajectory traj;
  traj.states = Matrix(steps, 2);
  traj.dt = dt;
  traj.meta = "pendulum";
  std::vector<double> s{theta0, omega0};
  for (std::size_t t = 0; t < steps; ++t) {
    traj.states(t, 0) = length * std::sin(s[0]);
    traj.states(t, 1) = -length * std::cos(s[0]);
    if (t + 1 < steps) s = rk4_step(deriv, s, dt);
  }
  return traj;
}

inline double pendulum_energy(double theta, double omega, double g,
                              double length) {
  return 0.5 * length * length * omega * omega - g * length * std::cos(theta);
}

struct DoublePendulumParams {
  double m1 = 1.0, m2 = 1.0;
  double l1 = 1.0, l2 = 1.0;
  double g = 9.81;
};

// State layout: (theta1, theta2, omega1, omega2).
inline std::vector<double> double_pendulum_deriv(
    const std::vector<double>& s, const DoublePendulumParams& p) {
  const double t1 = s[0], t2 = s[1], w1 = s[2], w2 = s[3];
  const double delta = t1 - t2;
  const double den = 2.0 * p.m1 + p.m2 - p.m2 * std::cos(2.0 * t1 - 2.0 * t2);
  const double a1 =
      (-p.g * (2.0 * p.m1 + p.m2) * std::sin(t1) -
       p.m2 * p.g * std::sin(t1 - 2.0 * t2) -
       2.0 * std::sin(delta) * p.m2 *
           (w2 * w2 * p.l2 + w1 * w1 * p.l1 * std::cos(delta))) /
      (p.l1 * den);
  const double a2 =
      (2.0 * std::sin(delta) *
       (w1 * w1 * p.l1 * (p.m1 + p.m2) +
        p.g * (p.m1 + p.m2) * std::cos(t1) +
        w2 * w2 * p.l2 * p.m2 * std::cos(delta))) /
      (p.l2 * den);
  return {w1, w2, a1, a2};
}

inline double double_pendulum_energy(const std::vector<double>& s,
                                     const DoublePendulumParams& p) {
  const double t1 = s[0], t2 = s[1], w1 = s[2], w2 = s[3];
  const double kinetic =
      0.5 * p.m1 * p.l1 * p.l1 * w1 * w1 +
      0.5 * p.m2 *
          (p.l1 * p.l1 * w1 * w1 + p.l2 * p.l2 * w2 * w2 +
           2.0 * p.l1 * p.l2 * w1 * w2 * std::cos(t1 - t2));
  const double potential = -(p.m1 + p.m2) * p.g * p.l1 * std::cos(t1) -
                           p.m2 * p.g * p.l2 * std::cos(t2);
  return kinetic + potential;
}

// Emits Cartesian positions of both bobs: (x1, y1, x2, y2).
inline Trajectory simulate_double_pendulum(double theta1, double theta2,
                                           double omega1, double omega2,
                                           const DoublePendulumParams& p = {},
                                           double dt = 0.005,
                                           std::size_t steps = 1000) {
  if (p.l1 <= 0.0 || p.l2 <= 0.0 || p.m1 <= 0.0 || p.m2 <= 0.0)
    throw config_error("simulate_double_pendulum: masses/lengths must be > 0");
  if (dt <= 0.0) throw config_error("simulate_double_pendulum: dt must be > 0");
  auto deriv = [&](const std::vector<double>& s) {
    return double_pendulum_deriv(s, p);
  };
  if (steps < 1)
    throw config_error("simulate_double_pendulum: steps must be >= 1");
  Trajectory traj;
  traj.states = Matrix(steps, 4);
  traj.dt = dt;
  traj.meta = "double_pendulum";
  std::vector<double> s{theta1, theta2, omega1, omega2};
  for (std::size_t t = 0; t < steps; ++t) {
    const double x1 = p.l1 * std::sin(s[0]);
    const double y1 = -p.l1 * std::cos(s[0]);
    traj.states(t, 0) = x1;
    traj.states(t, 1) = y1;
    traj.states(t, 2) = x1 + p.l2 * std::sin(s[1]);
    traj.states(t, 3) = y1 - p.l2 * std::cos(s[1]);
    if (t + 1 < steps) s = rk4_step(deriv, s, dt);
  }
  return traj;
}

struct GmmComponent {
  double weight;
  double mean;
  double std;
};

struct GmmSpec {
  std::vector<GmmComponent> components;

  void validate() const {
    if (components.empty()) throw config_error("GmmSpec: no components");
    double total = 0.0;
    for (const auto& c : components) {
      if (c.weight <= 0.0) throw config_error("GmmSpec: weights must be > 0");
      if (c.std <= 0.0) throw config_error("GmmSpec: stds must be > 0");
      total += c.weight;
    }
    if (std::fabs(total - 1.0) > 1e-9)
      throw config_error("GmmSpec: weights must sum to 1");
  }

  // Mixture used by the stationary-distribution experiment.
  static GmmSpec three_mode() {
    return GmmSpec{{{0.3, -4.0, 1.0}, {0.4, 0.0, 1.0}, {0.3, 4.0, 1.0}}};
  }
};

inline double gmm_pdf(const GmmSpec& spec, double x) {
  spec.validate();
  double p = 0.0;
  for (const auto& c : spec.components) {
    const double z = (x - c.mean) / c.std;
    p += c.weight / (c.std * std::sqrt(2.0 * 3.14159265358979323846)) *
         std::exp(-0.5 * z * z);
  }
  return p;
}

// Random-walk Metropolis-Hastings; consecutive retained samples are the
// transition pairs used downstream.
inline Trajectory sample_gmm_metropolis(const GmmSpec& spec, std::size_t n,
                                        double proposal_std,
                                        std::size_t burn_in,
                                        std::uint64_t seed) {
  spec.validate();
  if (n < 1) throw config_error("sample_gmm_metropolis: n must be >= 1");
  if (proposal_std <= 0.0)
    throw config_error("sample_gmm_metropolis: proposal_std must be > 0");
  Rng rng(seed);
  // start at the highest-weight component mean
  double x = spec.components.front().mean;
  double best_w = spec.components.front().weight;
  for (const auto& c : spec.components)
    if (c.weight > best_w) {
      best_w = c.weight;
      x = c.mean;
    }
  double px = gmm_pdf(spec, x);
  Trajectory traj;
  traj.states = Matrix(n, 1);
  traj.dt = 0.0;
  traj.meta = "gmm_mcmc";
  for (std::size_t t = 0; t < burn_in + n; ++t) {
    const double prop = x + proposal_std * rng.normal();
    const double pp = gmm_pdf(spec, prop);
    if (pp >= px || rng.uniform() < pp / px) {
      x = prop;
      px = pp;
    }
    if (t >= burn_in) traj.states(t - burn_in, 0) = x;
  }
  return traj;
}

namespace detail {

// L-shaped glyph, asymmetric under 180-degree rotation. Vertices in the
// unit square [-0.5, 0.5]^2, counter-clockwise.
inline const std::vector<std::array<double, 2>>& glyph_polygon() {
  static const std::vector<std::array<double, 2>> poly = {
      {-0.20, -0.30}, {0.20, -0.30}, {0.20, -0.15},
      {-0.05, -0.15}, {-0.05, 0.30}, {-0.20, 0.30}};
  return poly;
}

inline bool point_in_polygon(double px, double py,
                             const std::vector<std::array<double, 2>>& poly) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const double xi = poly[i][0], yi = poly[i][1];
    const double xj = poly[j][0], yj = poly[j][1];
    if ((yi > py) != (yj > py) &&
        px < (xj - xi) * (py - yi) / (yj - yi) + xi)
      inside = !inside;
  }
  return inside;
}

}  // namespace detail

// Synthetic rotating-image sequence: an asymmetric glyph rotated by
// 2*pi*t/frames per frame, rendered with 4x4 supersampled coverage.
// Frame t and frame t+frames coincide.
inline Trajectory generate_rotating_sequence(std::size_t image_px,
                                             std::size_t frames) {
  if (image_px < 8)
    throw config_error("generate_rotating_sequence: image_px must be >= 8");
  if (frames < 16)
    throw config_error("generate_rotating_sequence: frames must be >= 16");
  const auto& poly = detail::glyph_polygon();
  Trajectory traj;
  traj.states = Matrix(frames, image_px * image_px);
  traj.dt = 0.0;
  traj.meta = "rotating";
  const int ss = 4;
  for (std::size_t t = 0; t < frames; ++t) {
    const double angle =
        2.0 * 3.14159265358979323846 * static_cast<double>(t) / frames;
    const double c = std::cos(angle), s = std::sin(angle);
    double* frame = traj.states.row(t);
    for (std::size_t row = 0; row < image_px; ++row) {
      for (std::size_t col = 0; col < image_px; ++col) {
        int hits = 0;
        for (int sy = 0; sy < ss; ++sy) {
          for (int sx = 0; sx < ss; ++sx) {
            const double px =
                (col + (sx + 0.5) / ss) / image_px - 0.5;
            const double py =
                (row + (sy + 0.5) / ss) / image_px - 0.5;
            // rotate the sample point backwards into glyph coordinates
            const double gx = c * px + s * py;
            const double gy = -s * px + c * py;
            if (detail::point_in_polygon(gx, gy, poly)) ++hits;
          }
        }
        frame[row * image_px + col] = static_cast<double>(hits) / (ss * ss);
      }
    }
  }
  return traj;
}

}  // namespace dymon

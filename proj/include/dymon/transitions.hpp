#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "dymon/errors.hpp"
#include "dymon/matrix.hpp"
#include "dymon/mmd.hpp"
#include "dymon/systems.hpp"

namespace dymon {

struct TransitionGroup {
  Matrix history;  // order x d, oldest first
  Matrix targets;  // k x d
};

// Source histories paired with their observed target sets Y_x.
struct TransitionDataset {
  std::size_t order = 1;
  std::size_t state_dim = 0;
  std::vector<TransitionGroup> groups;
  std::string provenance;

  void validate() const {
    for (const auto& g : groups) {
      if (g.history.rows() != order || g.history.cols() != state_dim ||
          (g.targets.rows() > 0 && g.targets.cols() != state_dim))
        throw dimension_error("TransitionDataset: inconsistent group shapes");
    }
  }
};

struct StepSpec {
  std::size_t mean = 1;
  std::size_t jitter = 0;  // step drawn uniformly from mean +/- jitter
};

inline TransitionDataset transitions_from_trajectory(const Trajectory& traj,
                                                     StepSpec step,
                                                     std::size_t order,
                                                     std::uint64_t seed = 0) {
  if (order < 1) throw config_error("transitions_from_trajectory: order >= 1");
  if (step.mean < 1 || step.jitter >= step.mean)
    throw config_error("transitions_from_trajectory: invalid step spec");
  const std::size_t t_len = traj.states.rows();
  const std::size_t d = traj.states.cols();
  const std::size_t max_step = step.mean + step.jitter;
  const std::size_t min_len = order * max_step + 1;
  if (t_len < min_len)
    throw config_error("transitions_from_trajectory: trajectory too short, "
                       "need at least " + std::to_string(min_len) + " states");
  Rng rng(seed);
  TransitionDataset ds;
  ds.order = order;
  ds.state_dim = d;
  ds.provenance = "trajectory:" + traj.meta;
  // t indexes the most recent history state
  for (std::size_t t = (order - 1) * max_step; t + max_step < t_len; ++t) {
    std::size_t s = step.mean;
    if (step.jitter > 0)
      s = step.mean - step.jitter +
          rng.uniform_index(2 * step.jitter + 1);
    TransitionGroup g;
    g.history = Matrix(order, d);
    for (std::size_t h = 0; h < order; ++h) {
      const std::size_t idx = t - (order - 1 - h) * s;
      for (std::size_t k = 0; k < d; ++k)
        g.history(h, k) = traj.states(idx, k);
    }
    g.targets = Matrix(1, d);
    for (std::size_t k = 0; k < d; ++k)
      g.targets(0, k) = traj.states(t + s, k);
    ds.groups.push_back(std::move(g));
  }
  return ds;
}

namespace detail {

// Indices of the k nearest rows of points to the given query row, excluding
// the query itself. Distance ties break by ascending index.
inline std::vector<std::size_t> knn_indices(
    const std::vector<const double*>& points, std::size_t d,
    std::size_t query, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(points.size() - 1);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (i == query) continue;
    dist.emplace_back(sq_dist(points[query], points[i], d), i);
  }
  const std::size_t kk = std::min(k, dist.size());
  std::partial_sort(dist.begin(), dist.begin() + kk, dist.end());
  std::vector<std::size_t> out;
  out.reserve(kk);
  for (std::size_t i = 0; i < kk; ++i) out.push_back(dist[i].second);
  return out;
}

}  // namespace detail

// Y_x becomes the union (with repetitions) of the target sets of x and its
// k nearest source neighbors, measured on the most recent history state.
inline TransitionDataset augment_targets_with_neighbors(
    const TransitionDataset& ds, std::size_t k) {
  if (k == 0) return ds;
  const std::size_t d = ds.state_dim;
  std::vector<const double*> sources;
  sources.reserve(ds.groups.size());
  for (const auto& g : ds.groups)
    sources.push_back(g.history.row(ds.order - 1));
  TransitionDataset out;
  out.order = ds.order;
  out.state_dim = d;
  out.provenance = ds.provenance + "+knn" + std::to_string(k);
  for (std::size_t gi = 0; gi < ds.groups.size(); ++gi) {
    const auto neigh = detail::knn_indices(sources, d, gi, k);
    std::size_t total = ds.groups[gi].targets.rows();
    for (std::size_t ni : neigh) total += ds.groups[ni].targets.rows();
    TransitionGroup g;
    g.history = ds.groups[gi].history;
    g.targets = Matrix(total, d);
    std::size_t r = 0;
    auto copy_rows = [&](const Matrix& src) {
      for (std::size_t i = 0; i < src.rows(); ++i, ++r)
        for (std::size_t c = 0; c < d; ++c) g.targets(r, c) = src(i, c);
    };
    copy_rows(ds.groups[gi].targets);
    for (std::size_t ni : neigh) copy_rows(ds.groups[ni].targets);
    out.groups.push_back(std::move(g));
  }
  return out;
}

struct TimePointCloud {
  Matrix points;                    // N x d
  std::vector<double> time_labels;  // N

  void validate() const {
    if (points.rows() < 2) throw config_error("TimePointCloud: need N >= 2");
    if (time_labels.size() != points.rows())
      throw dimension_error("TimePointCloud: label count mismatch");
    if (!points.all_finite())
      throw numeric_error("TimePointCloud: non-finite point");
  }
};

// Replace each label by the mean label over its k nearest neighbors,
// self included.
inline std::vector<double> smooth_time_labels(const TimePointCloud& cloud,
                                              std::size_t k) {
  cloud.validate();
  const std::size_t n = cloud.points.rows();
  if (k < 1 || k >= n)
    throw config_error("smooth_time_labels: need 1 <= k < N");
  std::vector<const double*> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) pts.push_back(cloud.points.row(i));
  std::vector<double> smoothed(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto neigh = detail::knn_indices(pts, cloud.points.cols(), i, k);
    double s = cloud.time_labels[i];
    for (std::size_t ni : neigh) s += cloud.time_labels[ni];
    smoothed[i] = s / static_cast<double>(neigh.size() + 1);
  }
  return smoothed;
}

// Directed transitions from a labeled point cloud: Gaussian-affinity
// neighbors restricted to strictly later smoothed time, with multiplicity
// proportional to affinity (quantized to 1/16 of the max retained weight).
// Points with no later neighbor are dropped as terminal states.
inline TransitionDataset directed_diffusion_transitions(
    const TimePointCloud& cloud, double sigma, std::size_t k,
    std::size_t smoothing_k) {
  cloud.validate();
  if (sigma <= 0.0)
    throw config_error("directed_diffusion_transitions: sigma must be > 0");
  const std::vector<double> labels = smooth_time_labels(cloud, smoothing_k);
  const std::size_t n = cloud.points.rows();
  const std::size_t d = cloud.points.cols();
  std::vector<const double*> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) pts.push_back(cloud.points.row(i));
  TransitionDataset ds;
  ds.order = 1;
  ds.state_dim = d;
  ds.provenance = "directed_diffusion";
  for (std::size_t i = 0; i < n; ++i) {
    const auto neigh = detail::knn_indices(pts, d, i, k);
    std::vector<std::size_t> later;
    std::vector<double> weights;
    for (std::size_t ni : neigh) {
      if (labels[ni] > labels[i]) {
        later.push_back(ni);
        weights.push_back(
            std::exp(-sq_dist(pts[i], pts[ni], d) / (sigma * sigma)));
      }
    }
    if (later.empty()) continue;  // terminal state
    const double wmax = *std::max_element(weights.begin(), weights.end());
    std::vector<std::size_t> counts(later.size());
    std::size_t total = 0;
    for (std::size_t j = 0; j < later.size(); ++j) {
      counts[j] = static_cast<std::size_t>(
          std::llround(weights[j] / wmax * 16.0));
      total += counts[j];
    }
    if (total == 0) continue;
    TransitionGroup g;
    g.history = Matrix(1, d);
    for (std::size_t c = 0; c < d; ++c) g.history(0, c) = pts[i][c];
    g.targets = Matrix(total, d);
    std::size_t r = 0;
    for (std::size_t j = 0; j < later.size(); ++j)
      for (std::size_t rep = 0; rep < counts[j]; ++rep, ++r)
        for (std::size_t c = 0; c < d; ++c)
          g.targets(r, c) = pts[later[j]][c];
    ds.groups.push_back(std::move(g));
  }
  if (ds.groups.empty())
    throw config_error("directed_diffusion_transitions: no later neighbors "
                       "anywhere, time labels carry no direction");
  return ds;
}

}  // namespace dymon

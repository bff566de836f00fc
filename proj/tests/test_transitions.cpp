#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "dymon/transitions.hpp"

using namespace dymon;

namespace {

Trajectory index_line(std::size_t t_len) {
  Trajectory traj;
  traj.states = Matrix(t_len, 1);
  for (std::size_t t = 0; t < t_len; ++t) traj.states(t, 0) = t;
  return traj;
}

}  // namespace

TEST_CASE("constant trajectory yields self-transitions") {
  Trajectory traj;
  traj.states = Matrix(20, 2, 3.5);
  const TransitionDataset ds = transitions_from_trajectory(traj, {1, 0}, 1);
  for (const auto& g : ds.groups) {
    CHECK(g.history(0, 0) == g.targets(0, 0));
    CHECK(g.history(0, 1) == g.targets(0, 1));
  }
}

TEST_CASE("step-1 order-1 pairs enumerate consecutive states") {
  const TransitionDataset ds =
      transitions_from_trajectory(index_line(5), {1, 0}, 1);
  REQUIRE(ds.groups.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(ds.groups[i].history(0, 0) == static_cast<double>(i));
    CHECK(ds.groups[i].targets(0, 0) == static_cast<double>(i + 1));
  }
}

TEST_CASE("pair count follows T - s") {
  const TransitionDataset ds =
      transitions_from_trajectory(index_line(400), {10, 0}, 1);
  CHECK(ds.groups.size() == 390);
}

TEST_CASE("too-short trajectory is rejected naming the minimum length") {
  CHECK_THROWS_WITH(
      transitions_from_trajectory(index_line(10), {5, 0}, 2),
      Catch::Matchers::ContainsSubstring("11"));
}

TEST_CASE("jittered steps stay within mean plus/minus jitter") {
  // index-valued trajectory makes the drawn step directly observable
  const TransitionDataset ds =
      transitions_from_trajectory(index_line(300), {10, 3}, 1, 17);
  std::set<long long> seen;
  for (const auto& g : ds.groups) {
    const long long step =
        std::llround(g.targets(0, 0) - g.history(0, 0));
    CHECK(step >= 7);
    CHECK(step <= 13);
    seen.insert(step);
  }
  CHECK(seen.size() > 1);  // jitter actually varies
}

TEST_CASE("higher-order histories are ordered oldest to newest") {
  const TransitionDataset ds =
      transitions_from_trajectory(index_line(10), {2, 0}, 3);
  for (const auto& g : ds.groups) {
    CHECK(g.history(1, 0) - g.history(0, 0) == 2.0);
    CHECK(g.history(2, 0) - g.history(1, 0) == 2.0);
    CHECK(g.targets(0, 0) - g.history(2, 0) == 2.0);
  }
}

TEST_CASE("neighbor augmentation with k=0 is the identity") {
  const TransitionDataset ds =
      transitions_from_trajectory(index_line(30), {1, 0}, 1);
  const TransitionDataset out = augment_targets_with_neighbors(ds, 0);
  REQUIRE(out.groups.size() == ds.groups.size());
  for (std::size_t i = 0; i < out.groups.size(); ++i)
    CHECK(out.groups[i].targets == ds.groups[i].targets);
}

TEST_CASE("coincident sources share the union of their targets") {
  TransitionDataset ds;
  ds.order = 1;
  ds.state_dim = 1;
  TransitionGroup a, b;
  a.history = Matrix(1, 1, {5.0});
  a.targets = Matrix(1, 1, {1.0});
  b.history = Matrix(1, 1, {5.0});
  b.targets = Matrix(1, 1, {2.0});
  ds.groups = {a, b};
  const TransitionDataset out = augment_targets_with_neighbors(ds, 1);
  for (const auto& g : out.groups) {
    REQUIRE(g.targets.rows() == 2);
    std::set<double> vals{g.targets(0, 0), g.targets(1, 0)};
    CHECK(vals == std::set<double>{1.0, 2.0});
  }
}

TEST_CASE("grid augmentation counts match brute-force neighbor enumeration") {
  // sources on a line, target counts varying per group
  TransitionDataset ds;
  ds.order = 1;
  ds.state_dim = 1;
  for (std::size_t i = 0; i < 8; ++i) {
    TransitionGroup g;
    g.history = Matrix(1, 1, {static_cast<double>(i)});
    g.targets = Matrix(i % 3 + 1, 1, static_cast<double>(i));
    ds.groups.push_back(g);
  }
  const std::size_t k = 2;
  const TransitionDataset out = augment_targets_with_neighbors(ds, k);
  for (std::size_t gi = 0; gi < ds.groups.size(); ++gi) {
    // brute-force k nearest by distance, ties by index
    std::vector<std::pair<double, std::size_t>> dist;
    for (std::size_t j = 0; j < ds.groups.size(); ++j) {
      if (j == gi) continue;
      const double diff =
          ds.groups[gi].history(0, 0) - ds.groups[j].history(0, 0);
      dist.emplace_back(diff * diff, j);
    }
    std::sort(dist.begin(), dist.end());
    std::size_t expected = ds.groups[gi].targets.rows();
    for (std::size_t n = 0; n < k; ++n)
      expected += ds.groups[dist[n].second].targets.rows();
    CHECK(out.groups[gi].targets.rows() == expected);
    CHECK(out.groups[gi].targets.rows() >= ds.groups[gi].targets.rows());
  }
}

TEST_CASE("label smoothing keeps constant labels fixed") {
  TimePointCloud cloud;
  cloud.points = Rng(3).normal_matrix(20, 2);
  cloud.time_labels.assign(20, 4.2);
  for (double v : smooth_time_labels(cloud, 5)) CHECK(v == 4.2);
}

TEST_CASE("label smoothing respects well-separated clusters") {
  TimePointCloud cloud;
  cloud.points = Matrix(10, 1);
  for (std::size_t i = 0; i < 5; ++i) cloud.points(i, 0) = i * 0.01;
  for (std::size_t i = 5; i < 10; ++i) cloud.points(i, 0) = 100.0 + i * 0.01;
  cloud.time_labels.assign(5, 0.0);
  cloud.time_labels.resize(10, 1.0);
  const auto smoothed = smooth_time_labels(cloud, 3);
  for (std::size_t i = 0; i < 5; ++i) CHECK(smoothed[i] == 0.0);
  for (std::size_t i = 5; i < 10; ++i) CHECK(smoothed[i] == 1.0);
}

TEST_CASE("label smoothing on a line keeps interior labels, pulls boundaries") {
  TimePointCloud cloud;
  const std::size_t n = 11;
  cloud.points = Matrix(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    cloud.points(i, 0) = static_cast<double>(i);
    cloud.time_labels.push_back(static_cast<double>(i));
  }
  // k=2: window is {i-1, i, i+1} for interior points
  const auto smoothed = smooth_time_labels(cloud, 2);
  for (std::size_t i = 1; i + 1 < n; ++i)
    CHECK(smoothed[i] == Catch::Approx(cloud.time_labels[i]).margin(1e-12));
  CHECK(smoothed[0] > 0.0);
  CHECK(smoothed[n - 1] < static_cast<double>(n - 1));
}

TEST_CASE("directed transitions on a monotone line point rightward") {
  TimePointCloud cloud;
  const std::size_t n = 12;
  cloud.points = Matrix(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    cloud.points(i, 0) = static_cast<double>(i);
    cloud.time_labels.push_back(static_cast<double>(i));
  }
  const TransitionDataset ds =
      directed_diffusion_transitions(cloud, 2.0, 2, 2);
  CHECK(!ds.groups.empty());
  for (const auto& g : ds.groups)
    for (std::size_t t = 0; t < g.targets.rows(); ++t)
      CHECK(g.targets(t, 0) > g.history(0, 0));
}

TEST_CASE("directed transitions reject constant labels") {
  TimePointCloud cloud;
  cloud.points = Rng(5).normal_matrix(10, 2);
  cloud.time_labels.assign(10, 1.0);
  CHECK_THROWS_AS(directed_diffusion_transitions(cloud, 1.0, 3, 2),
                  config_error);
}

TEST_CASE("stem points feed both branches, branch points stay on their own") {
  // y-shaped toy: a stem along x then two branches diverging in y
  TimePointCloud cloud;
  std::vector<std::array<double, 2>> pts;
  std::vector<double> labels;
  for (int i = 0; i < 10; ++i) {  // stem
    pts.push_back({static_cast<double>(i), 0.0});
    labels.push_back(i);
  }
  for (int i = 0; i < 10; ++i) {  // upper branch
    pts.push_back({10.0 + i, 2.0 + i});
    labels.push_back(10 + i);
  }
  for (int i = 0; i < 10; ++i) {  // lower branch
    pts.push_back({10.0 + i, -2.0 - i});
    labels.push_back(10 + i);
  }
  cloud.points = Matrix(pts.size(), 2);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    cloud.points(i, 0) = pts[i][0];
    cloud.points(i, 1) = pts[i][1];
    cloud.time_labels.push_back(labels[i]);
  }
  const TransitionDataset ds =
      directed_diffusion_transitions(cloud, 4.0, 4, 2);
  bool stem_feeds_upper = false, stem_feeds_lower = false;
  for (const auto& g : ds.groups) {
    const bool on_upper = g.history(0, 1) > 1.0;
    const bool on_lower = g.history(0, 1) < -1.0;
    for (std::size_t t = 0; t < g.targets.rows(); ++t) {
      const double ty = g.targets(t, 1);
      if (on_upper) CHECK(ty >= 0.0);   // never cross to the lower branch
      if (on_lower) CHECK(ty <= 0.0);
      if (!on_upper && !on_lower) {
        if (ty > 1.0) stem_feeds_upper = true;
        if (ty < -1.0) stem_feeds_lower = true;
      }
    }
    // direction invariant: smoothed labels strictly increase along targets
  }
  CHECK(stem_feeds_upper);
  CHECK(stem_feeds_lower);
}

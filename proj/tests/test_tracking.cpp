#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "pseudofuse/tracking.hpp"

#include <cmath>

using namespace pseudofuse;

namespace {

Box7 det(double cx, double cy, double heading = 0.0, double score = 0.9, int frame = 0) {
  Box7 b;
  b.cx = cx;
  b.cy = cy;
  b.cz = 0.8;
  b.l = 4.5;
  b.w = 1.9;
  b.h = 1.6;
  b.heading = heading;
  b.score = score;
  b.frame_idx = frame;
  return b;
}

double min_eigenvalue(const TrackState& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, kStateDim, kStateDim>> eig(s.covariance);
  return eig.eigenvalues().minCoeff();
}

}  // namespace

TEST_CASE("predict advances position by velocity") {
  TrackerConfig cfg;
  TrackState s = make_track_state(det(0, 0), cfg, 0);
  s.mean(7) = 1.0;  // vx
  const TrackState out = predict(s, cfg);
  CHECK(out.mean(0) == doctest::Approx(1.0));
  CHECK(out.mean(1) == doctest::Approx(0.0));
}

TEST_CASE("predict with zero velocity holds position and inflates covariance") {
  TrackerConfig cfg;
  const TrackState s = make_track_state(det(2, 3), cfg, 0);
  const TrackState out = predict(s, cfg);
  CHECK(out.mean(0) == doctest::Approx(2.0));
  CHECK(out.mean(1) == doctest::Approx(3.0));
  for (int i = 0; i < kStateDim; ++i) CHECK(out.covariance(i, i) >= s.covariance(i, i));
  CHECK(out.covariance(0, 0) > s.covariance(0, 0));
}

TEST_CASE("repeated predict compounds to n steps") {
  TrackerConfig cfg;
  TrackState s = make_track_state(det(0, 0), cfg, 0);
  s.mean(7) = 1.0;
  for (int n = 1; n <= 5; ++n) {
    s = predict(s, cfg);
    CHECK(s.mean(0) == doctest::Approx(static_cast<double>(n)));
  }
}

TEST_CASE("update with a measurement equal to the prediction") {
  TrackerConfig cfg;
  TrackState s = make_track_state(det(1, 2, 0.3), cfg, 0);
  const TrackState out = update(s, det(1, 2, 0.3), cfg);
  for (int i = 0; i < kMeasDim; ++i) {
    CHECK(out.mean(i) == doctest::Approx(s.mean(i)).epsilon(1e-12));
    CHECK(out.covariance(i, i) < s.covariance(i, i));
  }
  CHECK(out.hits == s.hits + 1);
  CHECK(out.misses == 0);
}

TEST_CASE("posterior mean lies between prior and measurement") {
  TrackerConfig cfg;
  const TrackState prior = predict(make_track_state(det(1, 2, 0.2), cfg, 0), cfg);
  const Box7 measurement = det(1.8, 2.6, 0.4);
  const TrackState posterior = update(prior, measurement, cfg);
  const double meas_vec[kMeasDim] = {measurement.cx, measurement.cy, measurement.cz,
                                     measurement.heading, measurement.l, measurement.w,
                                     measurement.h};
  for (int i = 0; i < kMeasDim; ++i) {
    const double lo = std::min(prior.mean(i), meas_vec[i]);
    const double hi = std::max(prior.mean(i), meas_vec[i]);
    if (lo == hi) continue;
    CHECK(posterior.mean(i) > lo);
    CHECK(posterior.mean(i) < hi);
  }
}

TEST_CASE("heading innovation wraps across the pi boundary") {
  TrackerConfig cfg;
  TrackState s = make_track_state(det(0, 0, 3.1), cfg, 0);
  const TrackState out = update(s, det(0, 0, -3.1), cfg);
  // posterior stays near the +-pi boundary rather than moving toward zero
  CHECK(std::fabs(out.mean(3)) > 3.0);
}

TEST_CASE("update keeps the covariance PSD") {
  TrackerConfig cfg;
  oracle::TestRng rng(71);
  TrackState s = make_track_state(det(0, 0), cfg, 0);
  for (int step = 0; step < 50; ++step) {
    s = predict(s, cfg);
    s = update(s, det(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-0.2, 0.2)), cfg);
    CHECK(min_eigenvalue(s) >= -1e-9);
  }
}

TEST_CASE("associate matches a nearby detection") {
  TrackerConfig cfg;
  std::vector<TrackState> tracks{make_track_state(det(0, 0), cfg, 0)};
  std::vector<Box7> dets{det(0.1, 0)};
  const auto out = associate(tracks, dets, cfg);
  REQUIRE(out.matches.size() == 1);
  CHECK(out.matches[0] == std::pair<int, int>(0, 0));
  CHECK(out.unmatched_tracks.empty());
  CHECK(out.unmatched_detections.empty());
}

TEST_CASE("associate leaves far pairs unmatched") {
  TrackerConfig cfg;
  std::vector<TrackState> tracks{make_track_state(det(0, 0), cfg, 0)};
  std::vector<Box7> dets{det(50, 0)};
  const auto out = associate(tracks, dets, cfg);
  CHECK(out.matches.empty());
  CHECK(out.unmatched_tracks == std::vector<int>{0});
  CHECK(out.unmatched_detections == std::vector<int>{0});
}

TEST_CASE("crossing assignment matches the exhaustive permutation oracle") {
  TrackerConfig cfg;
  cfg.distance_fallback = false;
  std::vector<TrackState> tracks{make_track_state(det(0, 0), cfg, 0),
                                 make_track_state(det(2.5, 0), cfg, 1)};
  // both detections overlap both tracks, crossed offsets
  std::vector<Box7> dets{det(2.0, 0), det(0.5, 0)};

  std::vector<std::vector<double>> cost(2, std::vector<double>(2));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      cost[i][j] = 1.0 - bev_iou(state_to_box(tracks[i], 0, 1.0, 0), dets[j]);
  const auto [best_cost, best_perm] = oracle::exhaustive_assignment(cost);

  const auto out = associate(tracks, dets, cfg);
  REQUIRE(out.matches.size() == 2);
  double got_cost = 0.0;
  for (const auto& [t, d] : out.matches) got_cost += cost[t][d];
  CHECK(got_cost == doctest::Approx(best_cost).epsilon(1e-12));
  for (const auto& [t, d] : out.matches) CHECK(best_perm[t] == d);
}

TEST_CASE("hungarian solver equals exhaustive search on random matrices") {
  oracle::TestRng rng(73);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = rng.uniform_int(1, 7);
    std::vector<std::vector<double>> cost(n, std::vector<double>(n));
    for (auto& row : cost)
      for (double& c : row) c = rng.uniform(0.0, 10.0);
    const auto assignment = detail::solve_assignment(cost);
    double mine = 0.0;
    for (int i = 0; i < n; ++i) mine += cost[i][assignment[i]];
    const auto [best, perm] = oracle::exhaustive_assignment(cost);
    CHECK(mine == doctest::Approx(best).epsilon(1e-9));
  }
}

TEST_CASE("track_sequence follows a noiseless object") {
  TrackerConfig cfg;
  std::vector<FrameBoxes> frames;
  for (int k = 0; k < 3; ++k) frames.push_back({k, {det(static_cast<double>(k), 0, 0, 0.9, k)}});
  const auto tracks = track_sequence(frames, cfg);
  REQUIRE(tracks.size() == 1);
  REQUIRE(tracks[0].entries.size() == 3);
  for (int k = 0; k < 3; ++k) {
    CHECK(tracks[0].entries[k].frame_idx == k);
    CHECK(!tracks[0].entries[k].interpolated);
    // entries carry the associated detections, exact for noiseless input
    CHECK(tracks[0].entries[k].box.cx == doctest::Approx(static_cast<double>(k)).epsilon(1e-6));
  }
}

TEST_CASE("a missed middle frame is interpolated") {
  TrackerConfig cfg;
  std::vector<FrameBoxes> frames;
  for (int k = 0; k < 5; ++k) {
    FrameBoxes f{k, {}};
    if (k != 2) f.boxes.push_back(det(static_cast<double>(k), 0, 0, 0.9, k));
    frames.push_back(f);
  }
  const auto tracks = track_sequence(frames, cfg);
  REQUIRE(tracks.size() == 1);
  REQUIRE(tracks[0].entries.size() == 5);
  CHECK(tracks[0].entries[2].interpolated);
  CHECK(tracks[0].entries[2].frame_idx == 2);
  CHECK(tracks[0].entries[2].box.cx == doctest::Approx(2.0).epsilon(0.25));
  for (int k : {0, 1, 3, 4}) CHECK(!tracks[0].entries[k].interpolated);
}

TEST_CASE("two far-apart objects produce two clean tracks") {
  TrackerConfig cfg;
  std::vector<FrameBoxes> frames;
  for (int k = 0; k < 10; ++k) {
    frames.push_back({k,
                      {det(static_cast<double>(k), 0, 0, 0.9, k),
                       det(static_cast<double>(k), 100, 0, 0.8, k)}});
  }
  const auto tracks = track_sequence(frames, cfg);
  REQUIRE(tracks.size() == 2);
  for (const auto& t : tracks) {
    CHECK(t.entries.size() == 10);
    const double y = t.entries.front().box.cy;
    for (const auto& e : t.entries) CHECK(e.box.cy == doctest::Approx(y).epsilon(1e-9));
  }
  CHECK(tracks[0].track_id != tracks[1].track_id);
}

TEST_CASE("tracks below min_hits are not emitted") {
  TrackerConfig cfg;
  cfg.min_hits = 2;
  std::vector<FrameBoxes> frames;
  frames.push_back({0, {det(0, 0)}});
  frames.push_back({1, {}});
  frames.push_back({2, {}});
  frames.push_back({3, {}});
  frames.push_back({4, {}});
  CHECK(track_sequence(frames, cfg).empty());
}

TEST_CASE("out-of-order frames are rejected") {
  TrackerConfig cfg;
  std::vector<FrameBoxes> frames{{3, {}}, {1, {}}};
  CHECK_THROWS_AS(track_sequence(frames, cfg), std::invalid_argument);
}

TEST_CASE("noiseless constant-velocity input is followed to 1e-6") {
  TrackerConfig cfg;
  std::vector<FrameBoxes> frames;
  for (int k = 0; k < 20; ++k)
    frames.push_back({k, {det(0.8 * k, 0.3 * k, 0, 0.9, k)}});
  const auto tracks = track_sequence(frames, cfg);
  REQUIRE(tracks.size() == 1);
  for (std::size_t i = 2; i < tracks[0].entries.size(); ++i) {
    const auto& e = tracks[0].entries[i];
    CHECK(e.box.cx == doctest::Approx(0.8 * e.frame_idx).epsilon(1e-6));
    CHECK(e.box.cy == doctest::Approx(0.3 * e.frame_idx).epsilon(1e-6));
  }
}

TEST_CASE("association is one-to-one on crowded random frames") {
  oracle::TestRng rng(79);
  TrackerConfig cfg;
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<TrackState> tracks;
    for (int i = 0; i < rng.uniform_int(1, 8); ++i)
      tracks.push_back(make_track_state(det(rng.uniform(-10, 10), rng.uniform(-10, 10)), cfg, i));
    std::vector<Box7> dets;
    for (int i = 0; i < rng.uniform_int(1, 8); ++i)
      dets.push_back(det(rng.uniform(-10, 10), rng.uniform(-10, 10)));
    const auto out = associate(tracks, dets, cfg);
    std::vector<int> track_used(tracks.size(), 0), det_used(dets.size(), 0);
    for (const auto& [t, d] : out.matches) {
      track_used[t] += 1;
      det_used[d] += 1;
    }
    for (int t : out.unmatched_tracks) track_used[t] += 1;
    for (int d : out.unmatched_detections) det_used[d] += 1;
    for (int u : track_used) CHECK(u == 1);
    for (int u : det_used) CHECK(u == 1);
  }
}

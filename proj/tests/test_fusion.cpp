#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "pseudofuse/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace pseudofuse;

namespace {

Box7 vehicle_box(double cx, double cy, double heading, double score, int frame = 0) {
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

}  // namespace

TEST_CASE("deaugment_box identity") {
  const Box7 b = vehicle_box(1, 2, 0.3, 0.9);
  const Box7 out = deaugment_box(b, TtaTransform{});
  CHECK(out.cx == b.cx);
  CHECK(out.cy == b.cy);
  CHECK(out.heading == doctest::Approx(b.heading));
}

TEST_CASE("deaugment_box undoes a flip about the x axis") {
  const Box7 b = vehicle_box(1, 2, 0.3, 0.9);
  const Box7 out = deaugment_box(b, TtaTransform{true, false, 0.0});
  CHECK(out.cx == doctest::Approx(1.0));
  CHECK(out.cy == doctest::Approx(-2.0));
  CHECK(out.heading == doctest::Approx(-0.3));
}

TEST_CASE("deaugment_box undoes a quarter-turn world rotation") {
  const Box7 b = vehicle_box(0, 1, kPi / 2.0, 0.9);
  const Box7 out = deaugment_box(b, TtaTransform{false, false, kPi / 2.0});
  CHECK(out.cx == doctest::Approx(1.0));
  CHECK(out.cy == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(out.heading == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("deaugment after augment is the identity for all four permutations") {
  oracle::TestRng rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    const Box7 b = oracle::random_box(rng);
    const double rot = rng.uniform(-kPi, kPi);
    const TtaTransform perms[4] = {
        {false, false, 0.0}, {true, true, 0.0}, {false, false, rot}, {true, true, rot}};
    for (const auto& tta : perms) {
      const Box7 back = deaugment_box(augment_box(b, tta), tta);
      CHECK(back.cx == doctest::Approx(b.cx).epsilon(1e-9));
      CHECK(back.cy == doctest::Approx(b.cy).epsilon(1e-9));
      CHECK(back.cz == doctest::Approx(b.cz).epsilon(1e-9));
      CHECK(std::fabs(std::remainder(back.heading - b.heading, 2.0 * kPi)) < 1e-9);
    }
  }
}

TEST_CASE("kd-tree radius query equals brute force") {
  oracle::TestRng rng(43);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Box7> boxes;
    const int n = rng.uniform_int(1, 120);
    for (int i = 0; i < n; ++i) boxes.push_back(oracle::random_box(rng, 15.0));
    detail::CentroidKdTree tree(boxes);
    const Eigen::Vector3d q(rng.uniform(-15, 15), rng.uniform(-15, 15), rng.uniform(-2, 2));
    const double radius = rng.uniform(0.5, 8.0);

    std::vector<int> expected;
    for (int i = 0; i < n; ++i) {
      const Eigen::Vector3d c(boxes[i].cx, boxes[i].cy, boxes[i].cz);
      if ((c - q).norm() <= radius) expected.push_back(i);
    }
    CHECK(tree.radius_query(q, radius) == expected);
  }
}

TEST_CASE("cluster_proposals groups co-located boxes") {
  FusionConfig cfg;
  ProposalSet props;
  for (int i = 0; i < 5; ++i)
    props.boxes.push_back(vehicle_box(0.1 * i, 0.0, 0.0, 0.5 + 0.1 * i));
  const auto clusters = cluster_proposals(props, cfg);
  REQUIRE(clusters.size() == 1);
  CHECK(clusters[0].size() == 5);
}

TEST_CASE("cluster below the minimum size yields nothing") {
  FusionConfig cfg;  // min_cluster_size 4
  ProposalSet props;
  for (int i = 0; i < 3; ++i) props.boxes.push_back(vehicle_box(0, 0, 0, 0.9));
  CHECK(cluster_proposals(props, cfg).empty());
}

TEST_CASE("well-separated groups form separate clusters") {
  FusionConfig cfg;
  ProposalSet props;
  for (int i = 0; i < 6; ++i) props.boxes.push_back(vehicle_box(0.05 * i, 0, 0, 0.8));
  for (int i = 0; i < 6; ++i) props.boxes.push_back(vehicle_box(10.0 + 0.05 * i, 0, 0, 0.7));
  const auto clusters = cluster_proposals(props, cfg);
  REQUIRE(clusters.size() == 2);
  CHECK(clusters[0].size() == 6);
  CHECK(clusters[1].size() == 6);
}

TEST_CASE("no box is assigned to two clusters") {
  oracle::TestRng rng(47);
  FusionConfig cfg;
  cfg.min_cluster_size = 1;
  for (int trial = 0; trial < 20; ++trial) {
    ProposalSet props;
    const int n = rng.uniform_int(1, 60);
    for (int i = 0; i < n; ++i) props.boxes.push_back(oracle::random_box(rng, 8.0));
    std::vector<int> seen(n, 0);
    for (const auto& cluster : cluster_proposals(props, cfg))
      for (int i : cluster) seen[i] += 1;
    for (int count : seen) CHECK(count == 1);  // min size 1: every box in exactly one cluster
  }
}

TEST_CASE("kbf_fuse_cluster keeps an identical cluster unchanged") {
  FusionConfig cfg;
  std::vector<Box7> cluster(5, vehicle_box(2, 3, 0.4, 0.8));
  const Box7 out = kbf_fuse_cluster(cluster, cfg);
  CHECK(out.cx == 2.0);
  CHECK(out.cy == 3.0);
  CHECK(out.heading == 0.4);
  CHECK(out.score == 0.8);
  CHECK(out.detector_id == kFusedDetectorId);
}

TEST_CASE("kbf_fuse_cluster selects the majority heading") {
  FusionConfig cfg;
  std::vector<Box7> cluster;
  for (double heading : {0.1, 0.1, 0.1, 2.0}) cluster.push_back(vehicle_box(0, 0, heading, 0.8));
  CHECK(kbf_fuse_cluster(cluster, cfg).heading == 0.1);

  // sin-space grid oracle agrees that the cluster of three dominates
  std::vector<double> sines, weights;
  for (const auto& b : cluster) {
    sines.push_back(std::sin(b.heading));
    weights.push_back(b.score);
  }
  CHECK(oracle::kde_grid_argmax(sines, weights, cfg.bandwidths.heading_sin) < 3);
}

TEST_CASE("kbf_fuse_cluster picks the centre of the heavy cluster") {
  FusionConfig cfg;
  std::vector<Box7> cluster;
  const double xs[4] = {0.0, 0.05, 0.1, 3.0};
  const double scores[4] = {0.9, 0.9, 0.9, 0.2};
  for (int i = 0; i < 4; ++i) cluster.push_back(vehicle_box(xs[i], 0, 0, scores[i]));
  const Box7 out = kbf_fuse_cluster(cluster, cfg);
  CHECK(out.cx == 0.05);

  std::vector<double> values(xs, xs + 4), weights(scores, scores + 4);
  CHECK(oracle::kde_grid_argmax(values, weights, cfg.bandwidths.centre) == 1);
}

TEST_CASE("kbf_fuse_cluster rejects an empty cluster") {
  FusionConfig cfg;
  CHECK_THROWS_AS(kbf_fuse_cluster(std::vector<Box7>{}, cfg), std::invalid_argument);
  CHECK_THROWS_AS(wbf_corners(std::vector<Box7>{}), std::invalid_argument);
  CHECK_THROWS_AS(wbf_params(std::vector<Box7>{}), std::invalid_argument);
}

TEST_CASE("kbf on an empty proposal set") {
  FusionConfig cfg;
  CHECK(kbf(ProposalSet{}, cfg).empty());
}

TEST_CASE("kbf fuses one object seen by 16 noisy proposals into one box") {
  std::mt19937_64 gen(4242);
  std::normal_distribution<double> noise(0.0, 0.2);
  std::uniform_real_distribution<double> score(0.5, 0.95);
  FusionConfig cfg;
  const Box7 truth = vehicle_box(5, -3, 0.7, 1.0);

  // baseline: the most confident proposal, the naive way to pick one box
  double best_score_iou_sum = 0.0;
  double fused_iou_sum = 0.0;
  int trials = 100;
  for (int t = 0; t < trials; ++t) {
    ProposalSet props;
    for (int i = 0; i < 16; ++i) {
      Box7 p = truth;
      p.cx += noise(gen);
      p.cy += noise(gen);
      p.l += noise(gen) * 0.5;
      p.w += noise(gen) * 0.25;
      p.heading = wrap_angle(p.heading + noise(gen) * 0.25);
      p.score = score(gen);
      props.boxes.push_back(p);
    }
    const Box7& most_confident = *std::max_element(
        props.boxes.begin(), props.boxes.end(),
        [](const Box7& a, const Box7& b) { return a.score < b.score; });
    best_score_iou_sum += iou_3d(most_confident, truth);
    const auto fused = kbf(props, cfg);
    REQUIRE(fused.size() == 1);
    fused_iou_sum += iou_3d(fused[0], truth);
  }
  CHECK(fused_iou_sum / trials >= best_score_iou_sum / trials);
}

TEST_CASE("kbf keeps two distant objects separate") {
  FusionConfig cfg;
  ProposalSet props;
  for (int i = 0; i < 6; ++i) props.boxes.push_back(vehicle_box(0.05 * i, 0, 0, 0.8));
  for (int i = 0; i < 6; ++i) props.boxes.push_back(vehicle_box(10 + 0.05 * i, 0, 0, 0.9));
  CHECK(kbf(props, cfg).size() == 2);
}

TEST_CASE("kbf output is permutation invariant") {
  oracle::TestRng rng(53);
  FusionConfig cfg;
  cfg.min_cluster_size = 2;
  for (int trial = 0; trial < 20; ++trial) {
    ProposalSet props;
    const int objects = rng.uniform_int(1, 4);
    for (int o = 0; o < objects; ++o) {
      const double cx = 12.0 * o;
      const int members = rng.uniform_int(2, 8);
      for (int i = 0; i < members; ++i) {
        Box7 b = vehicle_box(cx + rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4),
                             rng.uniform(-0.3, 0.3), rng.uniform(0.3, 0.95));
        props.boxes.push_back(b);
      }
    }
    const auto base = kbf(props, cfg);

    ProposalSet shuffled = props;
    std::mt19937_64 gen(trial);
    std::shuffle(shuffled.boxes.begin(), shuffled.boxes.end(), gen);
    const auto out = kbf(shuffled, cfg);

    REQUIRE(out.size() == base.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      CHECK(out[i].cx == base[i].cx);
      CHECK(out[i].cy == base[i].cy);
      CHECK(out[i].heading == base[i].heading);
      CHECK(out[i].score == base[i].score);
    }
  }
}

TEST_CASE("kbf parameters are traceable to cluster members") {
  oracle::TestRng rng(59);
  FusionConfig cfg;
  cfg.min_cluster_size = 3;
  ProposalSet props;
  for (int i = 0; i < 10; ++i) {
    props.boxes.push_back(vehicle_box(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                                      rng.uniform(-1, 1), rng.uniform(0.2, 0.9)));
    props.boxes.back().l = rng.uniform(4.0, 5.0);
  }
  const auto fused = kbf(props, cfg);
  REQUIRE(fused.size() == 1);
  auto contains = [&](auto getter, double value) {
    for (const auto& b : props.boxes)
      if (getter(b) == value) return true;
    return false;
  };
  CHECK(contains([](const Box7& b) { return b.cx; }, fused[0].cx));
  CHECK(contains([](const Box7& b) { return b.cy; }, fused[0].cy));
  CHECK(contains([](const Box7& b) { return b.l; }, fused[0].l));
  CHECK(contains([](const Box7& b) { return b.heading; }, fused[0].heading));
  CHECK(contains([](const Box7& b) { return b.score; }, fused[0].score));
}

TEST_CASE("two-stage TTA fusion still produces one box per object") {
  oracle::TestRng rng(61);
  FusionConfig cfg;
  cfg.two_stage_tta = true;
  cfg.min_cluster_size = 2;
  ProposalSet props;
  for (int det = 0; det < 4; ++det) {
    for (int v = 0; v < 4; ++v) {
      Box7 b = vehicle_box(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), 0.5, 0.8);
      b.detector_id = det;
      props.boxes.push_back(b);
    }
  }
  CHECK(kbf(props, cfg).size() == 1);
}

TEST_CASE("nms keeps the stronger of two overlapping boxes") {
  std::vector<Box7> boxes{vehicle_box(0, 0, 0, 0.9), vehicle_box(0.2, 0, 0, 0.8)};
  REQUIRE(bev_iou(boxes[0], boxes[1]) > 0.5);
  const auto kept = nms(boxes, 0.1);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].score == 0.9);
}

TEST_CASE("nms keeps disjoint boxes") {
  std::vector<Box7> boxes{vehicle_box(0, 0, 0, 0.9), vehicle_box(30, 0, 0, 0.8)};
  CHECK(nms(boxes, 0.1).size() == 2);
}

TEST_CASE("nms equals the brute-force reference on random sets") {
  oracle::TestRng rng(67);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Box7> boxes;
    for (int i = 0; i < 10; ++i) boxes.push_back(oracle::random_box(rng, 4.0));
    const double threshold = rng.uniform(0.05, 0.6);
    const auto mine = nms(boxes, threshold);
    const auto ref = oracle::brute_force_nms(boxes, threshold);
    REQUIRE(mine.size() == ref.size());
    for (std::size_t i = 0; i < mine.size(); ++i) {
      CHECK(mine[i].cx == ref[i].cx);
      CHECK(mine[i].score == ref[i].score);
    }
    // no kept pair exceeds the threshold
    for (std::size_t i = 0; i < mine.size(); ++i)
      for (std::size_t j = i + 1; j < mine.size(); ++j)
        CHECK(bev_iou(mine[i], mine[j]) <= threshold);
  }
}

TEST_CASE("wbf_corners examples") {
  const Box7 cube_a = []() {
    Box7 b;
    b.l = b.w = b.h = 1.0;
    b.score = 0.5;
    return b;
  }();
  Box7 cube_b = cube_a;
  cube_b.cx = 2.0;

  SUBCASE("identical boxes") {
    const Box7 out = wbf_corners(std::vector<Box7>{cube_a, cube_a});
    CHECK(out.cx == doctest::Approx(0.0));
    CHECK(out.l == doctest::Approx(1.0));
    CHECK(out.w == doctest::Approx(1.0));
    CHECK(out.h == doctest::Approx(1.0));
    CHECK(out.score == doctest::Approx(0.5));
  }
  SUBCASE("symmetric average of two unit cubes") {
    const Box7 out = wbf_corners(std::vector<Box7>{cube_a, cube_b});
    CHECK(out.cx == doctest::Approx(1.0));
  }
  SUBCASE("score-weighted centre") {
    Box7 heavy = cube_a;
    heavy.score = 0.9;
    Box7 light = cube_b;
    light.score = 0.1;
    const Box7 out = wbf_corners(std::vector<Box7>{heavy, light});
    CHECK(out.cx == doctest::Approx(0.2));
  }
}

TEST_CASE("wbf_params examples") {
  Box7 a = vehicle_box(0, 0, 0, 0.9);
  Box7 b = vehicle_box(2, 0, 0, 0.1);
  SUBCASE("identical boxes") {
    const Box7 out = wbf_params(std::vector<Box7>{a, a});
    CHECK(out.cx == doctest::Approx(0.0));
    CHECK(out.score == doctest::Approx(0.9));
  }
  SUBCASE("weighted mean of centres") {
    const Box7 out = wbf_params(std::vector<Box7>{a, b});
    CHECK(out.cx == doctest::Approx(0.2));
  }
  SUBCASE("circular mean across the wrap stays at the boundary") {
    Box7 p = vehicle_box(0, 0, -3.1, 0.5);
    Box7 q = vehicle_box(0, 0, 3.1, 0.5);
    const Box7 out = wbf_params(std::vector<Box7>{p, q});
    CHECK(std::fabs(out.heading) == doctest::Approx(kPi).epsilon(1e-9));
  }
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "pseudofuse/geometry.hpp"

#include <cmath>

using namespace pseudofuse;

namespace {

Box7 make_box(double cx, double cy, double cz, double l, double w, double h, double heading,
              double score = 1.0) {
  Box7 b;
  b.cx = cx;
  b.cy = cy;
  b.cz = cz;
  b.l = l;
  b.w = w;
  b.h = h;
  b.heading = heading;
  b.score = score;
  return b;
}

}  // namespace

TEST_CASE("wrap_angle lands in (-pi, pi]") {
  CHECK(wrap_angle(0.0) == doctest::Approx(0.0));
  CHECK(wrap_angle(kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(-kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(3.0 * kPi / 2.0) == doctest::Approx(-kPi / 2.0));
  CHECK(wrap_angle(-3.0 * kPi / 2.0) == doctest::Approx(kPi / 2.0));
  for (double a = -20.0; a < 20.0; a += 0.1) {
    const double r = wrap_angle(a);
    CHECK(r > -kPi);
    CHECK(r <= kPi);
    CHECK(std::fabs(std::remainder(r - a, 2.0 * kPi)) < 1e-9);
  }
}

TEST_CASE("box invariants") {
  CHECK(is_valid(make_box(0, 0, 0, 1, 1, 1, 0)));
  Box7 bad = make_box(0, 0, 0, -1, 1, 1, 0);
  CHECK(!is_valid(bad));
  CHECK(box_invariant_error(bad) == "l must be > 0");
  bad = make_box(0, 0, 0, 1, 1, 1, 0, 1.5);
  CHECK(!is_valid(bad));
}

TEST_CASE("transform_box identity pose") {
  const Box7 b = make_box(1, 0, 0, 4, 2, 1.5, 0.0);
  const Box7 out = transform_box(b, EgoPose{});
  CHECK(out.cx == doctest::Approx(1.0));
  CHECK(out.cy == doctest::Approx(0.0));
  CHECK(out.heading == doctest::Approx(0.0));
}

TEST_CASE("transform_box quarter turn") {
  const Box7 b = make_box(1, 0, 0, 4, 2, 1.5, 0.0);
  const EgoPose pose = make_yaw_pose(kPi / 2.0, Eigen::Vector3d::Zero());
  const Box7 out = transform_box(b, pose);
  CHECK(out.cx == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(out.cy == doctest::Approx(1.0));
  CHECK(out.heading == doctest::Approx(kPi / 2.0));
}

TEST_CASE("transform_box against an independent matrix oracle") {
  const Box7 b = make_box(2, 3, 0, 4.5, 1.9, 1.6, 0.3);
  const EgoPose pose = make_yaw_pose(0.5, Eigen::Vector3d(10, 0, 1));
  const Box7 out = transform_box(b, pose);

  const double c = std::cos(0.5), s = std::sin(0.5);
  CHECK(out.cx == doctest::Approx(10.0 + 2.0 * c - 3.0 * s).epsilon(1e-12));
  CHECK(out.cy == doctest::Approx(2.0 * s + 3.0 * c).epsilon(1e-12));
  CHECK(out.cz == doctest::Approx(1.0));
  CHECK(out.heading == doctest::Approx(0.8));
  CHECK(out.l == b.l);
  CHECK(out.score == b.score);
}

TEST_CASE("transform round trip through the inverse pose") {
  oracle::TestRng rng(7);
  for (int i = 0; i < 200; ++i) {
    const Box7 b = oracle::random_box(rng);
    const EgoPose pose = make_yaw_pose(
        rng.uniform(-kPi, kPi),
        Eigen::Vector3d(rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-3, 3)));
    const Box7 back = transform_box(transform_box(b, pose), inverse(pose));
    CHECK(back.cx == doctest::Approx(b.cx).epsilon(1e-9));
    CHECK(back.cy == doctest::Approx(b.cy).epsilon(1e-9));
    CHECK(back.cz == doctest::Approx(b.cz).epsilon(1e-9));
    CHECK(std::fabs(std::remainder(back.heading - b.heading, 2.0 * kPi)) < 1e-9);
  }
}

TEST_CASE("bev_iou identical boxes") {
  const Box7 b = make_box(3, -2, 0, 4, 2, 1.5, 0.7);
  CHECK(bev_iou(b, b) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("bev_iou axis-aligned analytic case") {
  const Box7 a = make_box(0, 0, 0, 2, 2, 1, 0);
  const Box7 b = make_box(1, 0, 0, 2, 2, 1, 0);
  CHECK(bev_iou(a, b) == doctest::Approx(2.0 / 6.0).epsilon(1e-9));
  CHECK(bev_iou(b, a) == doctest::Approx(2.0 / 6.0).epsilon(1e-9));
}

TEST_CASE("bev_iou rotated case matches Monte-Carlo") {
  const Box7 a = make_box(0, 0, 0, 2, 1, 1, 0);
  const Box7 b = make_box(0, 0, 0, 2, 1, 1, kPi / 4.0);
  const double mc = oracle::mc_bev_iou(a, b, 1000000, 99);
  CHECK(std::fabs(bev_iou(a, b) - mc) < 1e-2);
}

TEST_CASE("bev_iou random pairs: symmetry, bounds, rigid invariance") {
  oracle::TestRng rng(11);
  for (int i = 0; i < 300; ++i) {
    Box7 a = oracle::random_box(rng, 4.0);
    Box7 b = oracle::random_box(rng, 4.0);
    const double ab = bev_iou(a, b);
    const double ba = bev_iou(b, a);
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-12));

    const EgoPose rigid = make_yaw_pose(
        rng.uniform(-kPi, kPi), Eigen::Vector3d(rng.uniform(-20, 20), rng.uniform(-20, 20), 0));
    const double moved = bev_iou(transform_box(a, rigid), transform_box(b, rigid));
    CHECK(moved == doctest::Approx(ab).epsilon(1e-9));
  }
}

TEST_CASE("bev_iou equals one only for identical non-square footprints") {
  const Box7 a = make_box(1, 2, 0, 4, 2, 1.5, 0.3);
  Box7 flipped = a;
  flipped.heading = wrap_angle(a.heading + kPi);  // same rectangle
  CHECK(bev_iou(a, flipped) == doctest::Approx(1.0).epsilon(1e-12));
  Box7 rotated = a;
  rotated.heading = wrap_angle(a.heading + 0.2);
  CHECK(bev_iou(a, rotated) < 1.0 - 1e-3);
  Box7 shifted = a;
  shifted.cx += 0.05;
  CHECK(bev_iou(a, shifted) < 1.0 - 1e-3);
}

TEST_CASE("bev_iou degenerate rectangles") {
  Box7 a = make_box(0, 0, 0, 1, 1, 1, 0);
  Box7 z = a;
  z.l = 0.0;  // degenerate on purpose
  CHECK(bev_iou(a, z) == 0.0);
  CHECK(bev_iou(z, z) == 0.0);
}

TEST_CASE("iou_3d identical and vertical-overlap analytic cases") {
  const Box7 b = make_box(1, 1, 1, 4, 2, 2, 0.4);
  CHECK(iou_3d(b, b) == doctest::Approx(1.0).epsilon(1e-9));

  const Box7 lower = make_box(0, 0, 1.0, 2, 2, 2, 0);  // z in [0, 2]
  const Box7 upper = make_box(0, 0, 2.0, 2, 2, 2, 0);  // z in [1, 3]
  CHECK(iou_3d(lower, upper) == doctest::Approx(1.0 / 3.0).epsilon(1e-9));

  const Box7 disjoint = make_box(0, 0, 5.0, 2, 2, 2, 0);
  CHECK(iou_3d(lower, disjoint) == 0.0);
}

TEST_CASE("iou_3d random rotated pair matches Monte-Carlo") {
  oracle::TestRng rng(17);
  const Box7 a = make_box(0.2, -0.1, 0.1, 3.5, 1.8, 1.5, 0.9);
  const Box7 b = make_box(0.8, 0.4, 0.4, 4.2, 2.0, 1.7, -0.6);
  const double mc = oracle::mc_iou_3d(a, b, 1000000, 5);
  CHECK(std::fabs(iou_3d(a, b) - mc) < 1e-2);
}

TEST_CASE("points_in_box basics") {
  const Box7 b = make_box(1, 2, 0.5, 4, 2, 1, 0.6);
  std::vector<Eigen::Vector3d> pts{{1, 2, 0.5}};
  CHECK(points_in_box(b, pts) == 1);

  // point at distance l from the centre along the heading is outside
  pts[0] = Eigen::Vector3d(1 + b.l * std::cos(0.6), 2 + b.l * std::sin(0.6), 0.5);
  CHECK(points_in_box(b, pts) == 0);

  // boundary counts as inside
  pts[0] = Eigen::Vector3d(1 + 0.5 * b.l * std::cos(0.6), 2 + 0.5 * b.l * std::sin(0.6), 0.5);
  CHECK(points_in_box(b, pts) == 1);
}

TEST_CASE("points_in_box matches the rotate-to-canonical oracle") {
  oracle::TestRng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const Box7 b = oracle::random_box(rng, 3.0);
    std::vector<Eigen::Vector3d> pts;
    for (int i = 0; i < 500; ++i)
      pts.emplace_back(rng.uniform(-6, 6), rng.uniform(-6, 6), rng.uniform(-4, 4));

    // rotate points and box into the box frame and count axis-aligned hits
    Box7 canonical = b;
    canonical.cx = canonical.cy = canonical.cz = 0.0;
    canonical.heading = 0.0;
    const double c = std::cos(b.heading), s = std::sin(b.heading);
    int expected = 0;
    for (const auto& p : pts) {
      const double dx = p.x() - b.cx, dy = p.y() - b.cy, dz = p.z() - b.cz;
      const Eigen::Vector3d local(c * dx + s * dy, -s * dx + c * dy, dz);
      if (std::fabs(local.x()) <= 0.5 * b.l && std::fabs(local.y()) <= 0.5 * b.w &&
          std::fabs(local.z()) <= 0.5 * b.h)
        ++expected;
    }
    CHECK(points_in_box(b, pts) == expected);
  }
}

TEST_CASE("points_in_box invariant under joint rigid transform") {
  oracle::TestRng rng(29);
  for (int trial = 0; trial < 50; ++trial) {
    const Box7 b = oracle::random_box(rng, 3.0);
    std::vector<Eigen::Vector3d> pts;
    for (int i = 0; i < 200; ++i)
      pts.emplace_back(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-3, 3));
    const EgoPose rigid = make_yaw_pose(
        rng.uniform(-kPi, kPi),
        Eigen::Vector3d(rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-2, 2)));
    std::vector<Eigen::Vector3d> moved;
    for (const auto& p : pts) moved.push_back(transform_point(p, rigid));
    CHECK(points_in_box(b, pts) == points_in_box(transform_box(b, rigid), moved));
  }
}

TEST_CASE("bev_iou against Monte-Carlo on random overlapping pairs") {
  oracle::TestRng rng(31);
  int checked = 0;
  for (int i = 0; checked < 10 && i < 200; ++i) {
    Box7 a = oracle::random_box(rng, 2.0);
    Box7 b = oracle::random_box(rng, 2.0);
    if (bev_iou(a, b) < 0.05) continue;
    ++checked;
    const double mc = oracle::mc_bev_iou(a, b, 200000, 1000 + i);
    CHECK(std::fabs(bev_iou(a, b) - mc) < 2e-2);
  }
  CHECK(checked == 10);
}

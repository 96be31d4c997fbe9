#include "pseudofuse/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace pseudofuse {

namespace {
constexpr double kCoincidentEps = 1e-9;
}

double wrap_angle(double a) {
  double r = std::fmod(a + kPi, 2.0 * kPi);
  if (r <= 0.0) r += 2.0 * kPi;
  return r - kPi;
}

std::string box_invariant_error(const Box7& b) {
  if (!(b.l > 0.0)) return "l must be > 0";
  if (!(b.w > 0.0)) return "w must be > 0";
  if (!(b.h > 0.0)) return "h must be > 0";
  if (!(b.heading > -kPi - 1e-12 && b.heading <= kPi + 1e-12)) return "heading outside (-pi, pi]";
  if (!(b.score >= 0.0 && b.score <= 1.0)) return "score outside [0, 1]";
  if (b.frame_idx < 0) return "frame_idx must be non-negative";
  return {};
}

bool is_valid(const Box7& b) { return box_invariant_error(b).empty(); }

bool box_less_canonical(const Box7& a, const Box7& b) {
  auto key = [](const Box7& x) {
    return std::make_tuple(-x.score, x.cx, x.cy, x.cz, x.heading, x.l, x.w, x.h,
                           x.detector_id, x.class_id, x.frame_idx);
  };
  return key(a) < key(b);
}

EgoPose make_yaw_pose(double yaw, const Eigen::Vector3d& translation, int frame_idx) {
  EgoPose p;
  p.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()));
  p.translation = translation;
  p.frame_idx = frame_idx;
  return p;
}

EgoPose inverse(const EgoPose& pose) {
  EgoPose inv;
  inv.rotation = pose.rotation.conjugate();
  inv.translation = -(inv.rotation * pose.translation);
  inv.frame_idx = pose.frame_idx;
  return inv;
}

double pose_yaw(const EgoPose& pose) {
  const Eigen::Matrix3d r = pose.rotation.toRotationMatrix();
  return std::atan2(r(1, 0), r(0, 0));
}

Box7 transform_box(const Box7& box, const EgoPose& pose) {
  Box7 out = box;
  const Eigen::Vector3d c = pose.rotation * Eigen::Vector3d(box.cx, box.cy, box.cz) + pose.translation;
  out.cx = c.x();
  out.cy = c.y();
  out.cz = c.z();
  out.heading = wrap_angle(box.heading + pose_yaw(pose));
  return out;
}

Eigen::Vector3d transform_point(const Eigen::Vector3d& p, const EgoPose& pose) {
  return pose.rotation * p + pose.translation;
}

std::array<Eigen::Vector2d, 4> bev_corners(const Box7& b) {
  const double c = std::cos(b.heading);
  const double s = std::sin(b.heading);
  const double hl = 0.5 * b.l;
  const double hw = 0.5 * b.w;
  // counterclockwise starting from the front-left corner
  const std::array<std::pair<double, double>, 4> local = {
      {{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}}};
  std::array<Eigen::Vector2d, 4> out;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto [x, y] = local[i];
    out[i] = Eigen::Vector2d(b.cx + c * x - s * y, b.cy + s * x + c * y);
  }
  return out;
}

double bev_area(const Box7& b) { return b.l * b.w; }

namespace {

double polygon_area(const std::vector<Eigen::Vector2d>& poly) {
  if (poly.size() < 3) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % poly.size()];
    acc += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * std::fabs(acc);
}

// Sutherland-Hodgman: keep the part of `poly` on the left of edge a->b.
std::vector<Eigen::Vector2d> clip_by_edge(const std::vector<Eigen::Vector2d>& poly,
                                          const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  std::vector<Eigen::Vector2d> out;
  out.reserve(poly.size() + 1);
  const Eigen::Vector2d dir = b - a;
  auto side = [&](const Eigen::Vector2d& p) {
    return dir.x() * (p.y() - a.y()) - dir.y() * (p.x() - a.x());
  };
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d& cur = poly[i];
    const Eigen::Vector2d& nxt = poly[(i + 1) % n];
    const double sc = side(cur);
    const double sn = side(nxt);
    const bool cur_in = sc >= -kCoincidentEps;
    const bool nxt_in = sn >= -kCoincidentEps;
    if (cur_in) out.push_back(cur);
    if (cur_in != nxt_in) {
      const double denom = sc - sn;
      if (std::fabs(denom) > kCoincidentEps) {
        const double t = sc / denom;
        out.push_back(cur + t * (nxt - cur));
      }
    }
  }
  // drop near-duplicate vertices produced by touching edges
  std::vector<Eigen::Vector2d> dedup;
  dedup.reserve(out.size());
  for (const auto& p : out) {
    if (dedup.empty() || (p - dedup.back()).norm() > kCoincidentEps) dedup.push_back(p);
  }
  while (dedup.size() > 1 && (dedup.front() - dedup.back()).norm() <= kCoincidentEps)
    dedup.pop_back();
  return dedup;
}

inline double bev_circumradius(const Box7& b) { return 0.5 * std::hypot(b.l, b.w); }

}  // namespace

double bev_intersection_area(const Box7& a, const Box7& b) {
  const double dx = a.cx - b.cx;
  const double dy = a.cy - b.cy;
  const double reach = bev_circumradius(a) + bev_circumradius(b);
  if (dx * dx + dy * dy > reach * reach) return 0.0;

  const auto ca = bev_corners(a);
  const auto cb = bev_corners(b);
  std::vector<Eigen::Vector2d> poly(ca.begin(), ca.end());
  for (std::size_t i = 0; i < 4 && !poly.empty(); ++i) {
    poly = clip_by_edge(poly, cb[i], cb[(i + 1) % 4]);
  }
  return polygon_area(poly);
}

double bev_iou(const Box7& a, const Box7& b) {
  const double area_a = bev_area(a);
  const double area_b = bev_area(b);
  if (area_a <= 0.0 || area_b <= 0.0) return 0.0;
  const double inter = bev_intersection_area(a, b);
  const double uni = area_a + area_b - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double iou_3d(const Box7& a, const Box7& b) {
  const double vol_a = a.l * a.w * a.h;
  const double vol_b = b.l * b.w * b.h;
  if (vol_a <= 0.0 || vol_b <= 0.0) return 0.0;
  const double zlo = std::max(a.cz - 0.5 * a.h, b.cz - 0.5 * b.h);
  const double zhi = std::min(a.cz + 0.5 * a.h, b.cz + 0.5 * b.h);
  const double dz = zhi - zlo;
  if (dz <= 0.0) return 0.0;
  const double inter = bev_intersection_area(a, b) * dz;
  const double uni = vol_a + vol_b - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

bool point_in_box(const Box7& box, const Eigen::Vector3d& p) {
  const double dx = p.x() - box.cx;
  const double dy = p.y() - box.cy;
  const double dz = p.z() - box.cz;
  if (std::fabs(dz) > 0.5 * box.h) return false;
  const double c = std::cos(box.heading);
  const double s = std::sin(box.heading);
  const double lx = c * dx + s * dy;
  const double ly = -s * dx + c * dy;
  return std::fabs(lx) <= 0.5 * box.l && std::fabs(ly) <= 0.5 * box.w;
}

int points_in_box(const Box7& box, std::span<const Eigen::Vector3d> points) {
  int n = 0;
  for (const auto& p : points)
    if (point_in_box(box, p)) ++n;
  return n;
}

}  // namespace pseudofuse

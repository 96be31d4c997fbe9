#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <array>
#include <span>
#include <string>
#include <vector>

namespace pseudofuse {

inline constexpr double kPi = 3.14159265358979323846;

/// detector_id assigned to boxes produced by a fuser rather than a detector.
inline constexpr int kFusedDetectorId = -1;

/// Normalize an angle to (-pi, pi].
double wrap_angle(double a);

/// 7-DOF oriented box: centre, dims (length along heading, width, height),
/// heading in (-pi, pi], confidence score and provenance ids.
struct Box7 {
  double cx = 0.0;
  double cy = 0.0;
  double cz = 0.0;
  double l = 1.0;
  double w = 1.0;
  double h = 1.0;
  double heading = 0.0;
  double score = 1.0;
  int class_id = 0;
  int detector_id = 0;
  int frame_idx = 0;
};

/// Empty string when valid, otherwise a description of the violated invariant.
std::string box_invariant_error(const Box7& b);
bool is_valid(const Box7& b);

/// Total order used wherever output determinism requires a canonical box
/// ordering: score descending, then geometry ascending.
bool box_less_canonical(const Box7& a, const Box7& b);

/// SE(3) ego-to-world transform for one frame.
struct EgoPose {
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  int frame_idx = 0;
};

EgoPose make_yaw_pose(double yaw, const Eigen::Vector3d& translation, int frame_idx = 0);
EgoPose inverse(const EgoPose& pose);
double pose_yaw(const EgoPose& pose);

/// Centre mapped by R*c + t, heading incremented by the pose yaw and
/// renormalized. Dims, score and ids are unchanged.
Box7 transform_box(const Box7& box, const EgoPose& pose);

Eigen::Vector3d transform_point(const Eigen::Vector3d& p, const EgoPose& pose);

/// BEV footprint corners in counterclockwise order.
std::array<Eigen::Vector2d, 4> bev_corners(const Box7& b);

double bev_area(const Box7& b);

/// Area of the intersection of the two rotated BEV rectangles
/// (Sutherland-Hodgman clipping; vertices within 1e-9 treated coincident).
double bev_intersection_area(const Box7& a, const Box7& b);

/// Rotated-rectangle IoU in bird's eye view. Degenerate boxes give 0.
double bev_iou(const Box7& a, const Box7& b);

/// Volume IoU: BEV intersection area times vertical overlap over volume union.
double iou_3d(const Box7& a, const Box7& b);

/// Number of points inside the oriented box; boundary counts as inside.
int points_in_box(const Box7& box, std::span<const Eigen::Vector3d> points);

bool point_in_box(const Box7& box, const Eigen::Vector3d& p);

}  // namespace pseudofuse

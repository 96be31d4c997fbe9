#pragma once

#include "pseudofuse/geometry.hpp"

#include <span>
#include <utility>
#include <vector>

namespace pseudofuse {

enum class AssocMetric { BevIou, CentroidDistance };

struct TrackerConfig {
  AssocMetric metric = AssocMetric::BevIou;
  double iou_gate = 0.1;       // minimum BEV IoU for a match
  double distance_gate = 2.0;  // metres, for the distance metric / fallback
  bool distance_fallback = true;
  int max_age = 3;   // frames a track survives unmatched
  int min_hits = 2;  // confirmations before a track is emitted

  double meas_sigma_pos = 0.5;
  double meas_sigma_heading = 0.1;
  double meas_sigma_dims = 0.25;
  double process_sigma_pos = 0.5;
  double process_sigma_vel = 0.25;
  double process_sigma_heading = 0.05;
  double process_sigma_dims = 0.02;
  double init_pos_var = 1.0;
  double init_vel_var = 10.0;
};

inline constexpr int kStateDim = 9;  // x, y, z, heading, l, w, h, vx, vy
inline constexpr int kMeasDim = 7;

/// Constant-velocity Kalman state over one tracked object.
struct TrackState {
  Eigen::Matrix<double, kStateDim, 1> mean = Eigen::Matrix<double, kStateDim, 1>::Zero();
  Eigen::Matrix<double, kStateDim, kStateDim> covariance =
      Eigen::Matrix<double, kStateDim, kStateDim>::Identity();
  int hits = 1;
  int misses = 0;
  int track_id = 0;
};

TrackState make_track_state(const Box7& detection, const TrackerConfig& cfg, int track_id);

/// One prediction step (dt frames, default 1): planar constant velocity on
/// (x, y); z, heading and dims held; covariance inflated by process noise.
TrackState predict(const TrackState& state, const TrackerConfig& cfg, double dt = 1.0);

/// Kalman measurement update on (x, y, z, heading, l, w, h). The heading
/// innovation is wrapped to (-pi, pi]. Throws std::runtime_error when the
/// posterior covariance loses positive semi-definiteness.
TrackState update(const TrackState& state, const Box7& detection, const TrackerConfig& cfg);

/// Box carried by the state mean (dims clamped positive).
Box7 state_to_box(const TrackState& state, int frame_idx, double score, int class_id);

enum class MotionState { Unknown, Static, Dynamic };

struct TrackEntry {
  int frame_idx = 0;
  Box7 box;
  bool interpolated = false;
};

struct Track {
  int track_id = 0;
  std::vector<TrackEntry> entries;  // strictly increasing in frame_idx
  MotionState motion_state = MotionState::Unknown;
};

struct Association {
  std::vector<std::pair<int, int>> matches;  // (track index, detection index)
  std::vector<int> unmatched_tracks;
  std::vector<int> unmatched_detections;
};

/// Optimal one-to-one assignment (Hungarian) under the configured gate.
Association associate(std::span<const TrackState> tracks, std::span<const Box7> detections,
                      const TrackerConfig& cfg);

struct FrameBoxes {
  int frame_idx = 0;
  std::vector<Box7> boxes;
};

/// Tracking-by-detection over a sequence of frames in increasing frame_idx
/// (boxes in world coordinates). Matched entries carry the associated
/// detection; gaps inside a track are filled with predicted boxes flagged
/// interpolated. Tracks with fewer than min_hits associations are dropped.
std::vector<Track> track_sequence(std::span<const FrameBoxes> frames, const TrackerConfig& cfg);

namespace detail {
/// Min-cost assignment on a square cost matrix; returns the column picked
/// for each row. Exposed for testing against exhaustive search.
std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost);
}  // namespace detail

}  // namespace pseudofuse

#include "pseudofuse/static_refine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pseudofuse {

MotionState classify_motion(const Track& track, const MotionConfig& cfg) {
  if (track.entries.empty()) throw std::invalid_argument("classify_motion: empty track");
  if (track.entries.size() == 1) return MotionState::Unknown;

  const auto centroid = [](const TrackEntry& e) {
    return Eigen::Vector3d(e.box.cx, e.box.cy, e.box.cz);
  };
  const double begin_to_end = (centroid(track.entries.back()) - centroid(track.entries.front())).norm();
  if (begin_to_end >= cfg.begin_to_end_threshold) return MotionState::Dynamic;

  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& e : track.entries) mean += centroid(e);
  mean /= static_cast<double>(track.entries.size());
  // total centroid variance (trace of the scatter matrix): the per-axis sum
  // is rotation-invariant, per-axis components alone are not
  double var = 0.0;
  for (const auto& e : track.entries) var += (centroid(e) - mean).squaredNorm();
  var /= static_cast<double>(track.entries.size());
  if (var >= cfg.centre_variance_threshold) return MotionState::Dynamic;
  return MotionState::Static;
}

std::vector<Track> correct_16f_motion(std::span<const Track> tracks_1f,
                                      std::vector<Track> tracks_16f, const MotionConfig& cfg) {
  std::vector<const Track*> dynamic_1f;
  for (const auto& t : tracks_1f)
    if (t.motion_state == MotionState::Dynamic) dynamic_1f.push_back(&t);

  for (auto& t16 : tracks_16f) {
    if (t16.motion_state != MotionState::Static) continue;
    bool overlapped = false;
    for (const Track* t1 : dynamic_1f) {
      for (const auto& e1 : t1->entries) {
        for (const auto& e16 : t16.entries) {
          if (bev_iou(e1.box, e16.box) >= cfg.overlap_iou_threshold) {
            overlapped = true;
            break;
          }
        }
        if (overlapped) break;
      }
      if (overlapped) break;
    }
    if (overlapped) t16.motion_state = MotionState::Dynamic;
  }
  return tracks_16f;
}

std::vector<StaticBox> refine_static_boxes(const Track& track, const StaticRefineConfig& cfg) {
  std::vector<StaticBox> out;
  if (track.entries.empty()) return out;

  FusionConfig fusion_cfg;
  fusion_cfg.bandwidths = cfg.bandwidths;

  std::vector<Box7> window;
  for (std::size_t k = 0; k < track.entries.size(); ++k) {
    const int frame = track.entries[k].frame_idx;
    window.clear();
    // entries are frame-ordered, so the window is a contiguous span ending at k
    for (std::size_t j = 0; j <= k; ++j) {
      if (track.entries[j].frame_idx >= frame - cfg.window) window.push_back(track.entries[j].box);
    }
    Box7 fused = kbf_fuse_cluster(window, fusion_cfg);
    fused.score = std::max(cfg.score_floor, fused.score);
    fused.frame_idx = frame;
    out.push_back(StaticBox{frame, fused, false});
  }
  return out;
}

namespace {

int associated_detections(const Track& track) {
  int n = 0;
  for (const auto& e : track.entries)
    if (!e.interpolated) ++n;
  return n;
}

}  // namespace

std::vector<StaticBox> propagate_static(const Track& track, std::span<const StaticBox> refined,
                                        int sequence_first_frame, int sequence_last_frame,
                                        const StaticRefineConfig& cfg) {
  std::vector<StaticBox> out(refined.begin(), refined.end());
  if (refined.empty()) return out;
  if (associated_detections(track) <= cfg.min_track_detections) return out;

  const StaticBox& first = refined.front();
  const StaticBox& last = refined.back();

  std::vector<StaticBox> head;
  for (int f = sequence_first_frame; f < first.frame_idx; ++f) {
    const int m = first.frame_idx - f;
    StaticBox b{f, first.box, true};
    b.box.frame_idx = f;
    b.box.score = first.box.score * std::pow(cfg.decay, m);
    head.push_back(b);
  }
  for (int f = last.frame_idx + 1; f <= sequence_last_frame; ++f) {
    const int m = f - last.frame_idx;
    StaticBox b{f, last.box, true};
    b.box.frame_idx = f;
    b.box.score = last.box.score * std::pow(cfg.decay, m);
    out.push_back(b);
  }
  out.insert(out.begin(), head.begin(), head.end());
  return out;
}

std::vector<StaticBox> propagate_static(const Track& track, std::span<const StaticBox> refined,
                                        int sequence_length, const StaticRefineConfig& cfg) {
  return propagate_static(track, refined, 0, sequence_length - 1, cfg);
}

}  // namespace pseudofuse

#pragma once

#include "pseudofuse/fusion.hpp"
#include "pseudofuse/tracking.hpp"

#include <span>
#include <vector>

namespace pseudofuse {

struct MotionConfig {
  double begin_to_end_threshold = 2.0;    // metres
  double centre_variance_threshold = 0.25;  // square metres, per axis
  double overlap_iou_threshold = 0.1;
};

struct StaticRefineConfig {
  int window = 16;             // H historical frames
  double score_floor = 0.7;    // alpha
  double decay = 0.95;         // beta
  int min_track_detections = 7;
  Bandwidths bandwidths;
};

/// Static iff the first-to-last centroid distance and the per-axis centroid
/// variance both stay under their thresholds; single-entry tracks are
/// Unknown. Throws on empty tracks.
MotionState classify_motion(const Track& track, const MotionConfig& cfg);

/// Relabels a static 16-frame track as dynamic when any box of any dynamic
/// 1-frame trajectory overlaps any of its boxes (BEV IoU at or above the
/// threshold). Dynamic labels are never flipped back.
std::vector<Track> correct_16f_motion(std::span<const Track> tracks_1f,
                                      std::vector<Track> tracks_16f, const MotionConfig& cfg);

struct StaticBox {
  int frame_idx = 0;
  Box7 box;
  bool propagated = false;
};

/// Rolling-window refinement of a static track: each frame k with an entry
/// is fused from the track boxes in [k-H, k] (cluster-size gate waived);
/// the output score is max(score_floor, fused score).
std::vector<StaticBox> refine_static_boxes(const Track& track, const StaticRefineConfig& cfg);

/// Copies the first/last refined box to every sequence frame before/after
/// the track, decaying the score by decay^m with m the frame distance. Only
/// tracks with more than min_track_detections associated detections
/// propagate; others return `refined` unchanged.
std::vector<StaticBox> propagate_static(const Track& track, std::span<const StaticBox> refined,
                                        int sequence_first_frame, int sequence_last_frame,
                                        const StaticRefineConfig& cfg);

/// Convenience overload for sequences covering frames [0, sequence_length).
std::vector<StaticBox> propagate_static(const Track& track, std::span<const StaticBox> refined,
                                        int sequence_length, const StaticRefineConfig& cfg);

}  // namespace pseudofuse

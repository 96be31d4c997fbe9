#pragma once

#include "pseudofuse/fusion.hpp"
#include "pseudofuse/static_refine.hpp"
#include "pseudofuse/tracking.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pseudofuse {

/// One raw detection before de-augmentation.
struct TaggedBox {
  Box7 box;
  TtaTransform tta;
};

struct FrameInput {
  int frame_idx = 0;
  /// Raw proposals indexed by detector id, 1-frame and 16-frame streams.
  std::vector<std::vector<TaggedBox>> one_frame;
  std::vector<std::vector<TaggedBox>> multi_frame;
  EgoPose pose;
  std::vector<Eigen::Vector3d> points;
  bool has_points = false;
};

struct SequenceInput {
  std::string sequence_id = "seq";
  std::vector<std::string> detector_names;
  std::vector<FrameInput> frames;  // strictly increasing frame_idx
};

enum class Provenance { Fused1f, Tracked1f, StaticRefined, StaticPropagated };

const char* provenance_name(Provenance p);
std::optional<Provenance> provenance_from_name(const std::string& name);

struct PseudoLabel {
  Box7 box;
  Provenance provenance = Provenance::Fused1f;
};

struct PseudoLabelSet {
  std::vector<int> frames;
  std::vector<std::vector<PseudoLabel>> labels;  // aligned with frames
  std::string config_hash;
};

struct PipelineConfig {
  FusionConfig fusion;
  TrackerConfig tracker_1f;
  TrackerConfig tracker_16f;
  MotionConfig motion;
  StaticRefineConfig static_refine;
  double final_score_threshold = 0.6;
  double final_nms_iou = 0.1;
  int min_points_in_box = 1;
};

/// Concatenate the per-frame candidates, NMS at final_nms_iou by descending
/// score, drop boxes at or below final_score_threshold, and (when points are
/// given) drop boxes with fewer than min_points_in_box points inside.
/// All boxes and points must share one coordinate frame.
std::vector<PseudoLabel> assemble_frame(std::span<const Box7> fused_1f,
                                        std::span<const Box7> tracked_1f,
                                        std::span<const PseudoLabel> static_boxes,
                                        const std::vector<Eigen::Vector3d>* points,
                                        const PipelineConfig& cfg);

/// Full pipeline: de-augment + fuse both streams per frame, track in world
/// coordinates, classify and correct motion, refine and propagate static
/// 16-frame tracks, assemble each frame and return labels in ego
/// coordinates.
PseudoLabelSet run_pipeline(const SequenceInput& input, const PipelineConfig& cfg, int workers = 1);

/// Stage 1 only: de-augmented, pooled, KBF-fused boxes per frame for the
/// chosen stream, in ego coordinates.
std::vector<std::vector<Box7>> fuse_stream(const SequenceInput& input, const PipelineConfig& cfg,
                                           bool multi_frame, int workers = 1);

/// Comparison fusers sharing the KBF clustering (NMS skips clustering and
/// suppresses the pooled proposals directly).
enum class FusionMethod { Kbf, WbfCorners, WbfParams, Nms };

std::vector<std::vector<Box7>> fuse_stream_method(const SequenceInput& input,
                                                  const PipelineConfig& cfg, bool multi_frame,
                                                  FusionMethod method, double nms_iou = 0.5,
                                                  int workers = 1);

/// Run fn(i) for i in [0, n) on `workers` threads; results must be written
/// to per-index slots to keep outputs deterministic.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace pseudofuse

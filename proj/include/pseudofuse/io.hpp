#pragma once

#include "pseudofuse/pipeline.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace pseudofuse {

/// One line of a detection file (box in the ego frame of `frame`, possibly
/// still TTA-augmented).
struct DetectionRecord {
  int frame = 0;
  std::string detector;
  TtaTransform tta;
  bool multi_frame = false;  // "stream": "1f" | "16f"
  Box7 box;
};

std::vector<DetectionRecord> load_detections(const std::string& path);
void save_detections(const std::vector<DetectionRecord>& records, const std::string& path);

std::vector<EgoPose> load_poses(const std::string& path);
void save_poses(const std::vector<EgoPose>& poses, const std::string& path);

/// Binary points file: per frame a uint32 count, a uint32 frame index and
/// count little-endian float32 xyz triples.
std::vector<std::pair<int, std::vector<Eigen::Vector3d>>> load_points(const std::string& path);
void save_points(const std::vector<std::pair<int, std::vector<Eigen::Vector3d>>>& frames,
                 const std::string& path);

/// Assembles a validated SequenceInput. Every detection frame must have a
/// pose; malformed records are rejected with their path and line number.
SequenceInput load_sequence(const std::vector<std::string>& detection_paths,
                            const std::string& pose_path,
                            const std::optional<std::string>& points_path);

void save_pseudo_labels(const PseudoLabelSet& labels, const std::string& path);
PseudoLabelSet load_pseudo_labels(const std::string& path);

/// Pseudo-label-format writer with a caller-chosen provenance string (used
/// for ground-truth and stage outputs).
void save_label_frames(const std::vector<int>& frames,
                       const std::vector<std::vector<Box7>>& boxes, const std::string& provenance,
                       const std::string& path, const std::string& config_hash = "");

/// Reads any pseudo-label-format file into per-frame box lists, ignoring
/// provenance. Returns (frames, boxes) aligned.
std::pair<std::vector<int>, std::vector<std::vector<Box7>>> load_label_boxes(
    const std::string& path);

/// Track files: one JSON line per entry, world-frame boxes.
void save_tracks(const std::vector<Track>& tracks, const std::string& path);
std::vector<Track> load_tracks(const std::string& path);

/// Shell-style glob for --detections (supports * and ? in the basename).
std::vector<std::string> expand_glob(const std::string& pattern);

}  // namespace pseudofuse

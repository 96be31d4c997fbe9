#pragma once

#include "pseudofuse/pipeline.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pseudofuse {

/// Noise and scene model for the deterministic synthetic benchmark. Four
/// simulated detector variants with distinct noise scales, range knees and
/// score baselines stand in for source-trained detectors.
struct SynthConfig {
  int n_frames = 200;
  int n_static = 18;
  int n_dynamic = 12;
  int n_detectors = 4;
  double ego_speed = 0.5;  // metres per frame along +x

  double centre_sigma = 0.3;
  double dim_sigma = 0.15;
  double heading_sigma = 0.1;
  double heading_flip_prob = 0.1;  // pi heading error
  double outlier_prob = 0.1;       // heavy-tailed detector hiccups
  double outlier_factor = 3.0;
  double fp_rate = 0.5;            // expected false positives per variant pass per frame

  // step dropout: probability of dropping a detection below/above the knee
  double near_dropout_1f = 0.1;
  double far_dropout_1f = 1.0;
  double range_knee_1f = 40.0;
  double near_dropout_16f = 0.1;
  double far_dropout_16f = 0.3;
  double range_knee_16f = 40.0;

  double noise_range_scale = 60.0;        // sigma grows by (1 + range/scale)
  double static_16f_noise_factor = 0.5;   // accumulation helps static objects
  double dynamic_16f_noise_factor = 1.25; // and smears dynamic ones
  double dynamic_16f_max_lag = 6.0;       // frames of along-track smear
  /// per-frame registration error of the accumulated cloud, shared by every
  /// 16f detection of a vehicle in that frame
  double reg_sigma_16f = 0.2;
  /// scale on the built-in per-detector systematic biases (dims, centre,
  /// heading); detectors disagree the way differently-trained models do
  double detector_bias_scale = 1.0;

  double gt_range = 70.0;

  // false-static ghost boxes injected on dynamic trajectories (16f stream)
  double ghost_rate = 1.0;  // probability of one anchor per dynamic vehicle
  int ghost_duration = 25;
  double ghost_dropout = 0.3;

  bool emit_points = true;
  std::uint64_t seed = 0;
};

struct VehicleTruth {
  bool is_static = true;
  std::vector<Box7> world_boxes;  // one per frame
};

struct GhostAnchor {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();  // world
  double heading = 0.0;
  int first_frame = 0;
  int last_frame = 0;
  int source_vehicle = 0;
};

struct SynthScene {
  SequenceInput input;
  std::vector<std::vector<Box7>> gt;  // per frame, ego coordinates
  std::vector<VehicleTruth> vehicles;
  std::vector<GhostAnchor> ghosts;
};

/// Deterministic for a fixed config (including seed).
SynthScene generate_scene(const SynthConfig& cfg);

/// Writes detections.jsonl, poses.jsonl, gt.jsonl and (when enabled)
/// points.bin in the pipeline file formats.
void write_scene(const SynthScene& scene, const std::string& out_dir);

}  // namespace pseudofuse

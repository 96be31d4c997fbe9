#include "pseudofuse/synth.hpp"

#include "pseudofuse/io.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace pseudofuse {

namespace {

// per-detector personality, cycled when n_detectors > 4: two architectures
// per source domain, so systematic biases come in pairs. Detectors 0/1 are
// the well-matched source (tight, confident, unbiased), 2/3 carry the
// oversized-box bias an off-domain source shows on a new dataset.
constexpr double kNoiseMult[4] = {0.7, 0.9, 0.8, 1.0};
constexpr double kDimSigmaMult[4] = {0.7, 0.9, 1.6, 2.0};
constexpr double kScoreBase[4] = {0.82, 0.78, 0.70, 0.66};
constexpr double kKneeShift[4] = {5.0, 0.0, -5.0, 10.0};
constexpr double kLengthBias[4] = {0.0, 0.0, 1.5, 1.5};
constexpr double kWidthBias[4] = {0.0, 0.0, 0.25, 0.25};
constexpr double kAlongBias[4] = {0.0, 0.0, 0.3, 0.3};
constexpr double kHeadingBias[4] = {0.0, 0.02, -0.02, 0.04};

struct Rng {
  std::mt19937_64 gen;
  explicit Rng(std::uint64_t seed) : gen(seed) {}
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(gen);
  }
  double normal(double sigma) { return std::normal_distribution<double>(0.0, sigma)(gen); }
  bool bernoulli(double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return std::bernoulli_distribution(p)(gen);
  }
  int poisson(double rate) {
    if (rate <= 0.0) return 0;
    return std::poisson_distribution<int>(rate)(gen);
  }
};

double clamp_score(double s) { return std::clamp(s, 0.05, 0.99); }

}  // namespace

SynthScene generate_scene(const SynthConfig& cfg) {
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  SynthScene scene;
  scene.input.sequence_id = "synth-" + std::to_string(cfg.seed);
  for (int d = 0; d < cfg.n_detectors; ++d)
    scene.input.detector_names.push_back("det" + std::to_string(d));

  const double route = cfg.n_frames * cfg.ego_speed;

  // ---- ground-truth vehicles -------------------------------------------
  struct Motion {
    double speed = 0.0;  // m per frame along heading
  };
  std::vector<Motion> motions;
  scene.vehicles.resize(cfg.n_static + cfg.n_dynamic);

  for (int v = 0; v < cfg.n_static; ++v) {
    VehicleTruth& truth = scene.vehicles[v];
    truth.is_static = true;
    Box7 base;
    base.cx = rng.uniform(-10.0, route + 50.0);
    const double side = rng.bernoulli(0.5) ? 1.0 : -1.0;
    base.cy = side * rng.uniform(6.0, 16.0);
    base.l = std::max(3.2, 4.5 + rng.normal(0.3));
    base.w = std::max(1.5, 1.9 + rng.normal(0.1));
    base.h = std::max(1.3, 1.6 + rng.normal(0.1));
    base.cz = 0.5 * base.h;
    base.heading = wrap_angle(rng.uniform(-kPi, kPi));
    base.score = 1.0;
    truth.world_boxes.assign(cfg.n_frames, base);
    for (int k = 0; k < cfg.n_frames; ++k) truth.world_boxes[k].frame_idx = k;
    motions.push_back({0.0});
  }

  const double lanes[4] = {-5.25, -1.75, 1.75, 5.25};
  for (int v = 0; v < cfg.n_dynamic; ++v) {
    VehicleTruth& truth = scene.vehicles[cfg.n_static + v];
    truth.is_static = false;
    const double lane = lanes[v % 4];
    const double direction = lane > 0.0 ? 1.0 : -1.0;
    const double speed = rng.uniform(0.6, 1.4);
    Box7 base;
    base.cy = lane;
    base.l = std::max(3.2, 4.5 + rng.normal(0.3));
    base.w = std::max(1.5, 1.9 + rng.normal(0.1));
    base.h = std::max(1.3, 1.6 + rng.normal(0.1));
    base.cz = 0.5 * base.h;
    base.heading = direction > 0.0 ? 0.0 : kPi;
    base.score = 1.0;
    const double start = rng.uniform(-20.0, route + 20.0);
    truth.world_boxes.resize(cfg.n_frames, base);
    for (int k = 0; k < cfg.n_frames; ++k) {
      truth.world_boxes[k].cx = start + direction * speed * k;
      truth.world_boxes[k].frame_idx = k;
    }
    motions.push_back({speed});
  }

  // ---- ghost anchors on dynamic trajectories ---------------------------
  // anchors sit where the source vehicle passed close to the ego route, so
  // its 1-frame track exists there and the overlap correction can fire
  for (int v = 0; v < cfg.n_dynamic; ++v) {
    if (!rng.bernoulli(std::min(1.0, cfg.ghost_rate))) continue;
    const int vehicle = cfg.n_static + v;
    const int margin = 10;
    const int latest = cfg.n_frames - cfg.ghost_duration - margin;
    if (latest <= margin) continue;
    std::vector<int> candidates;
    for (int k = margin; k < latest; ++k) {
      const Box7& at = scene.vehicles[vehicle].world_boxes[k];
      const double ego_x = cfg.ego_speed * k;
      if (std::hypot(at.cx - ego_x, at.cy) < 30.0) candidates.push_back(k);
    }
    if (candidates.empty()) continue;
    const int f0 = candidates[static_cast<int>(rng.uniform(0, candidates.size()))];
    const Box7& at = scene.vehicles[vehicle].world_boxes[f0];
    GhostAnchor ghost;
    ghost.position = Eigen::Vector3d(at.cx, at.cy, at.cz);
    ghost.heading = at.heading;
    ghost.first_frame = f0;
    ghost.last_frame = std::min(cfg.n_frames - 1, f0 + cfg.ghost_duration - 1);
    ghost.source_vehicle = vehicle;
    scene.ghosts.push_back(ghost);
  }

  // ---- poses ------------------------------------------------------------
  std::vector<EgoPose> poses(cfg.n_frames);
  for (int k = 0; k < cfg.n_frames; ++k) {
    const double phase = 2.0 * kPi * k / std::max(1, cfg.n_frames);
    const double yaw = 0.04 * std::sin(phase);
    poses[k] = make_yaw_pose(yaw,
                             Eigen::Vector3d(cfg.ego_speed * k, 0.4 * std::sin(2.0 * phase), 0.0),
                             k);
  }

  // ---- frames -----------------------------------------------------------
  scene.input.frames.resize(cfg.n_frames);
  scene.gt.resize(cfg.n_frames);

  for (int k = 0; k < cfg.n_frames; ++k) {
    FrameInput& frame = scene.input.frames[k];
    frame.frame_idx = k;
    frame.pose = poses[k];
    frame.one_frame.resize(cfg.n_detectors);
    frame.multi_frame.resize(cfg.n_detectors);
    const EgoPose to_ego = inverse(poses[k]);

    // ground truth: everything within range, in ego coordinates
    std::vector<Box7> gt_ego;
    for (std::size_t v = 0; v < scene.vehicles.size(); ++v) {
      Box7 ego_box = transform_box(scene.vehicles[v].world_boxes[k], to_ego);
      if (std::hypot(ego_box.cx, ego_box.cy) <= cfg.gt_range) {
        ego_box.frame_idx = k;
        ego_box.detector_id = kFusedDetectorId;
        gt_ego.push_back(ego_box);
      }
    }
    scene.gt[k] = gt_ego;

    // per-frame registration error of the accumulated cloud: every 16f
    // detection of a vehicle in this frame shares the same offset
    std::vector<Eigen::Vector2d> reg_offset(scene.vehicles.size());
    std::vector<double> reg_heading(scene.vehicles.size());
    for (std::size_t v = 0; v < scene.vehicles.size(); ++v) {
      reg_offset[v] = Eigen::Vector2d(rng.normal(cfg.reg_sigma_16f), rng.normal(cfg.reg_sigma_16f));
      reg_heading[v] = rng.normal(0.25 * cfg.reg_sigma_16f);
    }

    for (int d = 0; d < cfg.n_detectors; ++d) {
      const double mult = kNoiseMult[d % 4];
      const double dims_mult = kDimSigmaMult[d % 4];
      const double score_base = kScoreBase[d % 4];
      const double knee_shift = kKneeShift[d % 4];
      const double bias = cfg.detector_bias_scale;
      const double length_bias = bias * kLengthBias[d % 4];
      const double width_bias = bias * kWidthBias[d % 4];
      const double along_bias = bias * kAlongBias[d % 4];
      const double heading_bias = bias * kHeadingBias[d % 4];

      for (int stream = 0; stream < 2; ++stream) {
        const bool multi = stream == 1;
        auto& bucket = multi ? frame.multi_frame[d] : frame.one_frame[d];

        for (int variant = 0; variant < 4; ++variant) {
          TtaTransform tta;
          if (variant == 1 || variant == 3) tta.flip_x = true;
          if (variant == 2 || variant == 3) tta.rot = rng.uniform(-kPi, kPi);

          // true positives
          for (std::size_t v = 0; v < scene.vehicles.size(); ++v) {
            const VehicleTruth& truth = scene.vehicles[v];
            Box7 ego_box = transform_box(truth.world_boxes[k], to_ego);
            const double range = std::hypot(ego_box.cx, ego_box.cy);
            if (range > cfg.gt_range) continue;
            const double knee =
                (multi ? cfg.range_knee_16f : cfg.range_knee_1f) + knee_shift;
            const double dropout = range < knee
                                       ? (multi ? cfg.near_dropout_16f : cfg.near_dropout_1f)
                                       : (multi ? cfg.far_dropout_16f : cfg.far_dropout_1f);
            if (rng.bernoulli(dropout)) continue;

            double stream_factor = 1.0;
            if (multi)
              stream_factor =
                  truth.is_static ? cfg.static_16f_noise_factor : cfg.dynamic_16f_noise_factor;
            // detector hiccups: occasional heavy-tailed errors that carry
            // near-normal confidence scores
            const double tail = rng.bernoulli(cfg.outlier_prob) ? cfg.outlier_factor : 1.0;
            const double sigma_c = cfg.centre_sigma * mult * stream_factor * tail *
                                   (1.0 + range / cfg.noise_range_scale);
            const double sigma_d = cfg.dim_sigma * dims_mult * stream_factor * tail;
            const double sigma_h = cfg.heading_sigma * mult * stream_factor * tail;

            Box7 noisy = ego_box;
            const double hc = std::cos(ego_box.heading);
            const double hs = std::sin(ego_box.heading);
            const double ex = rng.normal(sigma_c) + along_bias * hc;
            const double ey = rng.normal(sigma_c) + along_bias * hs;
            noisy.cx += ex;
            noisy.cy += ey;
            noisy.cz += rng.normal(0.5 * sigma_c);
            noisy.l = std::max(0.5, noisy.l + length_bias + rng.normal(sigma_d));
            noisy.w = std::max(0.3, noisy.w + width_bias + rng.normal(sigma_d));
            noisy.h = std::max(0.3, noisy.h + rng.normal(sigma_d));
            noisy.heading = wrap_angle(noisy.heading + heading_bias + rng.normal(sigma_h));
            if (rng.bernoulli(cfg.heading_flip_prob)) noisy.heading = wrap_angle(noisy.heading + kPi);
            if (multi) {
              noisy.cx += reg_offset[v].x();
              noisy.cy += reg_offset[v].y();
              noisy.heading = wrap_angle(noisy.heading + reg_heading[v]);
            }
            if (multi && !truth.is_static) {
              // accumulation smears moving objects along their track
              const double lag = rng.uniform(0.0, cfg.dynamic_16f_max_lag);
              const double motion = motions[v].speed * lag;
              noisy.cx -= motion * std::cos(ego_box.heading);
              noisy.cy -= motion * std::sin(ego_box.heading);
            }
            noisy.score = clamp_score(score_base - 0.0035 * range -
                                      0.05 * std::hypot(ex, ey) + rng.normal(0.04));
            noisy.class_id = 0;
            noisy.detector_id = d;
            noisy.frame_idx = k;
            bucket.push_back(TaggedBox{augment_box(noisy, tta), tta});
          }

          // false positives
          const int n_fp = rng.poisson(cfg.fp_rate);
          for (int fp = 0; fp < n_fp; ++fp) {
            Box7 junk;
            const double range = rng.uniform(3.0, 70.0);
            const double bearing = rng.uniform(-kPi, kPi);
            junk.cx = range * std::cos(bearing);
            junk.cy = range * std::sin(bearing);
            junk.l = rng.uniform(3.5, 5.5);
            junk.w = rng.uniform(1.6, 2.1);
            junk.h = rng.uniform(1.4, 1.8);
            junk.cz = 0.5 * junk.h;
            junk.heading = wrap_angle(rng.uniform(-kPi, kPi));
            junk.score = clamp_score(0.4 + rng.normal(0.15));
            junk.class_id = 0;
            junk.detector_id = d;
            junk.frame_idx = k;
            bucket.push_back(TaggedBox{augment_box(junk, tta), tta});
          }

          // false-static ghosts along motion trails (16f stream only)
          if (multi) {
            for (const auto& ghost : scene.ghosts) {
              if (k < ghost.first_frame || k > ghost.last_frame) continue;
              if (rng.bernoulli(cfg.ghost_dropout)) continue;
              const Box7& source = scene.vehicles[ghost.source_vehicle].world_boxes[k];
              Box7 world_box;
              world_box.cx = ghost.position.x();
              world_box.cy = ghost.position.y();
              world_box.cz = ghost.position.z();
              world_box.l = source.l;
              world_box.w = source.w;
              world_box.h = source.h;
              world_box.heading = ghost.heading;
              Box7 ego_box = transform_box(world_box, to_ego);
              ego_box.cx += rng.normal(0.15);
              ego_box.cy += rng.normal(0.15);
              ego_box.cz += rng.normal(0.05);
              ego_box.heading = wrap_angle(ego_box.heading + rng.normal(0.05));
              ego_box.score = clamp_score(0.55 + rng.normal(0.08));
              ego_box.class_id = 0;
              ego_box.detector_id = d;
              ego_box.frame_idx = k;
              bucket.push_back(TaggedBox{augment_box(ego_box, tta), tta});
            }
          }
        }
      }
    }

    // points: dense near, sparse far, plus background clutter
    if (cfg.emit_points) {
      frame.has_points = true;
      for (const auto& gt_box : gt_ego) {
        const double range = std::hypot(gt_box.cx, gt_box.cy);
        const int n_pts = std::clamp(static_cast<int>(20000.0 / (range * range + 10.0)), 1, 120);
        const double c = std::cos(gt_box.heading);
        const double s = std::sin(gt_box.heading);
        for (int p = 0; p < n_pts; ++p) {
          const double lx = rng.uniform(-0.5 * gt_box.l, 0.5 * gt_box.l);
          const double ly = rng.uniform(-0.5 * gt_box.w, 0.5 * gt_box.w);
          const double lz = rng.uniform(-0.5 * gt_box.h, 0.5 * gt_box.h);
          frame.points.emplace_back(gt_box.cx + c * lx - s * ly, gt_box.cy + s * lx + c * ly,
                                    gt_box.cz + lz);
        }
      }
      for (int p = 0; p < 150; ++p) {
        const double range = rng.uniform(2.0, 70.0);
        const double bearing = rng.uniform(-kPi, kPi);
        frame.points.emplace_back(range * std::cos(bearing), range * std::sin(bearing),
                                  rng.uniform(0.0, 2.0));
      }
    }
  }

  return scene;
}

void write_scene(const SynthScene& scene, const std::string& out_dir) {
  std::vector<DetectionRecord> detections;
  std::vector<EgoPose> poses;
  std::vector<std::pair<int, std::vector<Eigen::Vector3d>>> points;
  bool any_points = false;

  for (const auto& frame : scene.input.frames) {
    poses.push_back(frame.pose);
    for (int stream = 0; stream < 2; ++stream) {
      const auto& buckets = stream == 1 ? frame.multi_frame : frame.one_frame;
      for (std::size_t d = 0; d < buckets.size(); ++d) {
        for (const auto& tagged : buckets[d]) {
          DetectionRecord rec;
          rec.frame = frame.frame_idx;
          rec.detector = scene.input.detector_names[d];
          rec.tta = tagged.tta;
          rec.multi_frame = stream == 1;
          rec.box = tagged.box;
          detections.push_back(std::move(rec));
        }
      }
    }
    if (frame.has_points) {
      any_points = true;
      points.emplace_back(frame.frame_idx, frame.points);
    }
  }

  std::vector<int> frame_ids;
  frame_ids.reserve(scene.input.frames.size());
  for (const auto& frame : scene.input.frames) frame_ids.push_back(frame.frame_idx);

  const std::string dir = out_dir.empty() ? "." : out_dir;
  save_detections(detections, dir + "/detections.jsonl");
  save_poses(poses, dir + "/poses.jsonl");
  if (any_points) save_points(points, dir + "/points.bin");
  save_label_frames(frame_ids, scene.gt, "gt", dir + "/gt.jsonl");
}

}  // namespace pseudofuse

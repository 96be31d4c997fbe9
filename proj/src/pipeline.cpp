#include "pseudofuse/pipeline.hpp"

#include "pseudofuse/config.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace pseudofuse {

const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::Fused1f: return "fused-1f";
    case Provenance::Tracked1f: return "tracked-1f";
    case Provenance::StaticRefined: return "static-refined";
    case Provenance::StaticPropagated: return "static-propagated";
  }
  return "unknown";
}

std::optional<Provenance> provenance_from_name(const std::string& name) {
  if (name == "fused-1f") return Provenance::Fused1f;
  if (name == "tracked-1f") return Provenance::Tracked1f;
  if (name == "static-refined") return Provenance::StaticRefined;
  if (name == "static-propagated") return Provenance::StaticPropagated;
  return std::nullopt;
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const int nthreads = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  if (nthreads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n || failed.load()) return;
      try {
        fn(i);
      } catch (...) {
        std::scoped_lock lock(error_mutex);
        if (!error) error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

namespace {

ProposalSet pooled_deaugmented(const FrameInput& frame, bool multi_frame) {
  const auto& per_detector = multi_frame ? frame.multi_frame : frame.one_frame;
  ProposalSet props;
  int sources = 0;
  for (std::size_t det = 0; det < per_detector.size(); ++det) {
    if (!per_detector[det].empty()) ++sources;
    for (const auto& tagged : per_detector[det]) {
      Box7 b = deaugment_box(tagged.box, tagged.tta);
      b.frame_idx = frame.frame_idx;
      props.boxes.push_back(b);
    }
  }
  props.source_count = sources;
  return props;
}

void check_frame_order(const SequenceInput& input) {
  for (std::size_t i = 1; i < input.frames.size(); ++i) {
    if (input.frames[i].frame_idx <= input.frames[i - 1].frame_idx)
      throw std::invalid_argument("sequence frames out of order");
  }
  for (const auto& f : input.frames) {
    if (f.pose.frame_idx != f.frame_idx)
      throw std::invalid_argument("pose frame index does not match frame");
  }
}

std::vector<Box7> fuse_frame_method(const ProposalSet& props, const PipelineConfig& cfg,
                                    FusionMethod method, double nms_iou) {
  switch (method) {
    case FusionMethod::Kbf:
      return kbf(props, cfg.fusion);
    case FusionMethod::Nms:
      return nms(props.boxes, nms_iou);
    case FusionMethod::WbfCorners:
    case FusionMethod::WbfParams: {
      std::vector<Box7> out;
      for (const auto& cluster : cluster_proposals(props, cfg.fusion)) {
        std::vector<Box7> members;
        members.reserve(cluster.size());
        for (int i : cluster) members.push_back(props.boxes[i]);
        out.push_back(method == FusionMethod::WbfCorners ? wbf_corners(members)
                                                         : wbf_params(members));
      }
      std::sort(out.begin(), out.end(), box_less_canonical);
      return out;
    }
  }
  return {};
}

}  // namespace

std::vector<std::vector<Box7>> fuse_stream_method(const SequenceInput& input,
                                                  const PipelineConfig& cfg, bool multi_frame,
                                                  FusionMethod method, double nms_iou,
                                                  int workers) {
  check_frame_order(input);
  std::vector<std::vector<Box7>> fused(input.frames.size());
  parallel_for(input.frames.size(), workers, [&](std::size_t i) {
    fused[i] = fuse_frame_method(pooled_deaugmented(input.frames[i], multi_frame), cfg, method,
                                 nms_iou);
  });
  return fused;
}

std::vector<std::vector<Box7>> fuse_stream(const SequenceInput& input, const PipelineConfig& cfg,
                                           bool multi_frame, int workers) {
  return fuse_stream_method(input, cfg, multi_frame, FusionMethod::Kbf, 0.5, workers);
}

std::vector<PseudoLabel> assemble_frame(std::span<const Box7> fused_1f,
                                        std::span<const Box7> tracked_1f,
                                        std::span<const PseudoLabel> static_boxes,
                                        const std::vector<Eigen::Vector3d>* points,
                                        const PipelineConfig& cfg) {
  std::vector<PseudoLabel> candidates;
  candidates.reserve(fused_1f.size() + tracked_1f.size() + static_boxes.size());
  for (const auto& b : fused_1f) candidates.push_back({b, Provenance::Fused1f});
  for (const auto& b : tracked_1f) candidates.push_back({b, Provenance::Tracked1f});
  for (const auto& s : static_boxes) candidates.push_back(s);

  // score first; equal scores resolve by source priority (fused-1f, then
  // tracked-1f, then static) so provenance does not hinge on float noise
  std::sort(candidates.begin(), candidates.end(), [](const PseudoLabel& a, const PseudoLabel& b) {
    if (a.box.score != b.box.score) return a.box.score > b.box.score;
    if (a.provenance != b.provenance)
      return static_cast<int>(a.provenance) < static_cast<int>(b.provenance);
    return box_less_canonical(a.box, b.box);
  });

  std::vector<PseudoLabel> kept;
  for (const auto& cand : candidates) {
    bool suppressed = false;
    for (const auto& k : kept) {
      if (bev_iou(cand.box, k.box) > cfg.final_nms_iou) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(cand);
  }

  std::vector<PseudoLabel> out;
  for (const auto& k : kept) {
    if (k.box.score < cfg.final_score_threshold) continue;
    if (points != nullptr &&
        points_in_box(k.box, *points) < cfg.min_points_in_box)
      continue;
    out.push_back(k);
  }
  return out;
}

PseudoLabelSet run_pipeline(const SequenceInput& input, const PipelineConfig& cfg, int workers) {
  check_frame_order(input);
  const std::size_t n = input.frames.size();

  PseudoLabelSet result;
  result.config_hash = config_hash(cfg);
  result.frames.reserve(n);
  for (const auto& f : input.frames) result.frames.push_back(f.frame_idx);
  result.labels.resize(n);
  if (n == 0) return result;

  // stage 1: de-augment, pool and fuse both streams per frame (ego coords)
  std::vector<std::vector<Box7>> fused_1f(n), fused_16f(n);
  parallel_for(n, workers, [&](std::size_t i) {
    fused_1f[i] = kbf(pooled_deaugmented(input.frames[i], false), cfg.fusion);
    fused_16f[i] = kbf(pooled_deaugmented(input.frames[i], true), cfg.fusion);
  });

  // stage 2: to world coordinates
  std::vector<FrameBoxes> world_1f(n), world_16f(n);
  parallel_for(n, workers, [&](std::size_t i) {
    const EgoPose& pose = input.frames[i].pose;
    world_1f[i].frame_idx = input.frames[i].frame_idx;
    world_16f[i].frame_idx = input.frames[i].frame_idx;
    for (const auto& b : fused_1f[i]) world_1f[i].boxes.push_back(transform_box(b, pose));
    for (const auto& b : fused_16f[i]) world_16f[i].boxes.push_back(transform_box(b, pose));
  });

  // stage 3: track both streams
  std::vector<Track> tracks_1f = track_sequence(world_1f, cfg.tracker_1f);
  std::vector<Track> tracks_16f = track_sequence(world_16f, cfg.tracker_16f);

  // stage 4: motion states; dynamic 1f trajectories veto static 16f tracks
  for (auto& t : tracks_1f) t.motion_state = classify_motion(t, cfg.motion);
  for (auto& t : tracks_16f) t.motion_state = classify_motion(t, cfg.motion);
  tracks_16f = correct_16f_motion(tracks_1f, std::move(tracks_16f), cfg.motion);

  // stage 5: refine + propagate static 16f tracks
  const int seq_first = input.frames.front().frame_idx;
  const int seq_last = input.frames.back().frame_idx;
  std::vector<const Track*> static_tracks;
  for (const auto& t : tracks_16f)
    if (t.motion_state == MotionState::Static) static_tracks.push_back(&t);
  std::vector<std::vector<StaticBox>> static_per_track(static_tracks.size());
  parallel_for(static_tracks.size(), workers, [&](std::size_t i) {
    auto refined = refine_static_boxes(*static_tracks[i], cfg.static_refine);
    static_per_track[i] =
        propagate_static(*static_tracks[i], refined, seq_first, seq_last, cfg.static_refine);
  });

  // per-frame gathers (world coords)
  std::map<int, std::vector<Box7>> tracked_by_frame;
  for (const auto& t : tracks_1f)
    for (const auto& e : t.entries) tracked_by_frame[e.frame_idx].push_back(e.box);
  std::map<int, std::vector<PseudoLabel>> static_by_frame;
  for (const auto& boxes : static_per_track)
    for (const auto& s : boxes)
      static_by_frame[s.frame_idx].push_back(
          {s.box, s.propagated ? Provenance::StaticPropagated : Provenance::StaticRefined});

  // stage 6: assemble per frame in ego coordinates
  parallel_for(n, workers, [&](std::size_t i) {
    const FrameInput& frame = input.frames[i];
    const EgoPose to_ego = inverse(frame.pose);

    std::vector<Box7> tracked_ego;
    if (auto it = tracked_by_frame.find(frame.frame_idx); it != tracked_by_frame.end())
      for (const auto& b : it->second) tracked_ego.push_back(transform_box(b, to_ego));

    std::vector<PseudoLabel> static_ego;
    if (auto it = static_by_frame.find(frame.frame_idx); it != static_by_frame.end())
      for (const auto& s : it->second)
        static_ego.push_back({transform_box(s.box, to_ego), s.provenance});

    const std::vector<Eigen::Vector3d>* points = frame.has_points ? &frame.points : nullptr;
    result.labels[i] = assemble_frame(fused_1f[i], tracked_ego, static_ego, points, cfg);
  });

  return result;
}

}  // namespace pseudofuse

#include "pseudofuse/config.hpp"
#include "pseudofuse/eval.hpp"
#include "pseudofuse/io.hpp"
#include "pseudofuse/pipeline.hpp"
#include "pseudofuse/synth.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace pf = pseudofuse;

namespace {

std::vector<std::string> resolve_detection_paths(const std::string& pattern) {
  auto paths = pf::expand_glob(pattern);
  if (paths.empty()) throw std::runtime_error("no detection files match " + pattern);
  return paths;
}

pf::ConfigFile load_config_or_default(const std::string& path) {
  if (path.empty()) return pf::ConfigFile{};
  return pf::load_config_file(path);
}

int cmd_run(const std::string& detections, const std::string& poses, const std::string& points,
            const std::string& config_path, const std::string& out, int workers) {
  const auto cfg = load_config_or_default(config_path);
  const auto input = pf::load_sequence(resolve_detection_paths(detections), poses,
                                       points.empty() ? std::nullopt
                                                      : std::optional<std::string>(points));
  bool any_points = false;
  for (const auto& f : input.frames) any_points = any_points || f.has_points;
  if (!any_points && cfg.pipeline.min_points_in_box > 0)
    std::cerr << "note: no point clouds provided, skipping the point-count filter\n";

  const auto labels = pf::run_pipeline(input, cfg.pipeline, workers);
  pf::save_pseudo_labels(labels, out);
  std::size_t total = 0;
  for (const auto& frame : labels.labels) total += frame.size();
  std::cerr << "wrote " << total << " pseudo-labels over " << labels.frames.size() << " frames to "
            << out << "\n";
  return 0;
}

int cmd_fuse(const std::string& detections, const std::string& poses,
             const std::string& config_path, const std::string& out, const std::string& stream,
             int workers) {
  const auto cfg = load_config_or_default(config_path);
  const auto input = pf::load_sequence(resolve_detection_paths(detections), poses, std::nullopt);

  std::vector<pf::DetectionRecord> records;
  auto emit = [&](bool multi) {
    const auto fused = pf::fuse_stream(input, cfg.pipeline, multi, workers);
    for (std::size_t i = 0; i < fused.size(); ++i) {
      for (const auto& box : fused[i]) {
        pf::DetectionRecord rec;
        rec.frame = input.frames[i].frame_idx;
        rec.detector = "fused";
        rec.multi_frame = multi;
        rec.box = box;
        records.push_back(std::move(rec));
      }
    }
  };
  if (stream == "1f" || stream == "both") emit(false);
  if (stream == "16f" || stream == "both") emit(true);
  pf::save_detections(records, out);
  std::cerr << "wrote " << records.size() << " fused boxes to " << out << "\n";
  return 0;
}

int cmd_track(const std::string& detections, const std::string& poses,
              const std::string& config_path, const std::string& out, const std::string& stream) {
  const auto cfg = load_config_or_default(config_path);
  const auto input = pf::load_sequence(resolve_detection_paths(detections), poses, std::nullopt);
  const bool multi = stream == "16f";

  std::vector<pf::FrameBoxes> frames(input.frames.size());
  for (std::size_t i = 0; i < input.frames.size(); ++i) {
    const auto& frame = input.frames[i];
    frames[i].frame_idx = frame.frame_idx;
    const auto& buckets = multi ? frame.multi_frame : frame.one_frame;
    for (const auto& bucket : buckets)
      for (const auto& tagged : bucket) {
        pf::Box7 b = pf::deaugment_box(tagged.box, tagged.tta);
        frames[i].boxes.push_back(pf::transform_box(b, frame.pose));
      }
  }
  const auto tracks =
      pf::track_sequence(frames, multi ? cfg.pipeline.tracker_16f : cfg.pipeline.tracker_1f);
  pf::save_tracks(tracks, out);
  std::cerr << "wrote " << tracks.size() << " tracks to " << out << "\n";
  return 0;
}

int cmd_refine(const std::string& tracks_1f_path, const std::string& tracks_16f_path,
               const std::string& poses, const std::string& config_path, const std::string& out) {
  const auto cfg = load_config_or_default(config_path);
  auto tracks_1f = pf::load_tracks(tracks_1f_path);
  auto tracks_16f = pf::load_tracks(tracks_16f_path);
  const auto pose_list = pf::load_poses(poses);
  if (pose_list.empty()) throw std::runtime_error("no poses in " + poses);

  for (auto& t : tracks_1f) t.motion_state = pf::classify_motion(t, cfg.pipeline.motion);
  for (auto& t : tracks_16f) t.motion_state = pf::classify_motion(t, cfg.pipeline.motion);
  tracks_16f = pf::correct_16f_motion(tracks_1f, std::move(tracks_16f), cfg.pipeline.motion);

  std::map<int, const pf::EgoPose*> pose_by_frame;
  for (const auto& p : pose_list) pose_by_frame[p.frame_idx] = &p;
  const int seq_first = pose_list.front().frame_idx;
  const int seq_last = pose_list.back().frame_idx;

  std::map<int, std::vector<std::pair<pf::Box7, bool>>> by_frame;
  for (const auto& t : tracks_16f) {
    if (t.motion_state != pf::MotionState::Static) continue;
    const auto refined = pf::refine_static_boxes(t, cfg.pipeline.static_refine);
    for (const auto& s :
         pf::propagate_static(t, refined, seq_first, seq_last, cfg.pipeline.static_refine))
      by_frame[s.frame_idx].emplace_back(s.box, s.propagated);
  }

  pf::PseudoLabelSet labels;
  labels.config_hash = pf::config_hash(cfg.pipeline);
  for (const auto& [frame, boxes] : by_frame) {
    const auto pose_it = pose_by_frame.find(frame);
    if (pose_it == pose_by_frame.end()) continue;  // outside the pose range
    const pf::EgoPose to_ego = pf::inverse(*pose_it->second);
    labels.frames.push_back(frame);
    labels.labels.emplace_back();
    for (const auto& [box, propagated] : boxes)
      labels.labels.back().push_back(
          {pf::transform_box(box, to_ego), propagated ? pf::Provenance::StaticPropagated
                                                      : pf::Provenance::StaticRefined});
  }
  pf::save_pseudo_labels(labels, out);
  std::cerr << "wrote static boxes for " << labels.frames.size() << " frames to " << out << "\n";
  return 0;
}

int cmd_eval(const std::string& pred, const std::string& gt, const std::string& config_path,
             const std::string& out) {
  const auto cfg = load_config_or_default(config_path);
  const auto [pred_frames, pred_boxes] = pf::load_label_boxes(pred);
  const auto [gt_frames, gt_boxes] = pf::load_label_boxes(gt);

  // align on the union of frames; absent frames contribute empty lists
  std::map<int, std::pair<std::vector<pf::Box7>, std::vector<pf::Box7>>> aligned;
  for (std::size_t i = 0; i < pred_frames.size(); ++i) aligned[pred_frames[i]].first = pred_boxes[i];
  for (std::size_t i = 0; i < gt_frames.size(); ++i) aligned[gt_frames[i]].second = gt_boxes[i];
  std::vector<std::vector<pf::Box7>> preds, gts;
  for (auto& [frame, pair] : aligned) {
    preds.push_back(std::move(pair.first));
    gts.push_back(std::move(pair.second));
  }

  const auto result = pf::evaluate_ap(preds, gts, cfg.eval);
  std::map<std::string, pf::ApResult> table{{"pred", result}};
  std::cout << pf::benchmark_report_text(table);
  const std::string jsonl = pf::benchmark_report_jsonl(table);
  if (!out.empty()) {
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot write " + out);
    f << jsonl;
  } else {
    std::cout << jsonl;
  }
  return 0;
}

int cmd_synth(const std::string& config_path, const std::string& out_dir) {
  const auto cfg = load_config_or_default(config_path);
  std::filesystem::create_directories(out_dir);
  const auto scene = pf::generate_scene(cfg.synth);
  pf::write_scene(scene, out_dir);
  std::cerr << "wrote synthetic sequence (" << scene.input.frames.size() << " frames, "
            << scene.vehicles.size() << " vehicles) to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-detector 3D box fusion and pseudo-label pipeline"};
  app.require_subcommand(1);

  std::string detections, poses, points, config_path, out, stream = "1f";
  std::string tracks_1f, tracks_16f, pred, gt, out_dir;
  int workers = 1;

  auto* run = app.add_subcommand("run", "full pipeline: fuse, track, refine, assemble");
  run->add_option("--detections", detections, "detection file or glob")->required();
  run->add_option("--poses", poses, "pose file")->required();
  run->add_option("--points", points, "binary points file");
  run->add_option("--config", config_path, "config file");
  run->add_option("--out", out, "output pseudo-label file")->required();
  run->add_option("--workers", workers, "worker threads");

  auto* fuse = app.add_subcommand("fuse", "per-frame KBF fusion of raw detections");
  fuse->add_option("--detections", detections)->required();
  fuse->add_option("--poses", poses)->required();
  fuse->add_option("--config", config_path);
  fuse->add_option("--out", out)->required();
  fuse->add_option("--stream", stream)->check(CLI::IsMember({"1f", "16f", "both"}));
  fuse->add_option("--workers", workers);

  auto* track = app.add_subcommand("track", "track fused detections in world coordinates");
  track->add_option("--detections", detections, "fused detection file")->required();
  track->add_option("--poses", poses)->required();
  track->add_option("--config", config_path);
  track->add_option("--out", out)->required();
  track->add_option("--stream", stream)->check(CLI::IsMember({"1f", "16f"}));

  auto* refine = app.add_subcommand("refine", "motion-correct and refine static tracks");
  refine->add_option("--tracks-1f", tracks_1f)->required();
  refine->add_option("--tracks-16f", tracks_16f)->required();
  refine->add_option("--poses", poses)->required();
  refine->add_option("--config", config_path);
  refine->add_option("--out", out)->required();

  auto* eval = app.add_subcommand("eval", "evaluate pseudo-labels against ground truth");
  eval->add_option("--pred", pred)->required();
  eval->add_option("--gt", gt)->required();
  eval->add_option("--config", config_path);
  eval->add_option("--out", out, "JSON-lines report path (default: stdout)");

  auto* synth = app.add_subcommand("synth", "generate a synthetic benchmark sequence");
  synth->add_option("--config", config_path);
  synth->add_option("--out-dir", out_dir)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(detections, poses, points, config_path, out, workers);
    if (fuse->parsed()) return cmd_fuse(detections, poses, config_path, out, stream, workers);
    if (track->parsed()) return cmd_track(detections, poses, config_path, out, stream);
    if (refine->parsed()) return cmd_refine(tracks_1f, tracks_16f, poses, config_path, out);
    if (eval->parsed()) return cmd_eval(pred, gt, config_path, out);
    if (synth->parsed()) return cmd_synth(config_path, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

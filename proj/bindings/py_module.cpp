#include "pseudofuse/config.hpp"
#include "pseudofuse/eval.hpp"
#include "pseudofuse/io.hpp"
#include "pseudofuse/kde.hpp"
#include "pseudofuse/pipeline.hpp"
#include "pseudofuse/synth.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <sstream>

namespace py = pybind11;
using namespace pseudofuse;

namespace {

std::vector<Eigen::Vector3d> to_points(const py::array_t<double>& arr) {
  const auto buf = arr.unchecked<2>();
  if (buf.shape(1) != 3) throw std::invalid_argument("points must be an Nx3 array");
  std::vector<Eigen::Vector3d> pts(buf.shape(0));
  for (py::ssize_t i = 0; i < buf.shape(0); ++i)
    pts[i] = Eigen::Vector3d(buf(i, 0), buf(i, 1), buf(i, 2));
  return pts;
}

std::string box_repr(const Box7& b) {
  std::ostringstream os;
  os << "Box7(cx=" << b.cx << ", cy=" << b.cy << ", cz=" << b.cz << ", l=" << b.l << ", w=" << b.w
     << ", h=" << b.h << ", heading=" << b.heading << ", score=" << b.score << ")";
  return os.str();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "multi-detector 3D box fusion and pseudo-label pipeline";

  py::class_<Box7>(m, "Box7")
      .def(py::init([](double cx, double cy, double cz, double l, double w, double h,
                       double heading, double score, int class_id, int detector_id,
                       int frame_idx) {
             Box7 b{cx, cy, cz, l, w, h, heading, score, class_id, detector_id, frame_idx};
             return b;
           }),
           py::arg("cx") = 0.0, py::arg("cy") = 0.0, py::arg("cz") = 0.0, py::arg("l") = 1.0,
           py::arg("w") = 1.0, py::arg("h") = 1.0, py::arg("heading") = 0.0,
           py::arg("score") = 1.0, py::arg("class_id") = 0, py::arg("detector_id") = 0,
           py::arg("frame_idx") = 0)
      .def_readwrite("cx", &Box7::cx)
      .def_readwrite("cy", &Box7::cy)
      .def_readwrite("cz", &Box7::cz)
      .def_readwrite("l", &Box7::l)
      .def_readwrite("w", &Box7::w)
      .def_readwrite("h", &Box7::h)
      .def_readwrite("heading", &Box7::heading)
      .def_readwrite("score", &Box7::score)
      .def_readwrite("class_id", &Box7::class_id)
      .def_readwrite("detector_id", &Box7::detector_id)
      .def_readwrite("frame_idx", &Box7::frame_idx)
      .def("__repr__", &box_repr);

  py::class_<EgoPose>(m, "EgoPose")
      .def(py::init([](const Eigen::Vector3d& t, const Eigen::Vector4d& q_wxyz, int frame_idx) {
             EgoPose p;
             p.translation = t;
             p.rotation = Eigen::Quaterniond(q_wxyz(0), q_wxyz(1), q_wxyz(2), q_wxyz(3));
             p.rotation.normalize();
             p.frame_idx = frame_idx;
             return p;
           }),
           py::arg("translation") = Eigen::Vector3d::Zero(),
           py::arg("q_wxyz") = Eigen::Vector4d(1, 0, 0, 0), py::arg("frame_idx") = 0)
      .def_readwrite("frame_idx", &EgoPose::frame_idx)
      .def_property_readonly("translation", [](const EgoPose& p) { return p.translation; })
      .def_property_readonly("yaw", &pose_yaw);
  m.def("make_yaw_pose", &make_yaw_pose, py::arg("yaw"), py::arg("translation"),
        py::arg("frame_idx") = 0);
  m.def("inverse", &inverse);

  m.def("wrap_angle", &wrap_angle);
  m.def("transform_box", &transform_box);
  m.def("bev_iou", &bev_iou);
  m.def("iou_3d", &iou_3d);
  m.def("points_in_box", [](const Box7& b, const py::array_t<double>& pts) {
    const auto v = to_points(pts);
    return points_in_box(b, v);
  });

  py::class_<WeightedSamples>(m, "WeightedSamples")
      .def(py::init([](std::vector<double> values, std::vector<double> weights, double bandwidth) {
             return WeightedSamples{std::move(values), std::move(weights), bandwidth};
           }),
           py::arg("values"), py::arg("weights"), py::arg("bandwidth"))
      .def_readwrite("values", &WeightedSamples::values)
      .def_readwrite("weights", &WeightedSamples::weights)
      .def_readwrite("bandwidth", &WeightedSamples::bandwidth);
  m.def("density_at", &density_at);
  m.def("peak_sample", [](const WeightedSamples& s) {
    const auto p = peak_sample(s);
    return py::make_tuple(p.value, p.index);
  });
  m.def("weighted_peak_stat", &weighted_peak_stat);

  py::class_<Bandwidths>(m, "Bandwidths")
      .def(py::init<>())
      .def_readwrite("centre", &Bandwidths::centre)
      .def_readwrite("dims", &Bandwidths::dims)
      .def_readwrite("heading_sin", &Bandwidths::heading_sin)
      .def_readwrite("score", &Bandwidths::score);

  py::class_<TtaTransform>(m, "TtaTransform")
      .def(py::init([](bool flip_x, bool flip_y, double rot) {
             return TtaTransform{flip_x, flip_y, rot};
           }),
           py::arg("flip_x") = false, py::arg("flip_y") = false, py::arg("rot") = 0.0)
      .def_readwrite("flip_x", &TtaTransform::flip_x)
      .def_readwrite("flip_y", &TtaTransform::flip_y)
      .def_readwrite("rot", &TtaTransform::rot);

  py::class_<FusionConfig>(m, "FusionConfig")
      .def(py::init<>())
      .def_readwrite("match_radius", &FusionConfig::match_radius)
      .def_readwrite("min_cluster_size", &FusionConfig::min_cluster_size)
      .def_readwrite("bandwidths", &FusionConfig::bandwidths)
      .def_readwrite("two_stage_tta", &FusionConfig::two_stage_tta);

  m.def("augment_box", &augment_box);
  m.def("deaugment_box", &deaugment_box);
  m.def("cluster_proposals", [](const std::vector<Box7>& boxes, const FusionConfig& cfg) {
    ProposalSet props{boxes, 0};
    return cluster_proposals(props, cfg);
  });
  m.def("kbf_fuse_cluster", [](const std::vector<Box7>& cluster, const FusionConfig& cfg) {
    return kbf_fuse_cluster(cluster, cfg);
  });
  m.def("kbf", [](const std::vector<Box7>& boxes, const FusionConfig& cfg) {
    ProposalSet props{boxes, 0};
    return kbf(props, cfg);
  });
  m.def("nms",
        [](const std::vector<Box7>& boxes, double iou) { return nms(boxes, iou); });
  m.def("wbf_corners", [](const std::vector<Box7>& cluster) { return wbf_corners(cluster); });
  m.def("wbf_params", [](const std::vector<Box7>& cluster) { return wbf_params(cluster); });

  py::enum_<MotionState>(m, "MotionState")
      .value("Unknown", MotionState::Unknown)
      .value("Static", MotionState::Static)
      .value("Dynamic", MotionState::Dynamic);

  py::class_<TrackerConfig>(m, "TrackerConfig")
      .def(py::init<>())
      .def_readwrite("iou_gate", &TrackerConfig::iou_gate)
      .def_readwrite("distance_gate", &TrackerConfig::distance_gate)
      .def_readwrite("distance_fallback", &TrackerConfig::distance_fallback)
      .def_readwrite("max_age", &TrackerConfig::max_age)
      .def_readwrite("min_hits", &TrackerConfig::min_hits);

  py::class_<TrackEntry>(m, "TrackEntry")
      .def_readonly("frame_idx", &TrackEntry::frame_idx)
      .def_readonly("box", &TrackEntry::box)
      .def_readonly("interpolated", &TrackEntry::interpolated);

  py::class_<Track>(m, "Track")
      .def(py::init<>())
      .def_readwrite("track_id", &Track::track_id)
      .def_readwrite("entries", &Track::entries)
      .def_readwrite("motion_state", &Track::motion_state);

  m.def("track_sequence",
        [](const std::vector<std::pair<int, std::vector<Box7>>>& frames, const TrackerConfig& cfg) {
          std::vector<FrameBoxes> fb;
          fb.reserve(frames.size());
          for (const auto& [idx, boxes] : frames) fb.push_back(FrameBoxes{idx, boxes});
          return track_sequence(fb, cfg);
        });

  py::class_<MotionConfig>(m, "MotionConfig")
      .def(py::init<>())
      .def_readwrite("begin_to_end_threshold", &MotionConfig::begin_to_end_threshold)
      .def_readwrite("centre_variance_threshold", &MotionConfig::centre_variance_threshold)
      .def_readwrite("overlap_iou_threshold", &MotionConfig::overlap_iou_threshold);

  py::class_<StaticRefineConfig>(m, "StaticRefineConfig")
      .def(py::init<>())
      .def_readwrite("window", &StaticRefineConfig::window)
      .def_readwrite("score_floor", &StaticRefineConfig::score_floor)
      .def_readwrite("decay", &StaticRefineConfig::decay)
      .def_readwrite("min_track_detections", &StaticRefineConfig::min_track_detections);

  py::class_<StaticBox>(m, "StaticBox")
      .def_readonly("frame_idx", &StaticBox::frame_idx)
      .def_readonly("box", &StaticBox::box)
      .def_readonly("propagated", &StaticBox::propagated);

  m.def("classify_motion", &classify_motion);
  m.def("correct_16f_motion",
        [](const std::vector<Track>& t1, std::vector<Track> t16, const MotionConfig& cfg) {
          return correct_16f_motion(t1, std::move(t16), cfg);
        });
  m.def("refine_static_boxes", &refine_static_boxes);
  m.def("propagate_static",
        [](const Track& track, const std::vector<StaticBox>& refined, int first, int last,
           const StaticRefineConfig& cfg) {
          return propagate_static(track, refined, first, last, cfg);
        });

  py::enum_<Provenance>(m, "Provenance")
      .value("Fused1f", Provenance::Fused1f)
      .value("Tracked1f", Provenance::Tracked1f)
      .value("StaticRefined", Provenance::StaticRefined)
      .value("StaticPropagated", Provenance::StaticPropagated);

  py::class_<PseudoLabel>(m, "PseudoLabel")
      .def_readonly("box", &PseudoLabel::box)
      .def_readonly("provenance", &PseudoLabel::provenance);

  py::class_<PseudoLabelSet>(m, "PseudoLabelSet")
      .def_readonly("frames", &PseudoLabelSet::frames)
      .def_readonly("labels", &PseudoLabelSet::labels)
      .def_readonly("config_hash", &PseudoLabelSet::config_hash);

  py::class_<PipelineConfig>(m, "PipelineConfig")
      .def(py::init<>())
      .def_readwrite("fusion", &PipelineConfig::fusion)
      .def_readwrite("tracker_1f", &PipelineConfig::tracker_1f)
      .def_readwrite("tracker_16f", &PipelineConfig::tracker_16f)
      .def_readwrite("motion", &PipelineConfig::motion)
      .def_readwrite("static_refine", &PipelineConfig::static_refine)
      .def_readwrite("final_score_threshold", &PipelineConfig::final_score_threshold)
      .def_readwrite("final_nms_iou", &PipelineConfig::final_nms_iou)
      .def_readwrite("min_points_in_box", &PipelineConfig::min_points_in_box);

  py::class_<SequenceInput>(m, "SequenceInput")
      .def_readonly("sequence_id", &SequenceInput::sequence_id)
      .def_readonly("detector_names", &SequenceInput::detector_names)
      .def_property_readonly("n_frames",
                             [](const SequenceInput& s) { return s.frames.size(); });

  m.def("load_sequence",
        [](const std::vector<std::string>& detections, const std::string& poses,
           const std::optional<std::string>& points) {
          return load_sequence(detections, poses, points);
        },
        py::arg("detections"), py::arg("poses"), py::arg("points") = std::nullopt);
  m.def("run_pipeline", &run_pipeline, py::arg("input"), py::arg("config"),
        py::arg("workers") = 1, py::call_guard<py::gil_scoped_release>());
  m.def("save_pseudo_labels", &save_pseudo_labels);
  m.def("load_pseudo_labels", &load_pseudo_labels);
  m.def("config_hash", &config_hash);
  m.def("load_config_file", [](const std::string& path) { return load_config_file(path).pipeline; });

  py::enum_<IouMode>(m, "IouMode").value("Bev", IouMode::Bev).value("ThreeD", IouMode::ThreeD);

  py::class_<EvalConfig>(m, "EvalConfig")
      .def(py::init<>())
      .def_readwrite("iou_thresholds", &EvalConfig::iou_thresholds)
      .def_readwrite("modes", &EvalConfig::modes)
      .def_readwrite("recall_positions", &EvalConfig::recall_positions)
      .def_readwrite("range_bins", &EvalConfig::range_bins);

  py::class_<ApEntry>(m, "ApEntry")
      .def_readonly("mode", &ApEntry::mode)
      .def_readonly("iou_threshold", &ApEntry::iou_threshold)
      .def_readonly("overall", &ApEntry::overall)
      .def_readonly("per_bin", &ApEntry::per_bin);

  py::class_<ApResult>(m, "ApResult")
      .def_readonly("entries", &ApResult::entries)
      .def("at", &ApResult::at, py::return_value_policy::reference_internal);

  m.def("evaluate_ap", &evaluate_ap, py::call_guard<py::gil_scoped_release>());

  py::class_<SynthConfig>(m, "SynthConfig")
      .def(py::init<>())
      .def_readwrite("n_frames", &SynthConfig::n_frames)
      .def_readwrite("n_static", &SynthConfig::n_static)
      .def_readwrite("n_dynamic", &SynthConfig::n_dynamic)
      .def_readwrite("n_detectors", &SynthConfig::n_detectors)
      .def_readwrite("centre_sigma", &SynthConfig::centre_sigma)
      .def_readwrite("heading_flip_prob", &SynthConfig::heading_flip_prob)
      .def_readwrite("fp_rate", &SynthConfig::fp_rate)
      .def_readwrite("emit_points", &SynthConfig::emit_points)
      .def_readwrite("seed", &SynthConfig::seed);

  py::class_<SynthScene>(m, "SynthScene")
      .def_readonly("input", &SynthScene::input)
      .def_readonly("gt", &SynthScene::gt)
      .def_property_readonly("n_ghosts",
                             [](const SynthScene& s) { return s.ghosts.size(); });

  m.def("generate_scene", &generate_scene, py::call_guard<py::gil_scoped_release>());
  m.def("write_scene", &write_scene);

  m.attr("__version__") = "0.1.0";
}

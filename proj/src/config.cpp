#include "pseudofuse/config.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace pseudofuse {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_double(const std::string& v) {
  if (v == "inf") return std::numeric_limits<double>::infinity();
  std::size_t pos = 0;
  const double out = std::stod(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("not a number: \"" + v + "\"");
  return out;
}

int parse_int(const std::string& v) {
  std::size_t pos = 0;
  const int out = std::stoi(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("not an integer: \"" + v + "\"");
  return out;
}

std::uint64_t parse_u64(const std::string& v) {
  std::size_t pos = 0;
  const unsigned long long out = std::stoull(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("not an integer: \"" + v + "\"");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("not a boolean: \"" + v + "\"");
}

std::vector<std::string> split_csv(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

using Setter = std::function<void(ConfigFile&, const std::string&)>;

void add_tracker_keys(std::map<std::string, Setter>& keys, const std::string& prefix,
                      TrackerConfig PipelineConfig::*member) {
  auto set = [member](auto field) {
    return [member, field](ConfigFile& c, const std::string& v) { (c.pipeline.*member).*field = parse_double(v); };
  };
  keys[prefix + ".metric"] = [member](ConfigFile& c, const std::string& v) {
    if (v == "iou")
      (c.pipeline.*member).metric = AssocMetric::BevIou;
    else if (v == "distance")
      (c.pipeline.*member).metric = AssocMetric::CentroidDistance;
    else
      throw std::invalid_argument("metric must be \"iou\" or \"distance\"");
  };
  keys[prefix + ".iou_gate"] = set(&TrackerConfig::iou_gate);
  keys[prefix + ".distance_gate"] = set(&TrackerConfig::distance_gate);
  keys[prefix + ".distance_fallback"] = [member](ConfigFile& c, const std::string& v) {
    (c.pipeline.*member).distance_fallback = parse_bool(v);
  };
  keys[prefix + ".max_age"] = [member](ConfigFile& c, const std::string& v) {
    (c.pipeline.*member).max_age = parse_int(v);
  };
  keys[prefix + ".min_hits"] = [member](ConfigFile& c, const std::string& v) {
    (c.pipeline.*member).min_hits = parse_int(v);
  };
  keys[prefix + ".meas_sigma_pos"] = set(&TrackerConfig::meas_sigma_pos);
  keys[prefix + ".meas_sigma_heading"] = set(&TrackerConfig::meas_sigma_heading);
  keys[prefix + ".meas_sigma_dims"] = set(&TrackerConfig::meas_sigma_dims);
  keys[prefix + ".process_sigma_pos"] = set(&TrackerConfig::process_sigma_pos);
  keys[prefix + ".process_sigma_vel"] = set(&TrackerConfig::process_sigma_vel);
  keys[prefix + ".process_sigma_heading"] = set(&TrackerConfig::process_sigma_heading);
  keys[prefix + ".process_sigma_dims"] = set(&TrackerConfig::process_sigma_dims);
  keys[prefix + ".init_pos_var"] = set(&TrackerConfig::init_pos_var);
  keys[prefix + ".init_vel_var"] = set(&TrackerConfig::init_vel_var);
}

const std::map<std::string, Setter>& key_table() {
  static const std::map<std::string, Setter> keys = [] {
    std::map<std::string, Setter> k;
    auto pd = [](auto setter) {
      return [setter](ConfigFile& c, const std::string& v) { setter(c, parse_double(v)); };
    };
    auto pi = [](auto setter) {
      return [setter](ConfigFile& c, const std::string& v) { setter(c, parse_int(v)); };
    };

    k["fusion.match_radius"] = pd([](ConfigFile& c, double v) { c.pipeline.fusion.match_radius = v; });
    k["fusion.min_cluster_size"] = pi([](ConfigFile& c, int v) { c.pipeline.fusion.min_cluster_size = v; });
    k["fusion.two_stage_tta"] = [](ConfigFile& c, const std::string& v) {
      c.pipeline.fusion.two_stage_tta = parse_bool(v);
    };
    k["fusion.bandwidth.centre"] = pd([](ConfigFile& c, double v) { c.pipeline.fusion.bandwidths.centre = v; });
    k["fusion.bandwidth.dims"] = pd([](ConfigFile& c, double v) { c.pipeline.fusion.bandwidths.dims = v; });
    k["fusion.bandwidth.heading_sin"] =
        pd([](ConfigFile& c, double v) { c.pipeline.fusion.bandwidths.heading_sin = v; });
    k["fusion.bandwidth.score"] = pd([](ConfigFile& c, double v) { c.pipeline.fusion.bandwidths.score = v; });

    add_tracker_keys(k, "tracker_1f", &PipelineConfig::tracker_1f);
    add_tracker_keys(k, "tracker_16f", &PipelineConfig::tracker_16f);

    k["motion.begin_to_end"] = pd([](ConfigFile& c, double v) { c.pipeline.motion.begin_to_end_threshold = v; });
    k["motion.centre_variance"] =
        pd([](ConfigFile& c, double v) { c.pipeline.motion.centre_variance_threshold = v; });
    k["motion.overlap_iou"] = pd([](ConfigFile& c, double v) { c.pipeline.motion.overlap_iou_threshold = v; });

    k["static.window"] = pi([](ConfigFile& c, int v) { c.pipeline.static_refine.window = v; });
    k["static.score_floor"] = pd([](ConfigFile& c, double v) { c.pipeline.static_refine.score_floor = v; });
    k["static.decay"] = pd([](ConfigFile& c, double v) { c.pipeline.static_refine.decay = v; });
    k["static.min_track_detections"] =
        pi([](ConfigFile& c, int v) { c.pipeline.static_refine.min_track_detections = v; });

    k["final.score_threshold"] = pd([](ConfigFile& c, double v) { c.pipeline.final_score_threshold = v; });
    k["final.nms_iou"] = pd([](ConfigFile& c, double v) { c.pipeline.final_nms_iou = v; });
    k["final.min_points_in_box"] = pi([](ConfigFile& c, int v) { c.pipeline.min_points_in_box = v; });

    k["eval.iou_thresholds"] = [](ConfigFile& c, const std::string& v) {
      c.eval.iou_thresholds.clear();
      for (const auto& item : split_csv(v)) c.eval.iou_thresholds.push_back(parse_double(item));
    };
    k["eval.modes"] = [](ConfigFile& c, const std::string& v) {
      c.eval.modes.clear();
      for (const auto& item : split_csv(v)) {
        if (item == "bev")
          c.eval.modes.push_back(IouMode::Bev);
        else if (item == "3d")
          c.eval.modes.push_back(IouMode::ThreeD);
        else
          throw std::invalid_argument("mode must be \"bev\" or \"3d\"");
      }
    };
    k["eval.recall_positions"] = pi([](ConfigFile& c, int v) { c.eval.recall_positions = v; });
    k["eval.range_bins"] = [](ConfigFile& c, const std::string& v) {
      std::vector<double> edges;
      for (const auto& item : split_csv(v)) edges.push_back(parse_double(item));
      if (edges.size() < 2) throw std::invalid_argument("need at least two range edges");
      c.eval.range_bins.clear();
      for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        if (!(edges[i] < edges[i + 1])) throw std::invalid_argument("range edges must increase");
        c.eval.range_bins.emplace_back(edges[i], edges[i + 1]);
      }
    };

    k["synth.frames"] = pi([](ConfigFile& c, int v) { c.synth.n_frames = v; });
    k["synth.static"] = pi([](ConfigFile& c, int v) { c.synth.n_static = v; });
    k["synth.dynamic"] = pi([](ConfigFile& c, int v) { c.synth.n_dynamic = v; });
    k["synth.detectors"] = pi([](ConfigFile& c, int v) { c.synth.n_detectors = v; });
    k["synth.ego_speed"] = pd([](ConfigFile& c, double v) { c.synth.ego_speed = v; });
    k["synth.centre_sigma"] = pd([](ConfigFile& c, double v) { c.synth.centre_sigma = v; });
    k["synth.dim_sigma"] = pd([](ConfigFile& c, double v) { c.synth.dim_sigma = v; });
    k["synth.heading_sigma"] = pd([](ConfigFile& c, double v) { c.synth.heading_sigma = v; });
    k["synth.flip_prob"] = pd([](ConfigFile& c, double v) { c.synth.heading_flip_prob = v; });
    k["synth.outlier_prob"] = pd([](ConfigFile& c, double v) { c.synth.outlier_prob = v; });
    k["synth.outlier_factor"] = pd([](ConfigFile& c, double v) { c.synth.outlier_factor = v; });
    k["synth.fp_rate"] = pd([](ConfigFile& c, double v) { c.synth.fp_rate = v; });
    k["synth.near_dropout_1f"] = pd([](ConfigFile& c, double v) { c.synth.near_dropout_1f = v; });
    k["synth.far_dropout_1f"] = pd([](ConfigFile& c, double v) { c.synth.far_dropout_1f = v; });
    k["synth.range_knee_1f"] = pd([](ConfigFile& c, double v) { c.synth.range_knee_1f = v; });
    k["synth.near_dropout_16f"] = pd([](ConfigFile& c, double v) { c.synth.near_dropout_16f = v; });
    k["synth.far_dropout_16f"] = pd([](ConfigFile& c, double v) { c.synth.far_dropout_16f = v; });
    k["synth.range_knee_16f"] = pd([](ConfigFile& c, double v) { c.synth.range_knee_16f = v; });
    k["synth.noise_range_scale"] = pd([](ConfigFile& c, double v) { c.synth.noise_range_scale = v; });
    k["synth.reg_sigma_16f"] = pd([](ConfigFile& c, double v) { c.synth.reg_sigma_16f = v; });
    k["synth.detector_bias_scale"] =
        pd([](ConfigFile& c, double v) { c.synth.detector_bias_scale = v; });
    k["synth.static_16f_noise_factor"] =
        pd([](ConfigFile& c, double v) { c.synth.static_16f_noise_factor = v; });
    k["synth.dynamic_16f_noise_factor"] =
        pd([](ConfigFile& c, double v) { c.synth.dynamic_16f_noise_factor = v; });
    k["synth.dynamic_16f_max_lag"] = pd([](ConfigFile& c, double v) { c.synth.dynamic_16f_max_lag = v; });
    k["synth.gt_range"] = pd([](ConfigFile& c, double v) { c.synth.gt_range = v; });
    k["synth.ghost_rate"] = pd([](ConfigFile& c, double v) { c.synth.ghost_rate = v; });
    k["synth.ghost_duration"] = pi([](ConfigFile& c, int v) { c.synth.ghost_duration = v; });
    k["synth.ghost_dropout"] = pd([](ConfigFile& c, double v) { c.synth.ghost_dropout = v; });
    k["synth.points"] = [](ConfigFile& c, const std::string& v) { c.synth.emit_points = parse_bool(v); };
    k["synth.seed"] = [](ConfigFile& c, const std::string& v) { c.synth.seed = parse_u64(v); };
    return k;
  }();
  return keys;
}

void validate(const ConfigFile& c, const std::string& origin) {
  auto check = [&](bool ok, const std::string& msg) {
    if (!ok) throw std::runtime_error(origin + ": " + msg);
  };
  const PipelineConfig& p = c.pipeline;
  check(p.fusion.match_radius > 0.0, "fusion.match_radius must be > 0");
  check(p.fusion.min_cluster_size >= 1, "fusion.min_cluster_size must be >= 1");
  check(p.fusion.bandwidths.centre > 0.0 && p.fusion.bandwidths.dims > 0.0 &&
            p.fusion.bandwidths.heading_sin > 0.0 && p.fusion.bandwidths.score > 0.0,
        "fusion bandwidths must be > 0");
  for (const TrackerConfig* t : {&p.tracker_1f, &p.tracker_16f}) {
    check(t->iou_gate > 0.0 && t->distance_gate > 0.0, "tracker gates must be > 0");
    check(t->max_age >= 1, "tracker max_age must be >= 1");
    check(t->min_hits >= 1, "tracker min_hits must be >= 1");
  }
  check(p.motion.begin_to_end_threshold > 0.0 && p.motion.centre_variance_threshold > 0.0 &&
            p.motion.overlap_iou_threshold > 0.0,
        "motion thresholds must be > 0");
  check(p.static_refine.window >= 0, "static.window must be >= 0");
  check(p.static_refine.decay > 0.0 && p.static_refine.decay <= 1.0,
        "static.decay must be in (0, 1]");
  check(p.static_refine.score_floor >= 0.0 && p.static_refine.score_floor <= 1.0,
        "static.score_floor must be in [0, 1]");
  check(p.final_score_threshold >= 0.0 && p.final_score_threshold <= 1.0,
        "final.score_threshold must be in [0, 1]");
  check(p.final_nms_iou >= 0.0 && p.final_nms_iou <= 1.0, "final.nms_iou must be in [0, 1]");
  check(p.min_points_in_box >= 0, "final.min_points_in_box must be >= 0");
  for (double t : c.eval.iou_thresholds)
    check(t > 0.0 && t <= 1.0, "eval.iou_thresholds must be in (0, 1]");
  check(c.eval.recall_positions >= 1, "eval.recall_positions must be >= 1");
}

}  // namespace

ConfigFile parse_config_text(const std::string& text, const std::string& origin) {
  ConfigFile out;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string stripped = raw;
    if (const auto hash = stripped.find('#'); hash != std::string::npos)
      stripped = stripped.substr(0, hash);
    stripped = trim(stripped);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(origin + ":" + std::to_string(line) + ": expected key = value");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    const auto& keys = key_table();
    const auto it = keys.find(key);
    if (it == keys.end())
      throw std::runtime_error(origin + ":" + std::to_string(line) + ": unknown key \"" + key + "\"");
    try {
      it->second(out, value);
    } catch (const std::exception& e) {
      throw std::runtime_error(origin + ":" + std::to_string(line) + ": " + e.what());
    }
  }
  // window KBF shares the fusion bandwidths
  out.pipeline.static_refine.bandwidths = out.pipeline.fusion.bandwidths;
  validate(out, origin);
  return out;
}

ConfigFile load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

std::string describe_config(const PipelineConfig& cfg) {
  std::ostringstream os;
  auto num = [&os](const char* key, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s=%.17g\n", key, v);
    os << buf;
  };
  num("fusion.match_radius", cfg.fusion.match_radius);
  num("fusion.min_cluster_size", cfg.fusion.min_cluster_size);
  num("fusion.two_stage_tta", cfg.fusion.two_stage_tta ? 1 : 0);
  num("fusion.bandwidth.centre", cfg.fusion.bandwidths.centre);
  num("fusion.bandwidth.dims", cfg.fusion.bandwidths.dims);
  num("fusion.bandwidth.heading_sin", cfg.fusion.bandwidths.heading_sin);
  num("fusion.bandwidth.score", cfg.fusion.bandwidths.score);
  const auto tracker = [&](const char* prefix, const TrackerConfig& t) {
    std::string p(prefix);
    num((p + ".metric").c_str(), t.metric == AssocMetric::BevIou ? 0 : 1);
    num((p + ".iou_gate").c_str(), t.iou_gate);
    num((p + ".distance_gate").c_str(), t.distance_gate);
    num((p + ".distance_fallback").c_str(), t.distance_fallback ? 1 : 0);
    num((p + ".max_age").c_str(), t.max_age);
    num((p + ".min_hits").c_str(), t.min_hits);
    num((p + ".meas_sigma_pos").c_str(), t.meas_sigma_pos);
    num((p + ".meas_sigma_heading").c_str(), t.meas_sigma_heading);
    num((p + ".meas_sigma_dims").c_str(), t.meas_sigma_dims);
    num((p + ".process_sigma_pos").c_str(), t.process_sigma_pos);
    num((p + ".process_sigma_vel").c_str(), t.process_sigma_vel);
    num((p + ".process_sigma_heading").c_str(), t.process_sigma_heading);
    num((p + ".process_sigma_dims").c_str(), t.process_sigma_dims);
    num((p + ".init_pos_var").c_str(), t.init_pos_var);
    num((p + ".init_vel_var").c_str(), t.init_vel_var);
  };
  tracker("tracker_1f", cfg.tracker_1f);
  tracker("tracker_16f", cfg.tracker_16f);
  num("motion.begin_to_end", cfg.motion.begin_to_end_threshold);
  num("motion.centre_variance", cfg.motion.centre_variance_threshold);
  num("motion.overlap_iou", cfg.motion.overlap_iou_threshold);
  num("static.window", cfg.static_refine.window);
  num("static.score_floor", cfg.static_refine.score_floor);
  num("static.decay", cfg.static_refine.decay);
  num("static.min_track_detections", cfg.static_refine.min_track_detections);
  num("static.bandwidth.centre", cfg.static_refine.bandwidths.centre);
  num("static.bandwidth.dims", cfg.static_refine.bandwidths.dims);
  num("static.bandwidth.heading_sin", cfg.static_refine.bandwidths.heading_sin);
  num("static.bandwidth.score", cfg.static_refine.bandwidths.score);
  num("final.score_threshold", cfg.final_score_threshold);
  num("final.nms_iou", cfg.final_nms_iou);
  num("final.min_points_in_box", cfg.min_points_in_box);
  return os.str();
}

std::string config_hash(const PipelineConfig& cfg) {
  const std::string text = describe_config(cfg);
  std::uint64_t hash = 1469598103934665603ull;
  for (unsigned char ch : text) {
    hash ^= ch;
    hash *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace pseudofuse

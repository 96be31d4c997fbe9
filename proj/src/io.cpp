#include "pseudofuse/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>

namespace pseudofuse {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, int line, const std::string& msg) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + msg);
}

json parse_line(const std::string& path, int line, const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) fail(path, line, "invalid JSON");
  return j;
}

Box7 parse_box_fields(const std::string& path, int line, const json& j) {
  if (!j.contains("box") || !j["box"].is_array() || j["box"].size() != 7)
    fail(path, line, "box must be an array of 7 numbers");
  Box7 b;
  b.cx = j["box"][0].get<double>();
  b.cy = j["box"][1].get<double>();
  b.cz = j["box"][2].get<double>();
  b.l = j["box"][3].get<double>();
  b.w = j["box"][4].get<double>();
  b.h = j["box"][5].get<double>();
  b.heading = j["box"][6].get<double>();
  if (!(b.l > 0.0)) fail(path, line, "length must be positive");
  if (!(b.w > 0.0)) fail(path, line, "width must be positive");
  if (!(b.h > 0.0)) fail(path, line, "height must be positive");
  b.heading = wrap_angle(b.heading);
  if (!j.contains("score")) fail(path, line, "missing score");
  b.score = j["score"].get<double>();
  if (!(b.score >= 0.0 && b.score <= 1.0)) fail(path, line, "score outside [0, 1]");
  b.class_id = j.value("class", 0);
  if (!j.contains("frame") || !j["frame"].is_number_integer())
    fail(path, line, "missing integer frame");
  b.frame_idx = j["frame"].get<int>();
  if (b.frame_idx < 0) fail(path, line, "frame must be non-negative");
  return b;
}

json box_to_json(const Box7& b) {
  return json::array({b.cx, b.cy, b.cz, b.l, b.w, b.h, b.heading});
}

void for_each_line(const std::string& path, const std::function<void(int, const std::string&)>& fn) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string text;
  int line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.empty()) continue;
    fn(line, text);
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

}  // namespace

// ------------------------------------------------------------- detections

std::vector<DetectionRecord> load_detections(const std::string& path) {
  std::vector<DetectionRecord> records;
  for_each_line(path, [&](int line, const std::string& text) {
    const json j = parse_line(path, line, text);
    DetectionRecord rec;
    rec.box = parse_box_fields(path, line, j);
    rec.frame = rec.box.frame_idx;
    if (!j.contains("detector") || !j["detector"].is_string())
      fail(path, line, "missing detector name");
    rec.detector = j["detector"].get<std::string>();
    const std::string stream = j.value("stream", "1f");
    if (stream != "1f" && stream != "16f") fail(path, line, "stream must be \"1f\" or \"16f\"");
    rec.multi_frame = stream == "16f";
    if (j.contains("tta")) {
      const json& t = j["tta"];
      rec.tta.flip_x = t.value("flip_x", false);
      rec.tta.flip_y = t.value("flip_y", false);
      rec.tta.rot = t.value("rot", 0.0);
    }
    records.push_back(std::move(rec));
  });
  return records;
}

void save_detections(const std::vector<DetectionRecord>& records, const std::string& path) {
  auto out = open_out(path);
  for (const auto& rec : records) {
    json j;
    j["frame"] = rec.frame;
    j["detector"] = rec.detector;
    j["tta"] = {{"flip_x", rec.tta.flip_x}, {"flip_y", rec.tta.flip_y}, {"rot", rec.tta.rot}};
    j["stream"] = rec.multi_frame ? "16f" : "1f";
    j["box"] = box_to_json(rec.box);
    j["score"] = rec.box.score;
    j["class"] = rec.box.class_id;
    out << j.dump() << "\n";
  }
}

// ------------------------------------------------------------------ poses

std::vector<EgoPose> load_poses(const std::string& path) {
  std::vector<EgoPose> poses;
  std::set<int> seen;
  for_each_line(path, [&](int line, const std::string& text) {
    const json j = parse_line(path, line, text);
    if (!j.contains("frame") || !j["frame"].is_number_integer())
      fail(path, line, "missing integer frame");
    EgoPose pose;
    pose.frame_idx = j["frame"].get<int>();
    if (pose.frame_idx < 0) fail(path, line, "frame must be non-negative");
    if (!seen.insert(pose.frame_idx).second) fail(path, line, "duplicate pose frame");
    if (!j.contains("t") || !j["t"].is_array() || j["t"].size() != 3)
      fail(path, line, "t must be an array of 3 numbers");
    pose.translation =
        Eigen::Vector3d(j["t"][0].get<double>(), j["t"][1].get<double>(), j["t"][2].get<double>());
    if (!j.contains("q") || !j["q"].is_array() || j["q"].size() != 4)
      fail(path, line, "q must be an array of 4 numbers (w, x, y, z)");
    pose.rotation = Eigen::Quaterniond(j["q"][0].get<double>(), j["q"][1].get<double>(),
                                       j["q"][2].get<double>(), j["q"][3].get<double>());
    if (std::fabs(pose.rotation.norm() - 1.0) > 1e-6) fail(path, line, "quaternion is not unit");
    poses.push_back(pose);
  });
  std::sort(poses.begin(), poses.end(),
            [](const EgoPose& a, const EgoPose& b) { return a.frame_idx < b.frame_idx; });
  return poses;
}

void save_poses(const std::vector<EgoPose>& poses, const std::string& path) {
  auto out = open_out(path);
  for (const auto& pose : poses) {
    json j;
    j["frame"] = pose.frame_idx;
    j["t"] = {pose.translation.x(), pose.translation.y(), pose.translation.z()};
    j["q"] = {pose.rotation.w(), pose.rotation.x(), pose.rotation.y(), pose.rotation.z()};
    out << j.dump() << "\n";
  }
}

// ----------------------------------------------------------------- points

std::vector<std::pair<int, std::vector<Eigen::Vector3d>>> load_points(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::pair<int, std::vector<Eigen::Vector3d>>> frames;
  std::set<int> seen;
  while (true) {
    std::uint32_t count = 0, frame = 0;
    in.read(reinterpret_cast<char*>(&count), sizeof count);
    if (in.gcount() == 0) break;
    if (in.gcount() != sizeof count) throw std::runtime_error(path + ": truncated record header");
    in.read(reinterpret_cast<char*>(&frame), sizeof frame);
    if (in.gcount() != sizeof frame) throw std::runtime_error(path + ": truncated record header");
    if (!seen.insert(static_cast<int>(frame)).second)
      throw std::runtime_error(path + ": duplicate points frame " + std::to_string(frame));
    std::vector<float> raw(static_cast<std::size_t>(count) * 3);
    in.read(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(raw.size() * sizeof(float)))
      throw std::runtime_error(path + ": truncated point payload");
    std::vector<Eigen::Vector3d> pts(count);
    for (std::uint32_t i = 0; i < count; ++i)
      pts[i] = Eigen::Vector3d(raw[3 * i], raw[3 * i + 1], raw[3 * i + 2]);
    frames.emplace_back(static_cast<int>(frame), std::move(pts));
  }
  return frames;
}

void save_points(const std::vector<std::pair<int, std::vector<Eigen::Vector3d>>>& frames,
                 const std::string& path) {
  auto out = open_out(path);
  for (const auto& [frame, pts] : frames) {
    const std::uint32_t count = static_cast<std::uint32_t>(pts.size());
    const std::uint32_t f = static_cast<std::uint32_t>(frame);
    out.write(reinterpret_cast<const char*>(&count), sizeof count);
    out.write(reinterpret_cast<const char*>(&f), sizeof f);
    std::vector<float> raw;
    raw.reserve(pts.size() * 3);
    for (const auto& p : pts) {
      raw.push_back(static_cast<float>(p.x()));
      raw.push_back(static_cast<float>(p.y()));
      raw.push_back(static_cast<float>(p.z()));
    }
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size() * sizeof(float)));
  }
}

// --------------------------------------------------------------- sequence

SequenceInput load_sequence(const std::vector<std::string>& detection_paths,
                            const std::string& pose_path,
                            const std::optional<std::string>& points_path) {
  SequenceInput input;

  const auto poses = load_poses(pose_path);
  if (poses.empty()) throw std::runtime_error(pose_path + ": no poses");
  std::map<int, std::size_t> frame_slot;
  input.frames.resize(poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    input.frames[i].frame_idx = poses[i].frame_idx;
    input.frames[i].pose = poses[i];
    frame_slot[poses[i].frame_idx] = i;
  }

  std::map<std::string, int> detector_ids;
  auto detector_id = [&](const std::string& name) {
    auto it = detector_ids.find(name);
    if (it != detector_ids.end()) return it->second;
    const int id = static_cast<int>(input.detector_names.size());
    detector_ids.emplace(name, id);
    input.detector_names.push_back(name);
    return id;
  };

  for (const auto& path : detection_paths) {
    for (const auto& rec : load_detections(path)) {
      const auto slot = frame_slot.find(rec.frame);
      if (slot == frame_slot.end())
        throw std::runtime_error(path + ": detection references frame " +
                                 std::to_string(rec.frame) + " with no pose");
      const int det = detector_id(rec.detector);
      FrameInput& frame = input.frames[slot->second];
      auto& streams = rec.multi_frame ? frame.multi_frame : frame.one_frame;
      if (static_cast<int>(streams.size()) <= det) streams.resize(det + 1);
      Box7 box = rec.box;
      box.detector_id = det;
      streams[det].push_back(TaggedBox{box, rec.tta});
    }
  }
  const std::size_t n_detectors = input.detector_names.size();
  for (auto& frame : input.frames) {
    frame.one_frame.resize(n_detectors);
    frame.multi_frame.resize(n_detectors);
  }

  if (points_path) {
    for (auto& [frame, pts] : load_points(*points_path)) {
      const auto slot = frame_slot.find(frame);
      if (slot == frame_slot.end())
        throw std::runtime_error(*points_path + ": points reference frame " +
                                 std::to_string(frame) + " with no pose");
      input.frames[slot->second].points = std::move(pts);
      input.frames[slot->second].has_points = true;
    }
  }
  return input;
}

// ---------------------------------------------------------- pseudo-labels

namespace {

void write_label_header(std::ofstream& out, const std::string& config_hash) {
  json header;
  header["version"] = 1;
  header["config_hash"] = config_hash;
  out << header.dump() << "\n";
}

}  // namespace

void save_pseudo_labels(const PseudoLabelSet& labels, const std::string& path) {
  auto out = open_out(path);
  write_label_header(out, labels.config_hash);
  for (std::size_t i = 0; i < labels.frames.size(); ++i) {
    for (const auto& label : labels.labels[i]) {
      json j;
      j["frame"] = labels.frames[i];
      j["box"] = box_to_json(label.box);
      j["score"] = label.box.score;
      j["class"] = label.box.class_id;
      j["provenance"] = provenance_name(label.provenance);
      out << j.dump() << "\n";
    }
  }
}

PseudoLabelSet load_pseudo_labels(const std::string& path) {
  PseudoLabelSet set;
  std::map<int, std::size_t> slot;
  bool have_header = false;
  for_each_line(path, [&](int line, const std::string& text) {
    const json j = parse_line(path, line, text);
    if (!have_header) {
      if (!j.contains("version")) fail(path, line, "missing header record");
      if (j["version"].get<int>() != 1) fail(path, line, "unsupported version");
      set.config_hash = j.value("config_hash", "");
      have_header = true;
      return;
    }
    PseudoLabel label;
    label.box = parse_box_fields(path, line, j);
    const std::string prov = j.value("provenance", "");
    const auto parsed = provenance_from_name(prov);
    if (!parsed) fail(path, line, "unknown provenance \"" + prov + "\"");
    label.provenance = *parsed;
    label.box.detector_id = kFusedDetectorId;
    auto it = slot.find(label.box.frame_idx);
    if (it == slot.end()) {
      it = slot.emplace(label.box.frame_idx, set.frames.size()).first;
      set.frames.push_back(label.box.frame_idx);
      set.labels.emplace_back();
    }
    set.labels[it->second].push_back(std::move(label));
  });
  if (!have_header) throw std::runtime_error(path + ": missing header record");
  return set;
}

void save_label_frames(const std::vector<int>& frames,
                       const std::vector<std::vector<Box7>>& boxes, const std::string& provenance,
                       const std::string& path, const std::string& config_hash) {
  auto out = open_out(path);
  write_label_header(out, config_hash);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    for (const auto& b : boxes[i]) {
      json j;
      j["frame"] = frames[i];
      j["box"] = box_to_json(b);
      j["score"] = b.score;
      j["class"] = b.class_id;
      j["provenance"] = provenance;
      out << j.dump() << "\n";
    }
  }
}

std::pair<std::vector<int>, std::vector<std::vector<Box7>>> load_label_boxes(
    const std::string& path) {
  std::vector<int> frames;
  std::vector<std::vector<Box7>> boxes;
  std::map<int, std::size_t> slot;
  bool have_header = false;
  for_each_line(path, [&](int line, const std::string& text) {
    const json j = parse_line(path, line, text);
    if (!have_header && j.contains("version")) {
      have_header = true;
      return;
    }
    have_header = true;
    Box7 b = parse_box_fields(path, line, j);
    auto it = slot.find(b.frame_idx);
    if (it == slot.end()) {
      it = slot.emplace(b.frame_idx, frames.size()).first;
      frames.push_back(b.frame_idx);
      boxes.emplace_back();
    }
    boxes[it->second].push_back(b);
  });
  return {frames, boxes};
}

// ----------------------------------------------------------------- tracks

void save_tracks(const std::vector<Track>& tracks, const std::string& path) {
  auto out = open_out(path);
  for (const auto& track : tracks) {
    for (const auto& entry : track.entries) {
      json j;
      j["track"] = track.track_id;
      j["frame"] = entry.frame_idx;
      j["box"] = box_to_json(entry.box);
      j["score"] = entry.box.score;
      j["class"] = entry.box.class_id;
      j["interpolated"] = entry.interpolated;
      out << j.dump() << "\n";
    }
  }
}

std::vector<Track> load_tracks(const std::string& path) {
  std::map<int, Track> by_id;
  for_each_line(path, [&](int line, const std::string& text) {
    const json j = parse_line(path, line, text);
    if (!j.contains("track") || !j["track"].is_number_integer())
      fail(path, line, "missing integer track id");
    const int id = j["track"].get<int>();
    TrackEntry entry;
    entry.box = parse_box_fields(path, line, j);
    entry.frame_idx = entry.box.frame_idx;
    entry.interpolated = j.value("interpolated", false);
    Track& track = by_id[id];
    track.track_id = id;
    if (!track.entries.empty() && track.entries.back().frame_idx >= entry.frame_idx)
      fail(path, line, "track entries out of order");
    track.entries.push_back(std::move(entry));
  });
  std::vector<Track> tracks;
  tracks.reserve(by_id.size());
  for (auto& [id, track] : by_id) tracks.push_back(std::move(track));
  return tracks;
}

// ------------------------------------------------------------------- glob

std::vector<std::string> expand_glob(const std::string& pattern) {
  namespace fs = std::filesystem;
  const fs::path p(pattern);
  const std::string basename = p.filename().string();
  if (basename.find('*') == std::string::npos && basename.find('?') == std::string::npos) {
    return {pattern};
  }
  const fs::path dir = p.parent_path().empty() ? fs::path(".") : p.parent_path();

  auto matches = [&](const std::string& name) {
    // greedy wildcard match over * and ?
    std::size_t n = 0, g = 0, star_g = std::string::npos, star_n = 0;
    while (n < name.size()) {
      if (g < basename.size() && (basename[g] == '?' || basename[g] == name[n])) {
        ++g;
        ++n;
      } else if (g < basename.size() && basename[g] == '*') {
        star_g = g++;
        star_n = n;
      } else if (star_g != std::string::npos) {
        g = star_g + 1;
        n = ++star_n;
      } else {
        return false;
      }
    }
    while (g < basename.size() && basename[g] == '*') ++g;
    return g == basename.size();
  };

  std::vector<std::string> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& ent : fs::directory_iterator(dir)) {
    if (!ent.is_regular_file()) continue;
    if (matches(ent.path().filename().string())) out.push_back(ent.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace pseudofuse

#include "pseudofuse/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pseudofuse {

namespace detail {

// Hungarian algorithm with potentials, O(n^3) on a square matrix.
std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  if (n == 0) return {};
  const double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] >= 1) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

}  // namespace detail

TrackState make_track_state(const Box7& detection, const TrackerConfig& cfg, int track_id) {
  TrackState s;
  s.mean << detection.cx, detection.cy, detection.cz, detection.heading, detection.l, detection.w,
      detection.h, 0.0, 0.0;
  Eigen::Matrix<double, kStateDim, 1> var;
  var << cfg.init_pos_var, cfg.init_pos_var, cfg.init_pos_var, 0.5, 0.25, 0.25, 0.25,
      cfg.init_vel_var, cfg.init_vel_var;
  s.covariance = var.asDiagonal();
  s.hits = 1;
  s.misses = 0;
  s.track_id = track_id;
  return s;
}

TrackState predict(const TrackState& state, const TrackerConfig& cfg, double dt) {
  TrackState out = state;
  Eigen::Matrix<double, kStateDim, kStateDim> f =
      Eigen::Matrix<double, kStateDim, kStateDim>::Identity();
  f(0, 7) = dt;
  f(1, 8) = dt;
  out.mean = f * state.mean;
  out.mean(3) = wrap_angle(out.mean(3));

  Eigen::Matrix<double, kStateDim, 1> q;
  const double p2 = cfg.process_sigma_pos * cfg.process_sigma_pos;
  const double v2 = cfg.process_sigma_vel * cfg.process_sigma_vel;
  const double h2 = cfg.process_sigma_heading * cfg.process_sigma_heading;
  const double d2 = cfg.process_sigma_dims * cfg.process_sigma_dims;
  q << p2, p2, d2, h2, d2, d2, d2, v2, v2;
  out.covariance = f * state.covariance * f.transpose();
  out.covariance += (dt * q).asDiagonal().toDenseMatrix();
  return out;
}

Box7 state_to_box(const TrackState& state, int frame_idx, double score, int class_id) {
  Box7 b;
  b.cx = state.mean(0);
  b.cy = state.mean(1);
  b.cz = state.mean(2);
  b.heading = wrap_angle(state.mean(3));
  b.l = std::max(state.mean(4), 1e-6);
  b.w = std::max(state.mean(5), 1e-6);
  b.h = std::max(state.mean(6), 1e-6);
  b.score = score;
  b.class_id = class_id;
  b.detector_id = kFusedDetectorId;
  b.frame_idx = frame_idx;
  return b;
}

TrackState update(const TrackState& state, const Box7& detection, const TrackerConfig& cfg) {
  using MeasVec = Eigen::Matrix<double, kMeasDim, 1>;
  using MeasMat = Eigen::Matrix<double, kMeasDim, kMeasDim>;
  using ObsMat = Eigen::Matrix<double, kMeasDim, kStateDim>;

  ObsMat h = ObsMat::Zero();
  for (int i = 0; i < kMeasDim; ++i) h(i, i) = 1.0;

  MeasVec z;
  z << detection.cx, detection.cy, detection.cz, detection.heading, detection.l, detection.w,
      detection.h;
  MeasVec innovation = z - h * state.mean;
  innovation(3) = wrap_angle(innovation(3));

  MeasVec rdiag;
  const double rp = cfg.meas_sigma_pos * cfg.meas_sigma_pos;
  const double rh = cfg.meas_sigma_heading * cfg.meas_sigma_heading;
  const double rd = cfg.meas_sigma_dims * cfg.meas_sigma_dims;
  rdiag << rp, rp, rp, rh, rd, rd, rd;
  const MeasMat r = rdiag.asDiagonal();

  const MeasMat s = h * state.covariance * h.transpose() + r;
  const Eigen::Matrix<double, kStateDim, kMeasDim> k =
      state.covariance * h.transpose() * s.inverse();

  TrackState out = state;
  out.mean = state.mean + k * innovation;
  out.mean(3) = wrap_angle(out.mean(3));

  // Joseph form keeps the posterior symmetric PSD
  const Eigen::Matrix<double, kStateDim, kStateDim> ikh =
      Eigen::Matrix<double, kStateDim, kStateDim>::Identity() - k * h;
  out.covariance = ikh * state.covariance * ikh.transpose() + k * r * k.transpose();
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, kStateDim, kStateDim>> eig(out.covariance);
  if (eig.eigenvalues().minCoeff() < -1e-9)
    throw std::runtime_error("kalman update produced a non-PSD covariance");

  out.hits = state.hits + 1;
  out.misses = 0;
  return out;
}

namespace {

constexpr double kBigCost = 1e8;

std::vector<std::vector<double>> gated_costs(std::span<const TrackState> tracks,
                                             std::span<const Box7> detections, AssocMetric metric,
                                             const TrackerConfig& cfg) {
  const std::size_t nt = tracks.size();
  const std::size_t nd = detections.size();
  std::vector<std::vector<double>> cost(nt, std::vector<double>(nd, kBigCost));
  for (std::size_t i = 0; i < nt; ++i) {
    const Box7 tb = state_to_box(tracks[i], detections.empty() ? 0 : detections[0].frame_idx, 1.0, 0);
    for (std::size_t j = 0; j < nd; ++j) {
      if (metric == AssocMetric::BevIou) {
        const double iou = bev_iou(tb, detections[j]);
        if (iou >= cfg.iou_gate) cost[i][j] = 1.0 - iou;
      } else {
        const Eigen::Vector3d tc(tb.cx, tb.cy, tb.cz);
        const Eigen::Vector3d dc(detections[j].cx, detections[j].cy, detections[j].cz);
        const double dist = (tc - dc).norm();
        if (dist <= cfg.distance_gate) cost[i][j] = dist;
      }
    }
  }
  return cost;
}

void assign_pass(std::span<const TrackState> tracks, std::span<const Box7> detections,
                 AssocMetric metric, const TrackerConfig& cfg, const std::vector<int>& track_ids,
                 const std::vector<int>& det_ids, Association& out) {
  if (track_ids.empty() || det_ids.empty()) {
    out.unmatched_tracks.insert(out.unmatched_tracks.end(), track_ids.begin(), track_ids.end());
    out.unmatched_detections.insert(out.unmatched_detections.end(), det_ids.begin(), det_ids.end());
    return;
  }
  std::vector<TrackState> sub_tracks;
  std::vector<Box7> sub_dets;
  for (int t : track_ids) sub_tracks.push_back(tracks[t]);
  for (int d : det_ids) sub_dets.push_back(detections[d]);

  const auto gated = gated_costs(sub_tracks, sub_dets, metric, cfg);
  const std::size_t n = std::max(sub_tracks.size(), sub_dets.size());
  std::vector<std::vector<double>> padded(n, std::vector<double>(n, kBigCost));
  for (std::size_t i = 0; i < sub_tracks.size(); ++i)
    for (std::size_t j = 0; j < sub_dets.size(); ++j) padded[i][j] = gated[i][j];

  const auto row_to_col = detail::solve_assignment(padded);
  std::vector<bool> det_matched(sub_dets.size(), false);
  for (std::size_t i = 0; i < sub_tracks.size(); ++i) {
    const int j = row_to_col[i];
    if (j >= 0 && j < static_cast<int>(sub_dets.size()) && gated[i][j] < 0.5 * kBigCost) {
      out.matches.emplace_back(track_ids[i], det_ids[j]);
      det_matched[j] = true;
    } else {
      out.unmatched_tracks.push_back(track_ids[i]);
    }
  }
  for (std::size_t j = 0; j < sub_dets.size(); ++j)
    if (!det_matched[j]) out.unmatched_detections.push_back(det_ids[j]);
}

}  // namespace

Association associate(std::span<const TrackState> tracks, std::span<const Box7> detections,
                      const TrackerConfig& cfg) {
  Association out;
  std::vector<int> all_tracks(tracks.size());
  std::vector<int> all_dets(detections.size());
  for (std::size_t i = 0; i < tracks.size(); ++i) all_tracks[i] = static_cast<int>(i);
  for (std::size_t j = 0; j < detections.size(); ++j) all_dets[j] = static_cast<int>(j);

  assign_pass(tracks, detections, cfg.metric, cfg, all_tracks, all_dets, out);

  if (cfg.metric == AssocMetric::BevIou && cfg.distance_fallback && !out.unmatched_tracks.empty() &&
      !out.unmatched_detections.empty()) {
    Association second;
    assign_pass(tracks, detections, AssocMetric::CentroidDistance, cfg, out.unmatched_tracks,
                out.unmatched_detections, second);
    out.matches.insert(out.matches.end(), second.matches.begin(), second.matches.end());
    out.unmatched_tracks = std::move(second.unmatched_tracks);
    out.unmatched_detections = std::move(second.unmatched_detections);
  }
  std::sort(out.matches.begin(), out.matches.end());
  std::sort(out.unmatched_tracks.begin(), out.unmatched_tracks.end());
  std::sort(out.unmatched_detections.begin(), out.unmatched_detections.end());
  return out;
}

namespace {

struct LiveTrack {
  TrackState kf;
  std::vector<TrackEntry> entries;
  std::vector<TrackEntry> pending;  // predictions for missed frames, flushed on re-match
  double last_score = 0.0;
  int class_id = 0;
};

}  // namespace

std::vector<Track> track_sequence(std::span<const FrameBoxes> frames, const TrackerConfig& cfg) {
  std::vector<LiveTrack> live;
  std::vector<Track> finished;
  int next_id = 0;
  int prev_frame = 0;
  bool first = true;

  auto retire = [&](LiveTrack& t) {
    if (t.kf.hits >= cfg.min_hits) {
      Track out;
      out.track_id = t.kf.track_id;
      out.entries = std::move(t.entries);
      finished.push_back(std::move(out));
    }
  };

  for (const auto& frame : frames) {
    if (!first && frame.frame_idx <= prev_frame)
      throw std::invalid_argument("track_sequence: frames out of order");
    const double dt = first ? 0.0 : static_cast<double>(frame.frame_idx - prev_frame);
    prev_frame = frame.frame_idx;
    first = false;

    std::vector<TrackState> states;
    states.reserve(live.size());
    for (auto& t : live) {
      if (dt > 0.0) t.kf = predict(t.kf, cfg, dt);
      states.push_back(t.kf);
    }

    const Association assoc = associate(states, frame.boxes, cfg);

    for (const auto& [ti, di] : assoc.matches) {
      LiveTrack& t = live[ti];
      t.kf = update(t.kf, frame.boxes[di], cfg);
      if (!t.pending.empty()) {
        t.entries.insert(t.entries.end(), t.pending.begin(), t.pending.end());
        t.pending.clear();
      }
      t.entries.push_back(TrackEntry{frame.frame_idx, frame.boxes[di], false});
      t.last_score = frame.boxes[di].score;
      t.class_id = frame.boxes[di].class_id;
    }

    std::vector<bool> dead(live.size(), false);
    for (int ti : assoc.unmatched_tracks) {
      LiveTrack& t = live[ti];
      t.kf.misses += 1;
      if (t.kf.misses > cfg.max_age) {
        retire(t);
        dead[ti] = true;
      } else {
        t.pending.push_back(TrackEntry{
            frame.frame_idx, state_to_box(t.kf, frame.frame_idx, t.last_score, t.class_id), true});
      }
    }
    if (std::find(dead.begin(), dead.end(), true) != dead.end()) {
      std::vector<LiveTrack> alive;
      alive.reserve(live.size());
      for (std::size_t i = 0; i < live.size(); ++i)
        if (!dead[i]) alive.push_back(std::move(live[i]));
      live = std::move(alive);
    }

    for (int di : assoc.unmatched_detections) {
      LiveTrack t;
      t.kf = make_track_state(frame.boxes[di], cfg, next_id++);
      t.entries.push_back(TrackEntry{frame.frame_idx, frame.boxes[di], false});
      t.last_score = frame.boxes[di].score;
      t.class_id = frame.boxes[di].class_id;
      live.push_back(std::move(t));
    }
  }

  for (auto& t : live) retire(t);
  std::sort(finished.begin(), finished.end(),
            [](const Track& a, const Track& b) { return a.track_id < b.track_id; });
  return finished;
}

}  // namespace pseudofuse

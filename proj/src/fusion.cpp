#include "pseudofuse/fusion.hpp"

#include "pseudofuse/kde.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace pseudofuse {

Box7 augment_box(const Box7& box, const TtaTransform& tta) {
  Box7 b = box;
  if (tta.flip_x) {
    b.cy = -b.cy;
    b.heading = -b.heading;
  }
  if (tta.flip_y) {
    b.cx = -b.cx;
    b.heading = kPi - b.heading;
  }
  const double c = std::cos(tta.rot);
  const double s = std::sin(tta.rot);
  const double x = b.cx, y = b.cy;
  b.cx = c * x - s * y;
  b.cy = s * x + c * y;
  b.heading = wrap_angle(b.heading + tta.rot);
  return b;
}

Box7 deaugment_box(const Box7& box, const TtaTransform& tta) {
  Box7 b = box;
  const double c = std::cos(-tta.rot);
  const double s = std::sin(-tta.rot);
  const double x = b.cx, y = b.cy;
  b.cx = c * x - s * y;
  b.cy = s * x + c * y;
  b.heading = b.heading - tta.rot;
  if (tta.flip_x) {
    b.cy = -b.cy;
    b.heading = -b.heading;
  }
  if (tta.flip_y) {
    b.cx = -b.cx;
    b.heading = kPi - b.heading;
  }
  b.heading = wrap_angle(b.heading);
  return b;
}

// ---------------------------------------------------------------- kd-tree

namespace detail {

CentroidKdTree::CentroidKdTree(std::span<const Box7> boxes) {
  centroids_.reserve(boxes.size());
  for (const auto& b : boxes) centroids_.emplace_back(b.cx, b.cy, b.cz);
  if (centroids_.empty()) return;
  std::vector<int> idx(centroids_.size());
  std::iota(idx.begin(), idx.end(), 0);
  nodes_.reserve(centroids_.size());
  root_ = build(idx, 0, static_cast<int>(idx.size()), 0);
}

int CentroidKdTree::build(std::vector<int>& idx, int lo, int hi, int depth) {
  if (lo >= hi) return -1;
  const int axis = depth % 3;
  const int mid = lo + (hi - lo) / 2;
  std::nth_element(idx.begin() + lo, idx.begin() + mid, idx.begin() + hi,
                   [&](int a, int b) { return centroids_[a][axis] < centroids_[b][axis]; });
  const int node_id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{idx[mid], axis});
  const int left = build(idx, lo, mid, depth + 1);
  const int right = build(idx, mid + 1, hi, depth + 1);
  nodes_[node_id].left = left;
  nodes_[node_id].right = right;
  return node_id;
}

void CentroidKdTree::query_rec(int node, const Eigen::Vector3d& q, double r2,
                               std::vector<int>& out) const {
  if (node < 0) return;
  const Node& n = nodes_[node];
  const Eigen::Vector3d& p = centroids_[n.box_index];
  if ((p - q).squaredNorm() <= r2) out.push_back(n.box_index);
  const double plane = q[n.axis] - p[n.axis];
  if (plane <= 0.0 || plane * plane <= r2) query_rec(n.left, q, r2, out);
  if (plane >= 0.0 || plane * plane <= r2) query_rec(n.right, q, r2, out);
}

std::vector<int> CentroidKdTree::radius_query(const Eigen::Vector3d& query, double radius) const {
  std::vector<int> out;
  query_rec(root_, query, radius * radius, out);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

// ------------------------------------------------------------- clustering

std::vector<std::vector<int>> cluster_proposals(const ProposalSet& props, const FusionConfig& cfg) {
  const auto& boxes = props.boxes;
  std::vector<std::vector<int>> clusters;
  if (boxes.empty()) return clusters;

  std::vector<int> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return box_less_canonical(boxes[a], boxes[b]); });

  detail::CentroidKdTree tree(boxes);
  std::vector<bool> assigned(boxes.size(), false);
  for (int seed : order) {
    if (assigned[seed]) continue;
    const Eigen::Vector3d c(boxes[seed].cx, boxes[seed].cy, boxes[seed].cz);
    std::vector<int> members;
    for (int i : tree.radius_query(c, cfg.match_radius)) {
      if (!assigned[i]) members.push_back(i);
    }
    for (int i : members) assigned[i] = true;
    if (static_cast<int>(members.size()) >= cfg.min_cluster_size) {
      clusters.push_back(std::move(members));
    }
  }
  return clusters;
}

// ------------------------------------------------------------------- kbf

Box7 kbf_fuse_cluster(std::span<const Box7> cluster, const FusionConfig& cfg) {
  if (cluster.empty()) throw std::invalid_argument("kbf_fuse_cluster: empty cluster");

  std::vector<double> weights(cluster.size());
  for (std::size_t i = 0; i < cluster.size(); ++i) weights[i] = cluster[i].score;
  // all-zero scores would make the KDE weights degenerate
  bool any = false;
  for (double w : weights) any = any || w > 0.0;
  if (!any) std::fill(weights.begin(), weights.end(), 1.0);

  auto fuse = [&](auto getter, double bandwidth) {
    WeightedSamples s;
    s.values.reserve(cluster.size());
    for (const auto& b : cluster) s.values.push_back(getter(b));
    s.weights = weights;
    s.bandwidth = bandwidth;
    return weighted_peak_stat(s);
  };

  Box7 out;
  out.cx = fuse([](const Box7& b) { return b.cx; }, cfg.bandwidths.centre);
  out.cy = fuse([](const Box7& b) { return b.cy; }, cfg.bandwidths.centre);
  out.cz = fuse([](const Box7& b) { return b.cz; }, cfg.bandwidths.centre);
  out.l = fuse([](const Box7& b) { return b.l; }, cfg.bandwidths.dims);
  out.w = fuse([](const Box7& b) { return b.w; }, cfg.bandwidths.dims);
  out.h = fuse([](const Box7& b) { return b.h; }, cfg.bandwidths.dims);
  out.score = fuse([](const Box7& b) { return b.score; }, cfg.bandwidths.score);

  // headings are selected, not combined: pick the member whose sin(heading)
  // sits at the density peak and keep its original heading
  WeightedSamples sines;
  sines.values.reserve(cluster.size());
  for (const auto& b : cluster) sines.values.push_back(std::sin(b.heading));
  sines.weights = weights;
  sines.bandwidth = cfg.bandwidths.heading_sin;
  out.heading = cluster[peak_sample(sines).index].heading;

  out.class_id = cluster[0].class_id;
  out.detector_id = kFusedDetectorId;
  out.frame_idx = cluster[0].frame_idx;
  return out;
}

namespace {

std::vector<Box7> kbf_single_pass(const ProposalSet& props, const FusionConfig& cfg) {
  std::vector<Box7> out;
  for (const auto& cluster : cluster_proposals(props, cfg)) {
    std::vector<Box7> members;
    members.reserve(cluster.size());
    for (int i : cluster) members.push_back(props.boxes[i]);
    out.push_back(kbf_fuse_cluster(members, cfg));
  }
  std::sort(out.begin(), out.end(), box_less_canonical);
  return out;
}

}  // namespace

std::vector<Box7> kbf(const ProposalSet& props, const FusionConfig& cfg) {
  if (props.boxes.empty()) return {};
  for (const auto& b : props.boxes) {
    if (b.frame_idx != props.boxes.front().frame_idx)
      throw std::invalid_argument("kbf: proposals span multiple frames");
  }
  if (!cfg.two_stage_tta) return kbf_single_pass(props, cfg);

  // stage 1: fuse each detector's TTA variants (no cluster-size gate),
  // stage 2: fuse the per-detector boxes with the configured gate
  std::vector<int> detector_ids;
  for (const auto& b : props.boxes) detector_ids.push_back(b.detector_id);
  std::sort(detector_ids.begin(), detector_ids.end());
  detector_ids.erase(std::unique(detector_ids.begin(), detector_ids.end()), detector_ids.end());

  FusionConfig stage1 = cfg;
  stage1.min_cluster_size = 1;
  stage1.two_stage_tta = false;
  ProposalSet pooled;
  pooled.source_count = props.source_count;
  for (int det : detector_ids) {
    ProposalSet per_detector;
    for (const auto& b : props.boxes)
      if (b.detector_id == det) per_detector.boxes.push_back(b);
    per_detector.source_count = 1;
    auto fused = kbf_single_pass(per_detector, stage1);
    pooled.boxes.insert(pooled.boxes.end(), fused.begin(), fused.end());
  }
  FusionConfig stage2 = cfg;
  stage2.two_stage_tta = false;
  return kbf_single_pass(pooled, stage2);
}

// ------------------------------------------------------------------- nms

std::vector<Box7> nms(std::span<const Box7> boxes, double iou_threshold) {
  std::vector<int> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return box_less_canonical(boxes[a], boxes[b]); });
  std::vector<Box7> kept;
  for (int i : order) {
    bool suppressed = false;
    for (const auto& k : kept) {
      if (bev_iou(boxes[i], k) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(boxes[i]);
  }
  return kept;
}

// ------------------------------------------------------------------- wbf

namespace {

// scores as weights, uniform when every score is zero
std::vector<double> fusion_weights(std::span<const Box7> cluster) {
  std::vector<double> w;
  w.reserve(cluster.size());
  bool any = false;
  for (const auto& b : cluster) {
    w.push_back(b.score);
    any = any || b.score > 0.0;
  }
  if (!any) std::fill(w.begin(), w.end(), 1.0);
  return w;
}

double weighted_circular_mean(std::span<const Box7> cluster, std::span<const double> weights) {
  double sin_acc = 0.0, cos_acc = 0.0;
  for (std::size_t i = 0; i < cluster.size(); ++i) {
    sin_acc += weights[i] * std::sin(cluster[i].heading);
    cos_acc += weights[i] * std::cos(cluster[i].heading);
  }
  return wrap_angle(std::atan2(sin_acc, cos_acc));
}

constexpr double kMinDim = 1e-6;

}  // namespace

Box7 wbf_corners(std::span<const Box7> cluster) {
  if (cluster.empty()) throw std::invalid_argument("wbf_corners: empty cluster");
  const auto weights = fusion_weights(cluster);
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  Eigen::Vector3d lo = Eigen::Vector3d::Zero();
  Eigen::Vector3d hi = Eigen::Vector3d::Zero();
  double score_acc = 0.0;
  for (std::size_t i = 0; i < cluster.size(); ++i) {
    const Box7& b = cluster[i];
    const double c = std::cos(b.heading);
    const double s = std::sin(b.heading);
    const Eigen::Vector3d corner_lo(b.cx + c * (-0.5 * b.l) - s * (-0.5 * b.w),
                                    b.cy + s * (-0.5 * b.l) + c * (-0.5 * b.w),
                                    b.cz - 0.5 * b.h);
    const Eigen::Vector3d corner_hi(b.cx + c * (0.5 * b.l) - s * (0.5 * b.w),
                                    b.cy + s * (0.5 * b.l) + c * (0.5 * b.w),
                                    b.cz + 0.5 * b.h);
    lo += weights[i] * corner_lo;
    hi += weights[i] * corner_hi;
    score_acc += b.score;
  }
  lo /= wsum;
  hi /= wsum;

  Box7 out;
  out.heading = weighted_circular_mean(cluster, weights);
  const Eigen::Vector3d centre = 0.5 * (lo + hi);
  out.cx = centre.x();
  out.cy = centre.y();
  out.cz = centre.z();
  const Eigen::Vector3d diff = hi - lo;
  const double c = std::cos(out.heading);
  const double s = std::sin(out.heading);
  out.l = std::max(std::fabs(c * diff.x() + s * diff.y()), kMinDim);
  out.w = std::max(std::fabs(-s * diff.x() + c * diff.y()), kMinDim);
  out.h = std::max(std::fabs(diff.z()), kMinDim);
  out.score = score_acc / static_cast<double>(cluster.size());
  out.class_id = cluster[0].class_id;
  out.detector_id = kFusedDetectorId;
  out.frame_idx = cluster[0].frame_idx;
  return out;
}

Box7 wbf_params(std::span<const Box7> cluster) {
  if (cluster.empty()) throw std::invalid_argument("wbf_params: empty cluster");
  const auto weights = fusion_weights(cluster);
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  Box7 out;
  double cx = 0, cy = 0, cz = 0, l = 0, w = 0, h = 0, score = 0;
  for (std::size_t i = 0; i < cluster.size(); ++i) {
    const Box7& b = cluster[i];
    const double wt = weights[i];
    cx += wt * b.cx;
    cy += wt * b.cy;
    cz += wt * b.cz;
    l += wt * b.l;
    w += wt * b.w;
    h += wt * b.h;
    score += wt * b.score;
  }
  out.cx = cx / wsum;
  out.cy = cy / wsum;
  out.cz = cz / wsum;
  out.l = std::max(l / wsum, kMinDim);
  out.w = std::max(w / wsum, kMinDim);
  out.h = std::max(h / wsum, kMinDim);
  out.score = score / wsum;
  out.heading = weighted_circular_mean(cluster, weights);
  out.class_id = cluster[0].class_id;
  out.detector_id = kFusedDetectorId;
  out.frame_idx = cluster[0].frame_idx;
  return out;
}

}  // namespace pseudofuse

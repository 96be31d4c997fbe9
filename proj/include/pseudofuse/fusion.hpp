#pragma once

#include "pseudofuse/geometry.hpp"

#include <span>
#include <vector>

namespace pseudofuse {

/// Test-time augmentation applied to the point cloud a box was predicted on:
/// optional flips about the x/y axes followed by a world rotation.
struct TtaTransform {
  bool flip_x = false;
  bool flip_y = false;
  double rot = 0.0;
};

struct Bandwidths {
  double centre = 1.0;
  double dims = 0.1;
  double heading_sin = 0.1;
  double score = 0.1;
};

struct FusionConfig {
  double match_radius = 2.0;
  int min_cluster_size = 4;
  Bandwidths bandwidths;
  /// When true, fuse each detector's TTA variants first and then fuse the
  /// per-detector results; default pools all proposals into one pass.
  bool two_stage_tta = false;
};

/// All proposals of one frame in a common coordinate frame.
struct ProposalSet {
  std::vector<Box7> boxes;
  int source_count = 0;
};

/// Forward augmentation: flips applied first, then the world rotation.
Box7 augment_box(const Box7& box, const TtaTransform& tta);

/// Inverse of augment_box: un-rotate, then un-flip, renormalize heading.
Box7 deaugment_box(const Box7& box, const TtaTransform& tta);

/// Greedy radius clustering seeded from the highest-score unassigned box.
/// Clusters smaller than min_cluster_size are discarded. Each returned
/// cluster is a list of box indices; no box appears twice.
std::vector<std::vector<int>> cluster_proposals(const ProposalSet& props, const FusionConfig& cfg);

/// Fuse one cluster: centre, dims and score via the weighted KDE peak with
/// per-parameter bandwidths; heading by selecting the member whose
/// sin(heading) has the highest density. Weights are the member scores.
Box7 kbf_fuse_cluster(std::span<const Box7> cluster, const FusionConfig& cfg);

/// cluster_proposals + kbf_fuse_cluster per surviving cluster, sorted by
/// descending score.
std::vector<Box7> kbf(const ProposalSet& props, const FusionConfig& cfg);

/// Greedy NMS by descending score using BEV IoU; a box is suppressed when
/// its IoU with an already-kept box exceeds iou_threshold.
std::vector<Box7> nms(std::span<const Box7> boxes, double iou_threshold);

/// Score-weighted average of the two opposite 3D corners, with heading from
/// the weighted circular mean and score from the plain mean.
Box7 wbf_corners(std::span<const Box7> cluster);

/// Score-weighted arithmetic mean of every parameter; heading via the
/// weighted circular mean.
Box7 wbf_params(std::span<const Box7> cluster);

namespace detail {
/// Indices of all centroids within `radius` of `query` (3D Euclidean).
/// Exposed for testing against brute force.
class CentroidKdTree {
 public:
  explicit CentroidKdTree(std::span<const Box7> boxes);
  std::vector<int> radius_query(const Eigen::Vector3d& query, double radius) const;

 private:
  struct Node {
    int box_index;
    int axis;
    int left = -1;
    int right = -1;
  };
  int build(std::vector<int>& idx, int lo, int hi, int depth);
  void query_rec(int node, const Eigen::Vector3d& q, double r2, std::vector<int>& out) const;

  std::vector<Eigen::Vector3d> centroids_;
  std::vector<Node> nodes_;
  int root_ = -1;
};
}  // namespace detail

}  // namespace pseudofuse

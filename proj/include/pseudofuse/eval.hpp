#pragma once

#include "pseudofuse/geometry.hpp"

#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace pseudofuse {

enum class IouMode { Bev, ThreeD };

const char* iou_mode_name(IouMode m);

struct EvalConfig {
  std::vector<double> iou_thresholds{0.7, 0.5};
  std::vector<IouMode> modes{IouMode::Bev, IouMode::ThreeD};
  int recall_positions = 40;
  /// [lo, hi) bins by BEV centroid distance from the ego origin.
  std::vector<std::pair<double, double>> range_bins{
      {0.0, 30.0}, {30.0, 50.0}, {50.0, std::numeric_limits<double>::infinity()}};
};

struct ApEntry {
  IouMode mode = IouMode::ThreeD;
  double iou_threshold = 0.7;
  double overall = 0.0;
  std::vector<double> per_bin;
};

struct ApResult {
  std::vector<ApEntry> entries;  // one per (mode, threshold), config order
  int recall_positions = 40;
  std::vector<std::pair<double, double>> range_bins;

  /// Entry lookup; throws when the (mode, threshold) pair was not evaluated.
  const ApEntry& at(IouMode mode, double iou_threshold) const;
};

/// R40-style AP: greedy per-frame matching by descending score (each ground
/// truth matched at most once), precision interpolated at recall_positions
/// evenly spaced recall points. Boxes must be in ego coordinates; range bins
/// filter predictions and ground truth by their own centroid range.
ApResult evaluate_ap(const std::vector<std::vector<Box7>>& predictions,
                     const std::vector<std::vector<Box7>>& ground_truth, const EvalConfig& cfg);

/// Human-readable comparison table, one row per method.
std::string benchmark_report_text(const std::map<std::string, ApResult>& results);

/// One JSON record per (method, mode, threshold) line.
std::string benchmark_report_jsonl(const std::map<std::string, ApResult>& results);

}  // namespace pseudofuse

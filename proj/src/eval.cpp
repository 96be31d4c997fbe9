#include "pseudofuse/eval.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace pseudofuse {

const char* iou_mode_name(IouMode m) { return m == IouMode::Bev ? "bev" : "3d"; }

const ApEntry& ApResult::at(IouMode mode, double iou_threshold) const {
  for (const auto& e : entries) {
    if (e.mode == mode && std::fabs(e.iou_threshold - iou_threshold) < 1e-12) return e;
  }
  throw std::out_of_range("ApResult: no entry for requested mode/threshold");
}

namespace {

double bev_range(const Box7& b) { return std::hypot(b.cx, b.cy); }

struct FrameMatchInput {
  std::vector<int> pred_idx;  // ordered by score desc, then input index
  std::vector<int> gt_idx;
};

struct ScoredFlag {
  double score;
  int frame;
  int index;
  bool tp;
};

// Greedy matching of one frame at one threshold; appends (score, tp) flags.
void match_frame(const std::vector<Box7>& preds, const std::vector<double>& ious, std::size_t n_gt,
                 const std::vector<int>& pred_order, const std::vector<int>& gt_subset,
                 double threshold, int frame, std::vector<ScoredFlag>& out) {
  std::vector<bool> gt_taken(gt_subset.size(), false);
  for (int pi : pred_order) {
    double best_iou = 0.0;
    int best_gt = -1;
    for (std::size_t g = 0; g < gt_subset.size(); ++g) {
      if (gt_taken[g]) continue;
      const double iou = ious[static_cast<std::size_t>(pi) * n_gt + gt_subset[g]];
      if (iou >= threshold && iou > best_iou) {
        best_iou = iou;
        best_gt = static_cast<int>(g);
      }
    }
    if (best_gt >= 0) gt_taken[best_gt] = true;
    out.push_back(ScoredFlag{preds[pi].score, frame, pi, best_gt >= 0});
  }
}

double ap_from_flags(std::vector<ScoredFlag>& flags, std::size_t total_gt, int recall_positions) {
  if (total_gt == 0) return 0.0;
  std::sort(flags.begin(), flags.end(), [](const ScoredFlag& a, const ScoredFlag& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.frame != b.frame) return a.frame < b.frame;
    return a.index < b.index;
  });
  std::vector<double> recall(flags.size()), precision(flags.size());
  int tp = 0;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (flags[i].tp) ++tp;
    recall[i] = static_cast<double>(tp) / static_cast<double>(total_gt);
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  // max precision over all points with recall >= r, scanning from the back
  std::vector<double> max_prec_from(flags.size() + 1, 0.0);
  for (std::size_t i = flags.size(); i-- > 0;)
    max_prec_from[i] = std::max(max_prec_from[i + 1], precision[i]);

  double acc = 0.0;
  for (int k = 1; k <= recall_positions; ++k) {
    const double r = static_cast<double>(k) / static_cast<double>(recall_positions);
    // first operating point reaching recall r
    std::size_t lo = 0, hi = flags.size();
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (recall[mid] >= r - 1e-15)
        hi = mid;
      else
        lo = mid + 1;
    }
    acc += (lo < flags.size()) ? max_prec_from[lo] : 0.0;
  }
  return acc / static_cast<double>(recall_positions);
}

}  // namespace

ApResult evaluate_ap(const std::vector<std::vector<Box7>>& predictions,
                     const std::vector<std::vector<Box7>>& ground_truth, const EvalConfig& cfg) {
  if (predictions.size() != ground_truth.size())
    throw std::invalid_argument("evaluate_ap: prediction/ground-truth frame count mismatch");
  if (cfg.recall_positions < 1) throw std::invalid_argument("evaluate_ap: recall_positions < 1");

  const std::size_t n_frames = predictions.size();

  // per-frame prediction order by descending score
  std::vector<std::vector<int>> pred_order(n_frames);
  for (std::size_t f = 0; f < n_frames; ++f) {
    pred_order[f].resize(predictions[f].size());
    std::iota(pred_order[f].begin(), pred_order[f].end(), 0);
    std::stable_sort(pred_order[f].begin(), pred_order[f].end(), [&](int a, int b) {
      return predictions[f][a].score > predictions[f][b].score;
    });
  }

  ApResult result;
  result.recall_positions = cfg.recall_positions;
  result.range_bins = cfg.range_bins;

  for (IouMode mode : cfg.modes) {
    // IoU matrices reused across thresholds and bins
    std::vector<std::vector<double>> ious(n_frames);
    for (std::size_t f = 0; f < n_frames; ++f) {
      const auto& preds = predictions[f];
      const auto& gts = ground_truth[f];
      ious[f].assign(preds.size() * gts.size(), 0.0);
      for (std::size_t p = 0; p < preds.size(); ++p)
        for (std::size_t g = 0; g < gts.size(); ++g)
          ious[f][p * gts.size() + g] =
              mode == IouMode::Bev ? bev_iou(preds[p], gts[g]) : iou_3d(preds[p], gts[g]);
    }

    auto evaluate_subset = [&](double threshold, double range_lo, double range_hi) {
      std::vector<ScoredFlag> flags;
      std::size_t total_gt = 0;
      for (std::size_t f = 0; f < n_frames; ++f) {
        const auto& preds = predictions[f];
        const auto& gts = ground_truth[f];
        std::vector<int> order;
        for (int pi : pred_order[f]) {
          const double r = bev_range(preds[pi]);
          if (r >= range_lo && r < range_hi) order.push_back(pi);
        }
        std::vector<int> gt_subset;
        for (std::size_t g = 0; g < gts.size(); ++g) {
          const double r = bev_range(gts[g]);
          if (r >= range_lo && r < range_hi) gt_subset.push_back(static_cast<int>(g));
        }
        total_gt += gt_subset.size();
        match_frame(preds, ious[f], gts.size(), order, gt_subset, threshold,
                    static_cast<int>(f), flags);
      }
      return ap_from_flags(flags, total_gt, cfg.recall_positions);
    };

    for (double threshold : cfg.iou_thresholds) {
      ApEntry entry;
      entry.mode = mode;
      entry.iou_threshold = threshold;
      entry.overall = evaluate_subset(threshold, 0.0, std::numeric_limits<double>::infinity());
      for (const auto& [lo, hi] : cfg.range_bins) entry.per_bin.push_back(evaluate_subset(threshold, lo, hi));
      result.entries.push_back(std::move(entry));
    }
  }
  return result;
}

namespace {

std::string format_bin(const std::pair<double, double>& bin) {
  char buf[64];
  if (std::isinf(bin.second))
    std::snprintf(buf, sizeof buf, "[%g,inf)", bin.first);
  else
    std::snprintf(buf, sizeof buf, "[%g,%g)", bin.first, bin.second);
  return buf;
}

}  // namespace

std::string benchmark_report_text(const std::map<std::string, ApResult>& results) {
  if (results.empty()) throw std::invalid_argument("benchmark_report: no results");
  const ApResult& ref = results.begin()->second;

  std::ostringstream os;
  os << "AP (R40, " << ref.recall_positions << " recall positions);"
     << " range bins by BEV centroid range\n";
  os << "method";
  for (const auto& e : ref.entries) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "  %s@%.2f", iou_mode_name(e.mode), e.iou_threshold);
    os << buf;
  }
  if (!ref.entries.empty()) {
    for (const auto& bin : ref.range_bins)
      os << "  " << format_bin(bin);
    char buf[64];
    const auto& e0 = ref.entries.front();
    std::snprintf(buf, sizeof buf, " (%s@%.2f)", iou_mode_name(e0.mode), e0.iou_threshold);
    os << buf;
  }
  os << "\n";
  for (const auto& [method, res] : results) {
    os << method;
    char buf[64];
    for (const auto& e : res.entries) {
      std::snprintf(buf, sizeof buf, "  %.4f", e.overall);
      os << buf;
    }
    if (!res.entries.empty()) {
      for (double ap : res.entries.front().per_bin) {
        std::snprintf(buf, sizeof buf, "  %.4f", ap);
        os << buf;
      }
    }
    os << "\n";
  }
  return os.str();
}

std::string benchmark_report_jsonl(const std::map<std::string, ApResult>& results) {
  if (results.empty()) throw std::invalid_argument("benchmark_report: no results");
  std::ostringstream os;
  for (const auto& [method, res] : results) {
    for (const auto& e : res.entries) {
      nlohmann::json rec;
      rec["method"] = method;
      rec["mode"] = iou_mode_name(e.mode);
      rec["iou"] = e.iou_threshold;
      rec["ap"] = e.overall;
      rec["recall_positions"] = res.recall_positions;
      nlohmann::json bins = nlohmann::json::array();
      for (std::size_t i = 0; i < e.per_bin.size(); ++i) {
        nlohmann::json b;
        b["lo"] = res.range_bins[i].first;
        b["hi"] = std::isinf(res.range_bins[i].second) ? -1.0 : res.range_bins[i].second;
        b["ap"] = e.per_bin[i];
        bins.push_back(b);
      }
      rec["bins"] = bins;
      os << rec.dump() << "\n";
    }
  }
  return os.str();
}

}  // namespace pseudofuse

#pragma once

// Mask-level average precision, IoU utilities and the margin-vs-size analysis.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "embseg/clustering.hpp"
#include "embseg/heads.hpp"
#include "embseg/labels.hpp"

namespace embseg {

struct MatchSpec {
  /// IoU thresholds, strictly increasing in (0, 1). Default 0.50:0.05:0.95.
  std::vector<double> thresholds = default_thresholds();

  static std::vector<double> default_thresholds();
  void validate() const;
};

struct EvalReport {
  /// Mean over evaluated classes of the mean over thresholds.
  double ap = 0.0;
  double ap50 = 0.0;
  std::map<int, double> per_class_ap;
  std::map<int, double> per_class_ap50;
  /// Class-averaged AP at each threshold of the spec.
  std::vector<double> ap_per_threshold;
  int num_predictions = 0;
  int num_truths = 0;
};

/// |a & b| / |a | b|; throws when both masks are empty.
double mask_iou(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

/// Greedy confidence-ordered one-to-one matching per class and threshold,
/// all-point interpolated area under the precision-recall curve. Precision and
/// recall are sampled once per distinct confidence value, so the result does
/// not depend on the order of equally confident predictions.
EvalReport average_precision(std::span<const ClusterResult> predictions, std::span<const InstanceLabelMap> truths,
                             const MatchSpec& spec = {});

/// Truth instances whose pixel count lies in [min_pixels, max_pixels).
struct SizeRange {
  std::size_t min_pixels = 0;
  std::size_t max_pixels = static_cast<std::size_t>(-1);
  bool contains(std::size_t px) const noexcept { return px >= min_pixels && px < max_pixels; }
};

/// Oracle-center clustering of every output, confidence 1.0, then average
/// precision. With `subset`, only truths in the size range (and the
/// predictions made from their centers) are scored.
EvalReport ap_gt(std::span<const ModelOutput> outputs, std::span<const InstanceLabelMap> truths,
                 const MatchSpec& spec = {}, std::optional<double> fixed_sigma = std::nullopt,
                 std::optional<SizeRange> subset = std::nullopt);

/// Scores oracle-clustered predictions (truth_id set) against a size subset.
EvalReport ap_gt_from_clusters(std::span<const ClusterResult> oracle_predictions,
                               std::span<const InstanceLabelMap> truths, const MatchSpec& spec,
                               std::optional<SizeRange> subset);

struct MarginSizePair {
  std::size_t size_px = 0;
  /// Margin of the instance's mean sigma, in pixels (axis mean when elliptical).
  double margin_px = 0.0;
};

struct MarginSizeCorrelation {
  std::vector<MarginSizePair> pairs;
  double spearman = 0.0;
};

/// Spearman rank correlation with average ranks for ties; 0 when either
/// variable is constant.
double spearman_correlation(std::span<const double> x, std::span<const double> y);

/// One (size, margin) pair per true instance; throws with fewer than 3 instances.
MarginSizeCorrelation margin_size_correlation(std::span<const ModelOutput> outputs,
                                              std::span<const InstanceLabelMap> truths);

}  // namespace embseg

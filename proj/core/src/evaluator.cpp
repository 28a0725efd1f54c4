#include "embseg/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

namespace embseg {

std::vector<double> MatchSpec::default_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back(0.5 + 0.05 * i);
  return t;
}

void MatchSpec::validate() const {
  if (thresholds.empty()) throw ConfigError("match spec needs at least one IoU threshold");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > 0.0 && thresholds[i] < 1.0)) throw ConfigError("IoU thresholds must lie in (0, 1)");
    if (i > 0 && !(thresholds[i] > thresholds[i - 1])) throw ConfigError("IoU thresholds must be strictly increasing");
  }
}

double mask_iou(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) throw ConfigError("mask_iou: masks differ in size");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] != 0;
    const bool y = b[i] != 0;
    inter += (x && y) ? 1 : 0;
    uni += (x || y) ? 1 : 0;
  }
  if (uni == 0) throw ConfigError("mask_iou: both masks are empty");
  return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

struct PredRef {
  std::size_t scene;
  std::size_t index;
  double confidence;
};

// IoU of every prediction in a scene against every truth of the scene.
std::vector<std::vector<double>> scene_ious(const ClusterResult& pred, const InstanceLabelMap& truth) {
  const auto& lab = truth.labels();
  const int k = truth.num_instances();
  std::vector<std::vector<double>> out;
  out.reserve(pred.instances.size());
  for (const auto& inst : pred.instances) {
    std::vector<std::size_t> inter(static_cast<std::size_t>(k) + 1, 0);
    for (auto px : inst.pixels) ++inter[static_cast<std::size_t>(lab[px])];
    std::vector<double> row(static_cast<std::size_t>(k), 0.0);
    for (int t = 1; t <= k; ++t) {
      const auto i = inter[static_cast<std::size_t>(t)];
      const auto u = inst.pixels.size() + truth.instance_size(t) - i;
      row[static_cast<std::size_t>(t - 1)] = static_cast<double>(i) / static_cast<double>(u);
    }
    out.push_back(std::move(row));
  }
  return out;
}

double class_ap_at(const std::vector<PredRef>& ranked, const std::vector<std::vector<std::vector<double>>>& ious,
                   std::span<const InstanceLabelMap> truths, int cls,
                   std::size_t num_gt, double threshold) {
  if (num_gt == 0) return 0.0;
  std::vector<std::vector<char>> taken(truths.size());
  for (std::size_t s = 0; s < truths.size(); ++s) taken[s].assign(static_cast<std::size_t>(truths[s].num_instances()), 0);

  std::vector<double> recall;
  std::vector<double> precision;
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t j = 0; j < ranked.size(); ++j) {
    const auto& p = ranked[j];
    const auto& row = ious[p.scene][p.index];
    const auto& truth = truths[p.scene];
    int best = -1;
    double best_iou = threshold;
    for (int t = 1; t <= truth.num_instances(); ++t) {
      if (truth.class_of(t) != cls || taken[p.scene][static_cast<std::size_t>(t - 1)]) continue;
      const double iou = row[static_cast<std::size_t>(t - 1)];
      if (iou >= best_iou && (best < 0 || iou > best_iou)) {
        best = t;
        best_iou = iou;
      }
    }
    if (best > 0) {
      taken[p.scene][static_cast<std::size_t>(best - 1)] = 1;
      ++tp;
    } else {
      ++fp;
    }
    const bool group_end = j + 1 == ranked.size() || ranked[j + 1].confidence != p.confidence;
    if (group_end) {
      recall.push_back(static_cast<double>(tp) / static_cast<double>(num_gt));
      precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    }
  }
  // Precision envelope, then step integration over recall.
  for (std::size_t j = precision.size(); j-- > 1;) precision[j - 1] = std::max(precision[j - 1], precision[j]);
  double ap = 0.0;
  double prev_r = 0.0;
  for (std::size_t j = 0; j < recall.size(); ++j) {
    ap += (recall[j] - prev_r) * precision[j];
    prev_r = recall[j];
  }
  return ap;
}

}  // namespace

EvalReport average_precision(std::span<const ClusterResult> predictions, std::span<const InstanceLabelMap> truths,
                             const MatchSpec& spec) {
  spec.validate();
  if (predictions.size() != truths.size()) throw DataError("average_precision: prediction and truth lists differ in length");

  std::set<int> classes;
  std::map<int, std::size_t> gt_count;
  std::map<int, std::vector<PredRef>> by_class;
  std::vector<std::vector<std::vector<double>>> ious(truths.size());
  EvalReport report;
  for (std::size_t s = 0; s < truths.size(); ++s) {
    if (predictions[s].shape != truths[s].shape()) throw DataError("average_precision: scene " + std::to_string(s) + " shape mismatch");
    for (int t = 1; t <= truths[s].num_instances(); ++t) {
      classes.insert(truths[s].class_of(t));
      ++gt_count[truths[s].class_of(t)];
      ++report.num_truths;
    }
    for (std::size_t i = 0; i < predictions[s].instances.size(); ++i) {
      const auto& inst = predictions[s].instances[i];
      classes.insert(inst.class_id);
      by_class[inst.class_id].push_back({s, i, inst.confidence});
      ++report.num_predictions;
    }
    ious[s] = scene_ious(predictions[s], truths[s]);
  }

  report.ap_per_threshold.assign(spec.thresholds.size(), 0.0);
  if (classes.empty()) return report;
  for (int cls : classes) {
    auto& ranked = by_class[cls];
    std::stable_sort(ranked.begin(), ranked.end(), [](const PredRef& a, const PredRef& b) {
      if (a.confidence != b.confidence) return a.confidence > b.confidence;
      if (a.scene != b.scene) return a.scene < b.scene;
      return a.index < b.index;
    });
    const std::size_t ngt = gt_count[cls];
    double sum = 0.0;
    for (std::size_t t = 0; t < spec.thresholds.size(); ++t) {
      const double ap_t = class_ap_at(ranked, ious, truths, cls, ngt, spec.thresholds[t]);
      report.ap_per_threshold[t] += ap_t / static_cast<double>(classes.size());
      sum += ap_t;
    }
    report.per_class_ap[cls] = sum / static_cast<double>(spec.thresholds.size());
    report.per_class_ap50[cls] = class_ap_at(ranked, ious, truths, cls, ngt, 0.5);
  }
  for (const auto& [cls, v] : report.per_class_ap) report.ap += v / static_cast<double>(classes.size());
  for (const auto& [cls, v] : report.per_class_ap50) report.ap50 += v / static_cast<double>(classes.size());
  return report;
}

EvalReport ap_gt_from_clusters(std::span<const ClusterResult> oracle_predictions,
                               std::span<const InstanceLabelMap> truths, const MatchSpec& spec,
                               std::optional<SizeRange> subset) {
  if (!subset) return average_precision(oracle_predictions, truths, spec);
  if (oracle_predictions.size() != truths.size()) throw DataError("ap_gt: prediction and truth lists differ in length");
  std::vector<ClusterResult> preds;
  std::vector<InstanceLabelMap> kept;
  for (std::size_t s = 0; s < truths.size(); ++s) {
    const auto& truth = truths[s];
    // Keep selected truths, renumbered 1..K' in original order.
    std::vector<std::int32_t> new_id(static_cast<std::size_t>(truth.num_instances()) + 1, 0);
    std::vector<int> classes;
    for (int t = 1; t <= truth.num_instances(); ++t) {
      if (subset->contains(truth.instance_size(t))) {
        classes.push_back(truth.class_of(t));
        new_id[static_cast<std::size_t>(t)] = static_cast<std::int32_t>(classes.size());
      }
    }
    std::vector<std::int32_t> labels(truth.labels().size());
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = new_id[static_cast<std::size_t>(truth.labels()[i])];
    kept.emplace_back(truth.shape(), std::move(labels), std::move(classes));

    ClusterResult filtered;
    filtered.shape = oracle_predictions[s].shape;
    for (const auto& inst : oracle_predictions[s].instances) {
      if (inst.truth_id <= 0 || inst.truth_id > truth.num_instances()) {
        throw DataError("ap_gt: subset scoring needs oracle predictions with truth ids");
      }
      if (new_id[static_cast<std::size_t>(inst.truth_id)] == 0) continue;
      auto copy = inst;
      copy.id = static_cast<int>(filtered.instances.size()) + 1;
      filtered.instances.push_back(std::move(copy));
    }
    flatten_instances(filtered);
    preds.push_back(std::move(filtered));
  }
  return average_precision(preds, kept, spec);
}

EvalReport ap_gt(std::span<const ModelOutput> outputs, std::span<const InstanceLabelMap> truths, const MatchSpec& spec,
                 std::optional<double> fixed_sigma, std::optional<SizeRange> subset) {
  if (outputs.size() != truths.size()) throw DataError("ap_gt: output and truth lists differ in length");
  std::vector<ClusterResult> preds;
  preds.reserve(outputs.size());
  for (std::size_t s = 0; s < outputs.size(); ++s) {
    preds.push_back(cluster_with_oracle_centers(outputs[s], truths[s], fixed_sigma));
  }
  return ap_gt_from_clusters(preds, truths, spec, subset);
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
    i = j + 1;
  }
  return rank;
}

}  // namespace

double spearman_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ConfigError("spearman_correlation: lengths differ");
  if (x.size() < 3) throw ConfigError("spearman_correlation: needs at least 3 samples");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

MarginSizeCorrelation margin_size_correlation(std::span<const ModelOutput> outputs,
                                              std::span<const InstanceLabelMap> truths) {
  if (outputs.size() != truths.size()) throw DataError("margin_size_correlation: list lengths differ");
  MarginSizeCorrelation out;
  for (std::size_t s = 0; s < outputs.size(); ++s) {
    const auto& o = outputs[s];
    const int h = o.shape().height;
    for (const auto& members : truths[s].members()) {
      double margin = 0.0;
      for (int ch = 0; ch < o.sigma_channels(); ++ch) {
        double acc = 0.0;
        for (auto i : members) acc += o.sigmas.channel(ch)[i];
        margin += margin_of(acc / static_cast<double>(members.size()));
      }
      margin /= o.sigma_channels();
      out.pairs.push_back({members.size(), normalized_to_pixels(margin, h)});
    }
  }
  if (out.pairs.size() < 3) throw DataError("margin_size_correlation: needs at least 3 instances");
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& p : out.pairs) {
    xs.push_back(static_cast<double>(p.size_px));
    ys.push_back(p.margin_px);
  }
  out.spearman = spearman_correlation(xs, ys);
  return out;
}

}  // namespace embseg

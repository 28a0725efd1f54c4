#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "embseg/errors.hpp"
#include "embseg/evaluator.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace embseg;

namespace {

ClusterResult as_prediction(const InstanceLabelMap& map, const std::vector<double>& confidences) {
  ClusterResult r;
  r.shape = map.shape();
  r.instance_map = map.labels();
  for (int k = 1; k <= map.num_instances(); ++k) {
    ClusteredInstance inst;
    inst.id = k;
    inst.class_id = map.class_of(k);
    inst.confidence = confidences[static_cast<std::size_t>(k - 1)];
    inst.pixels = map.members()[static_cast<std::size_t>(k - 1)];
    r.instances.push_back(std::move(inst));
  }
  return r;
}

InstanceLabelMap row_strip(int width, int c0, int c1) {
  std::vector<std::int32_t> raw(static_cast<std::size_t>(width), 0);
  for (int c = c0; c < c1; ++c) raw[static_cast<std::size_t>(c)] = 1;
  return InstanceLabelMap({1, width}, raw, {0});
}

}  // namespace

TEST(MaskIou, Examples) {
  const std::vector<std::uint8_t> a{1, 1, 0, 0}, b{0, 1, 1, 0}, e{0, 0, 0, 0};
  EXPECT_DOUBLE_EQ(mask_iou(a, b), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(mask_iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(mask_iou(a, e), 0.0);
  EXPECT_THROW(mask_iou(e, e), ConfigError);
  EXPECT_THROW(mask_iou(a, std::vector<std::uint8_t>{1}), ConfigError);
}

TEST(AveragePrecision, SingleMatchAtIou06) {
  // truth covers 10 pixels, prediction 6 of them: IoU 0.6
  const auto truth = row_strip(10, 0, 10);
  const auto pred = as_prediction(row_strip(10, 0, 6), {0.9});
  const auto r = average_precision(std::vector{pred}, std::vector{truth});
  EXPECT_NEAR(r.ap, 0.3, 1e-12);
  EXPECT_NEAR(r.ap50, 1.0, 1e-12);
  ASSERT_EQ(r.ap_per_threshold.size(), 10u);
  EXPECT_DOUBLE_EQ(r.ap_per_threshold[2], 1.0);
  EXPECT_DOUBLE_EQ(r.ap_per_threshold[3], 0.0);
}

TEST(AveragePrecision, PerfectPredictionScoresOne) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    const auto truth = fixtures::random_label_map({16, 16}, 5, 2, rng);
    if (truth.num_instances() == 0) continue;
    std::vector<double> conf(static_cast<std::size_t>(truth.num_instances()), 0.5);
    const auto r = average_precision(std::vector{as_prediction(truth, conf)}, std::vector{truth});
    EXPECT_DOUBLE_EQ(r.ap, 1.0);
    EXPECT_DOUBLE_EQ(r.ap50, 1.0);
  }
}

TEST(AveragePrecision, NoPredictionsScoreZero) {
  const auto truth = row_strip(10, 2, 5);
  ClusterResult empty;
  empty.shape = truth.shape();
  empty.instance_map.assign(10, 0);
  const auto r = average_precision(std::vector{empty}, std::vector{truth});
  EXPECT_EQ(r.ap, 0.0);
  EXPECT_EQ(r.num_truths, 1);
}

TEST(AveragePrecision, FalsePositiveBelowTruePositiveHalvesNothing) {
  // true positive ranked first keeps precision 1 up to full recall
  const auto truth = row_strip(10, 0, 4);
  auto pred = as_prediction(row_strip(10, 0, 4), {0.9});
  ClusteredInstance fp;
  fp.id = 2;
  fp.confidence = 0.1;
  fp.pixels = {6, 7, 8};
  pred.instances.push_back(fp);
  EXPECT_DOUBLE_EQ(average_precision(std::vector{pred}, std::vector{truth}).ap, 1.0);
  pred.instances[1].confidence = 0.95;
  EXPECT_DOUBLE_EQ(average_precision(std::vector{pred}, std::vector{truth}).ap, 0.5);
}

TEST(AveragePrecision, MatchesExhaustiveReference) {
  std::mt19937_64 rng(41);
  const MatchSpec spec;
  for (int trial = 0; trial < 500; ++trial) {
    const int scenes = fixtures::integer(rng, 1, 3);
    const GridShape shape{fixtures::integer(rng, 4, 16), fixtures::integer(rng, 4, 16)};
    std::vector<ClusterResult> preds;
    std::vector<InstanceLabelMap> truths;
    for (int s = 0; s < scenes; ++s) {
      truths.push_back(fixtures::random_label_map(shape, 4, 2, rng));
      const auto p = fixtures::random_label_map(shape, 4, 2, rng);
      std::vector<double> conf;
      for (int k = 0; k < p.num_instances(); ++k) conf.push_back(fixtures::integer(rng, 1, 4) / 4.0);
      preds.push_back(as_prediction(p, conf));
    }
    const auto got = average_precision(preds, truths, spec);
    const auto want = oracle::exhaustive_average_precision(preds, truths, spec);
    EXPECT_NEAR(got.ap, want.ap, 1e-12) << "trial " << trial;
    EXPECT_NEAR(got.ap50, want.ap50, 1e-12) << "trial " << trial;
  }
}

TEST(AveragePrecision, InvariantToOrderOfEquallyConfidentPredictions) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 50; ++trial) {
    const auto truth = fixtures::random_label_map({12, 12}, 5, 1, rng);
    const auto p = fixtures::random_label_map({12, 12}, 5, 1, rng);
    std::vector<double> conf;
    for (int k = 0; k < p.num_instances(); ++k) conf.push_back(fixtures::integer(rng, 1, 2) / 2.0);
    auto a = as_prediction(p, conf);
    auto b = a;
    std::reverse(b.instances.begin(), b.instances.end());
    const auto ra = average_precision(std::vector{a}, std::vector{truth});
    const auto rb = average_precision(std::vector{b}, std::vector{truth});
    EXPECT_DOUBLE_EQ(ra.ap, rb.ap);
    EXPECT_DOUBLE_EQ(ra.ap50, rb.ap50);
  }
}

TEST(AveragePrecision, RejectsMismatchedInputs) {
  const auto truth = row_strip(10, 0, 4);
  EXPECT_THROW(average_precision(std::vector<ClusterResult>{}, std::vector{truth}), DataError);
  auto pred = as_prediction(row_strip(8, 0, 4), {1.0});
  EXPECT_THROW(average_precision(std::vector{pred}, std::vector{truth}), DataError);
  MatchSpec bad;
  bad.thresholds = {0.7, 0.5};
  EXPECT_THROW(bad.validate(), ConfigError);
  bad.thresholds = {1.0};
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(ApGt, SubsetKeepsOnlyMatchingTruths) {
  // one 4-pixel and one 12-pixel instance; perfect oracle prediction of the
  // small one, nothing useful for the large one
  std::vector<std::int32_t> raw(20, 0);
  for (int c = 0; c < 4; ++c) raw[static_cast<std::size_t>(c)] = 1;
  for (int c = 8; c < 20; ++c) raw[static_cast<std::size_t>(c)] = 2;
  const InstanceLabelMap truth({1, 20}, raw, {0, 0});
  ClusterResult pred;
  pred.shape = truth.shape();
  pred.instance_map.assign(20, 0);
  ClusteredInstance a;
  a.id = 1;
  a.confidence = 1.0;
  a.truth_id = 1;
  a.pixels = {0, 1, 2, 3};
  ClusteredInstance b = a;
  b.id = 2;
  b.truth_id = 2;
  b.pixels = {8};
  pred.instances = {a, b};
  const MatchSpec spec;
  EXPECT_DOUBLE_EQ(ap_gt_from_clusters(std::vector{pred}, std::vector{truth}, spec, SizeRange{0, 10}).ap, 1.0);
  EXPECT_DOUBLE_EQ(ap_gt_from_clusters(std::vector{pred}, std::vector{truth}, spec, SizeRange{10}).ap, 0.0);
  EXPECT_DOUBLE_EQ(ap_gt_from_clusters(std::vector{pred}, std::vector{truth}, spec, std::nullopt).ap, 0.25);
  pred.instances[0].truth_id = 0;
  EXPECT_THROW(ap_gt_from_clusters(std::vector{pred}, std::vector{truth}, spec, SizeRange{0, 10}), DataError);
}

TEST(Spearman, Examples) {
  const std::vector<double> x{1, 2, 3, 4}, up{10, 20, 30, 40}, down{4, 3, 2, 1}, flat{5, 5, 5, 5};
  EXPECT_DOUBLE_EQ(spearman_correlation(x, up), 1.0);
  EXPECT_DOUBLE_EQ(spearman_correlation(x, down), -1.0);
  EXPECT_EQ(spearman_correlation(x, flat), 0.0);
  // ties take average ranks: ranks of y are 1.5, 1.5, 3, 4
  const std::vector<double> tied{1, 1, 2, 3};
  const double r = spearman_correlation(x, tied);
  EXPECT_NEAR(r, 4.5 / std::sqrt(5.0 * 4.5), 1e-12);
  EXPECT_THROW(spearman_correlation(std::vector<double>{1, 2}, std::vector<double>{1, 2}), ConfigError);
}

TEST(MarginSize, MarginGrowsWithSizeWhenSigmaDoes) {
  std::vector<std::int32_t> raw(64, 0);
  for (int i = 0; i < 2; ++i) raw[static_cast<std::size_t>(i)] = 1;
  for (int i = 10; i < 20; ++i) raw[static_cast<std::size_t>(i)] = 2;
  for (int i = 30; i < 60; ++i) raw[static_cast<std::size_t>(i)] = 3;
  const InstanceLabelMap truth({8, 8}, raw, {0, 0, 0});
  Field<float> off(2, {8, 8}), sig(1, {8, 8}, 0.05f), seed(1, {8, 8});
  for (int i = 10; i < 20; ++i) sig.data()[static_cast<std::size_t>(i)] = 0.1f;
  for (int i = 30; i < 60; ++i) sig.data()[static_cast<std::size_t>(i)] = 0.2f;
  const auto out = ModelOutput::from_activated(off, sig, seed);
  const auto m = margin_size_correlation(std::vector{out}, std::vector{truth});
  ASSERT_EQ(m.pairs.size(), 3u);
  EXPECT_EQ(m.pairs[2].size_px, 30u);
  EXPECT_NEAR(m.pairs[0].margin_px, 0.05 * std::sqrt(2.0 * std::log(2.0)) * 8, 1e-5);
  EXPECT_DOUBLE_EQ(m.spearman, 1.0);
  EXPECT_THROW(margin_size_correlation(std::vector{out}, std::vector{InstanceLabelMap({8, 8})}), DataError);
}

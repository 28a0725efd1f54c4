#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "embseg/clustering.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace embseg;

namespace {

// A single blob: embeddings collapsed on p, constant sigma, seeds 1 inside and 0 outside.
ModelOutput blob_output(GridShape shape, int r0, int r1, int c0, int c1, double seed_inside = 1.0) {
  Field<float> off(2, shape), sig(1, shape, 0.02f), seed(1, shape, 0.0f);
  const double px = 0.5, py = 0.5;
  for (int r = 0; r < shape.height; ++r) {
    for (int c = 0; c < shape.width; ++c) {
      const bool in = r >= r0 && r < r1 && c >= c0 && c < c1;
      if (in) {
        off(0, r, c) = static_cast<float>(px - double(c) / shape.height);
        off(1, r, c) = static_cast<float>(py - double(r) / shape.height);
        seed(0, r, c) = static_cast<float>(seed_inside);
      }
    }
  }
  return ModelOutput::from_activated(off, sig, seed);
}

}  // namespace

TEST(Clustering, AllSeedsBelowThresholdGiveEmptyResult) {
  Field<float> off(2, {8, 8}), sig(1, {8, 8}, 0.1f), seed(1, {8, 8}, 0.4f);
  const auto r = cluster(ModelOutput::from_activated(off, sig, seed), ClusterConfig{});
  EXPECT_TRUE(r.instances.empty());
  EXPECT_EQ(r.instance_map, std::vector<std::int32_t>(64, 0));
}

TEST(Clustering, SingleBlobIsRecovered) {
  const auto out = blob_output({16, 16}, 4, 10, 3, 9);
  const auto r = cluster(out, ClusterConfig{});
  ASSERT_EQ(r.instances.size(), 1u);
  for (int row = 0; row < 16; ++row) {
    for (int c = 0; c < 16; ++c) {
      const bool in = row >= 4 && row < 10 && c >= 3 && c < 9;
      EXPECT_EQ(r.instance_map[row * 16 + c], in ? 1 : 0);
    }
  }
  EXPECT_FLOAT_EQ(static_cast<float>(r.instances[0].confidence), 1.0f);
}

TEST(Clustering, HigherSeedBlobIsClusteredFirst) {
  const GridShape shape{16, 16};
  Field<float> off(2, shape), sig(1, shape, 0.02f), seed(1, shape, 0.0f);
  auto paint = [&](int r0, int c0, double px, double py, float s) {
    for (int r = r0; r < r0 + 5; ++r) {
      for (int c = c0; c < c0 + 5; ++c) {
        off(0, r, c) = static_cast<float>(px - double(c) / 16);
        off(1, r, c) = static_cast<float>(py - double(r) / 16);
        seed(0, r, c) = s;
      }
    }
  };
  paint(1, 1, 0.2, 0.2, 0.7f);   // B
  paint(9, 9, 0.8, 0.8, 0.95f);  // A
  const auto out = ModelOutput::from_activated(off, sig, seed);
  const auto r = cluster(out, ClusterConfig{});
  ASSERT_EQ(r.instances.size(), 2u);
  EXPECT_FLOAT_EQ(static_cast<float>(r.instances[0].confidence), 0.95f);
  EXPECT_EQ(r.instance_map[9 * 16 + 9], 1);
  EXPECT_EQ(r.instance_map[1 * 16 + 1], 2);
  EXPECT_TRUE(oracle::identical(r, oracle::cluster(out, ClusterConfig{})));
}

TEST(Clustering, MatchesReferenceOnRandomFields) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 60; ++trial) {
    const GridShape shape{fixtures::integer(rng, 2, 32), fixtures::integer(rng, 2, 32)};
    const int classes = fixtures::integer(rng, 1, 3);
    const int s_ch = fixtures::integer(rng, 1, 2);
    const auto out = fixtures::random_model_output(shape, classes, s_ch, rng);
    ClusterConfig cfg;
    cfg.min_pixels = fixtures::integer(rng, 1, 20);
    if (trial % 4 == 0) cfg.fixed_sigma = fixtures::uniform(rng, 0.02, 0.2);
    EXPECT_TRUE(oracle::identical(cluster(out, cfg), oracle::cluster(out, cfg))) << "trial " << trial;
  }
}

TEST(Clustering, InvariantsHoldOnRandomFields) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 40; ++trial) {
    const GridShape shape{16, 16};
    const auto out = fixtures::random_model_output(shape, 2, 1, rng);
    ClusterConfig cfg;
    cfg.min_pixels = 4;
    const auto r = cluster(out, cfg);
    std::vector<int> owner(shape.pixels(), 0);
    for (std::size_t k = 0; k < r.instances.size(); ++k) {
      const auto& inst = r.instances[k];
      EXPECT_EQ(inst.id, static_cast<int>(k) + 1);
      EXPECT_GE(static_cast<int>(inst.pixels.size()), cfg.min_pixels);
      EXPECT_GE(inst.confidence, 0.0);
      EXPECT_LE(inst.confidence, 1.0);
      for (auto i : inst.pixels) {
        EXPECT_GT(out.seeds.channel(inst.class_id)[i], cfg.fg_threshold);
        // disjoint within a class
        if (owner[i] > 0) EXPECT_NE(r.instances[static_cast<std::size_t>(owner[i] - 1)].class_id, inst.class_id);
        owner[i] = inst.id;
      }
    }
    EXPECT_EQ(cluster(out, cfg).instance_map, r.instance_map);
    ClusterConfig stricter = cfg;
    stricter.min_pixels = 12;
    const auto r2 = cluster(out, stricter);
    EXPECT_LE(r2.instances.size(), r.instances.size());
    for (const auto& inst : r2.instances) {
      bool found = false;
      for (const auto& o : r.instances) found = found || (o.pixels == inst.pixels && o.class_id == inst.class_id);
      EXPECT_TRUE(found);
    }
  }
}

TEST(Clustering, NonFiniteSigmaIsSkippedWithWarning) {
  auto out = blob_output({8, 8}, 2, 6, 2, 6);
  out.sigmas.data()[2 * 8 + 2] = std::numeric_limits<float>::quiet_NaN();
  out.seeds.data()[2 * 8 + 2] = 1.0f;
  out.seeds.data()[3 * 8 + 3] = 0.9f;
  ClusterConfig cfg;
  cfg.min_pixels = 1;
  const auto r = cluster(out, cfg);
  EXPECT_EQ(r.warnings.size(), 1u);
  EXPECT_EQ(r.instance_map[2 * 8 + 2], 0);
}

TEST(Clustering, ConfigValidation) {
  ClusterConfig c;
  c.seed_threshold = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.min_pixels = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(OracleCenters, PerfectModelReproducesTruth) {
  const GridShape shape{12, 12};
  std::vector<std::int32_t> raw(shape.pixels(), 0);
  for (int r = 1; r < 5; ++r) {
    for (int c = 1; c < 5; ++c) raw[r * 12 + c] = 1;
  }
  for (int r = 7; r < 11; ++r) {
    for (int c = 6; c < 11; ++c) raw[r * 12 + c] = 2;
  }
  const InstanceLabelMap truth(shape, raw, {0, 1});
  Field<float> off(2, shape), sig(1, shape, 0.01f), seed(2, shape);
  const double centers[2][2] = {{0.2, 0.2}, {0.7, 0.75}};
  for (int r = 0; r < 12; ++r) {
    for (int c = 0; c < 12; ++c) {
      const int id = raw[r * 12 + c];
      // background embeds far from both centers
      const double tx = id ? centers[id - 1][0] : (c < 6 ? 0.95 : 0.05);
      const double ty = id ? centers[id - 1][1] : 0.5;
      off(0, r, c) = static_cast<float>(tx - c / 12.0);
      off(1, r, c) = static_cast<float>(ty - r / 12.0);
    }
  }
  const auto out = ModelOutput::from_activated(off, sig, seed);
  const auto r = cluster_with_oracle_centers(out, truth);
  EXPECT_EQ(r.instance_map, raw);
  ASSERT_EQ(r.instances.size(), 2u);
  EXPECT_EQ(r.instances[1].class_id, 1);
  EXPECT_EQ(r.instances[1].truth_id, 2);
  EXPECT_EQ(r.instances[0].confidence, 1.0);
}

TEST(OracleCenters, NoInstancesGiveEmptyResult) {
  std::mt19937_64 rng(1);
  const auto out = fixtures::random_model_output({8, 8}, 1, 1, rng);
  EXPECT_TRUE(cluster_with_oracle_centers(out, InstanceLabelMap({8, 8})).instances.empty());
}

TEST(OracleCenters, MatchesReferenceOnRandomFields) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 60; ++trial) {
    const GridShape shape{fixtures::integer(rng, 2, 32), fixtures::integer(rng, 2, 32)};
    const int s_ch = fixtures::integer(rng, 1, 2);
    const auto out = fixtures::random_model_output(shape, 2, s_ch, rng);
    const auto truth = fixtures::random_label_map(shape, 5, 2, rng);
    std::optional<double> fixed;
    if (trial % 3 == 0) fixed = fixtures::uniform(rng, 0.02, 0.3);
    EXPECT_TRUE(oracle::identical(cluster_with_oracle_centers(out, truth, fixed),
                            oracle::cluster_with_oracle_centers(out, truth, fixed)))
        << "trial " << trial;
  }
}

TEST(Baselines, NearestCentroidExamples) {
  Field<double> emb(2, {1, 3}, std::vector<double>{0.0, 0.5, 1.0, 0.0, 0.0, 0.0});
  const std::vector<Point2<double>> one{{0.3, 0.3}};
  EXPECT_EQ(nearest_centroid_assign(emb, one), (std::vector<std::int32_t>{1, 1, 1}));
  const std::vector<Point2<double>> two{{0.0, 0.0}, {1.0, 0.0}};
  EXPECT_EQ(nearest_centroid_assign(emb, two), (std::vector<std::int32_t>{1, 1, 2}));  // middle is a tie
  EXPECT_THROW(nearest_centroid_assign(emb, std::vector<Point2<double>>{}), ConfigError);
}

TEST(Baselines, FixedMarginExamples) {
  Field<double> emb(2, {1, 3}, std::vector<double>{0.0, 0.5, 1.0, 0.0, 0.0, 0.0});
  const std::vector<Point2<double>> far{{5.0, 5.0}};
  EXPECT_EQ(fixed_margin_assign(emb, far, 0.1), (std::vector<std::int32_t>{0, 0, 0}));
  const std::vector<Point2<double>> at{{0.5, 0.0}};
  EXPECT_EQ(fixed_margin_assign(emb, at, 0.1), (std::vector<std::int32_t>{0, 1, 0}));
  EXPECT_THROW(fixed_margin_assign(emb, at, 0.0), ConfigError);
}

TEST(Baselines, MatchReferenceOnRandomCases) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const GridShape shape{fixtures::integer(rng, 1, 32), fixtures::integer(rng, 1, 32)};
    Field<double> emb(2, shape);
    for (double& v : emb.data()) v = fixtures::uniform(rng);
    std::vector<Point2<double>> centers(static_cast<std::size_t>(fixtures::integer(rng, 1, 6)));
    for (auto& c : centers) c = {fixtures::uniform(rng), fixtures::uniform(rng)};
    const double delta = fixtures::uniform(rng, 0.01, 0.5);
    EXPECT_EQ(nearest_centroid_assign(emb, centers), oracle::nearest_centroid_assign(emb, centers));
    EXPECT_EQ(fixed_margin_assign(emb, centers, delta), oracle::fixed_margin_assign(emb, centers, delta));
  }
}

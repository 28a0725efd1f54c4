#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "embseg/ablation.hpp"
#include "embseg/checkpoint.hpp"
#include "embseg/errors.hpp"
#include "embseg/pixel_field.hpp"
#include "embseg/trainer.hpp"

using namespace embseg;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("embseg_test_" + name);
  fs::remove_all(p);
  return p;
}

const Dataset& tiny_dataset() {
  static const Dataset ds = [] {
    SceneSpec spec;
    spec.shape = {32, 32};
    spec.small_radius = {2.0, 3.0};
    spec.large_radius = {6.0, 10.0};
    spec.max_instances = 3;
    return generate_dataset(spec, 6, 1.0 / 3.0);
  }();
  return ds;
}

TrainConfig tiny_config(int epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.batch_size = 2;
  c.model.width = 4;
  c.eval_every = 1;
  return c;
}

void expect_same_weights(const SpatialEmbeddingNet& a, const SpatialEmbeddingNet& b) {
  const auto pa = a.parameters(), pb = b.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i]->value, pb[i]->value) << pa[i]->name;
}

}  // namespace

TEST(PolyLearningRate, Endpoints) {
  EXPECT_DOUBLE_EQ(poly_learning_rate(1e-3, 0, 10), 1e-3);
  EXPECT_DOUBLE_EQ(poly_learning_rate(1e-3, 10, 10), 0.0);
  EXPECT_DOUBLE_EQ(poly_learning_rate(1e-3, 12, 10), 0.0);
  EXPECT_NEAR(poly_learning_rate(1.0, 5, 10, 1.0), 0.5, 1e-15);
  double prev = 1.0;
  for (int e = 1; e <= 10; ++e) {
    const double lr = poly_learning_rate(1.0, e, 10);
    EXPECT_LT(lr, prev);
    prev = lr;
  }
}

TEST(TrainConfig, JsonRoundTripAndValidation) {
  TrainConfig c = tiny_config(3);
  c.loss.sigma_mode = SigmaMode::elliptical;
  c.seed = 77;
  const nlohmann::json j = c;
  const auto back = j.get<TrainConfig>();
  EXPECT_EQ(nlohmann::json(back), j);
  EXPECT_EQ(back.model_for(2).sigma_channels, 2);
  auto bad = j;
  bad["batch_size"] = 0;
  EXPECT_THROW(bad.get<TrainConfig>(), ConfigError);
  bad = j;
  bad["learning_rate"] = "fast";
  EXPECT_THROW(bad.get<TrainConfig>(), ConfigError);
}

TEST(Train, ZeroEpochsReturnsTheInitializedModel) {
  const auto& ds = tiny_dataset();
  const auto cfg = tiny_config(0);
  const auto result = train(cfg, ds);
  SpatialEmbeddingNet ref(cfg.model_for(ds.spec.num_classes));
  ref.init_sigma_bias(cfg.init_margin_px, ds.spec.shape.height);
  expect_same_weights(result.net, ref);
  EXPECT_TRUE(result.log.empty());
}

TEST(Train, IsDeterministicAndLogsEveryEpoch) {
  const auto& ds = tiny_dataset();
  const auto a = train(tiny_config(2), ds);
  const auto b = train(tiny_config(2), ds);
  expect_same_weights(a.net, b.net);
  ASSERT_EQ(a.log.size(), 2u);
  EXPECT_EQ(a.log[1].epoch, 2);
  EXPECT_EQ(a.log[0].loss, b.log[0].loss);
  EXPECT_TRUE(a.log[1].ap_gt.has_value());
  EXPECT_GT(a.log[0].lr, a.log[1].lr);
  auto other = tiny_config(2);
  other.seed = 2;
  EXPECT_NE(train(other, ds).log[0].loss, a.log[0].loss);
}

TEST(Train, ResumeContinuesBitIdentically) {
  const auto& ds = tiny_dataset();
  const auto cfg = tiny_config(3);
  const auto straight = train(cfg, ds);

  const auto dir = fresh_dir("resume");
  struct Stop {};
  TrainOptions opts;
  opts.out_dir = dir;
  opts.on_epoch = [](const EpochRecord& r) {
    if (r.epoch == 2) throw Stop{};
  };
  EXPECT_THROW(train(cfg, ds, opts), Stop);
  EXPECT_TRUE(fs::exists(dir / "last.ckpt"));
  EXPECT_FALSE(fs::exists(dir / "model.ckpt"));

  opts.on_epoch = nullptr;
  opts.resume = true;
  const auto resumed = train(cfg, ds, opts);
  expect_same_weights(resumed.net, straight.net);
  ASSERT_EQ(resumed.log.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(resumed.log[i].loss, straight.log[i].loss);

  auto changed = cfg;
  changed.learning_rate *= 2;
  EXPECT_THROW(train(changed, ds, opts), ConfigError);
  fs::remove_all(dir);
}

TEST(Train, SavedModelEvaluatesBitIdentically) {
  const auto& ds = tiny_dataset();
  const auto dir = fresh_dir("artifacts");
  TrainOptions opts;
  opts.out_dir = dir;
  const auto result = train(tiny_config(1), ds, opts);
  for (const char* f : {"config.json", "metrics.ndjson", "last.ckpt", "model.ckpt"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
  const auto restored = restore_network(Checkpoint::load(dir / "model.ckpt"));
  const auto loss = tiny_config(1).loss;
  EXPECT_EQ(evaluate_ap_gt(restored, ds.val, loss).ap, evaluate_ap_gt(result.net, ds.val, loss).ap);
  EXPECT_EQ(restored.predict(ds.val[0].image).embeddings, result.net.predict(ds.val[0].image).embeddings);
  fs::remove_all(dir);
}

TEST(Train, NonFiniteLossDumpsTheBatch) {
  Dataset ds = tiny_dataset();
  for (auto& s : ds.train) s.image.data()[5] = std::numeric_limits<float>::quiet_NaN();
  const auto dir = fresh_dir("nonfinite");
  TrainOptions opts;
  opts.out_dir = dir;
  try {
    train(tiny_config(1), ds, opts);
    ADD_FAILURE() << "training did not fail";
  } catch (const NumericalError& e) {
    ASSERT_FALSE(e.dump_path().empty());
    const auto field = PixelField::load(e.dump_path());
    EXPECT_TRUE(field.contains("sigma_raw"));
    EXPECT_EQ(field.attributes.at("epoch"), 1);
  }
  fs::remove_all(dir);
}

TEST(FlipHorizontal, MirrorsColumns) {
  Field<float> f(1, {1, 3}, std::vector<float>{1, 2, 3});
  EXPECT_EQ(flip_horizontal(f).data(), (std::vector<float>{3, 2, 1}));
  EXPECT_EQ(flip_horizontal(flip_horizontal(f)), f);
}

TEST(Ablation, IdenticalCellsGiveIdenticalReports) {
  const auto& ds = tiny_dataset();
  AblationGrid grid;
  grid.cells = {AblationCell{SigmaMode::fixed, CenterMode::centroid},
                AblationCell{SigmaMode::elliptical, CenterMode::learnable}};
  grid.small = {0, 20};
  grid.large = {40};
  const auto a = run_ablation(grid, tiny_config(1), ds);
  const auto b = run_ablation(grid, tiny_config(1), ds);
  ASSERT_EQ(a.rows.size(), 2u);
  auto ja = nlohmann::json(a), jb = nlohmann::json(b);
  for (auto* j : {&ja, &jb}) {
    for (auto& r : (*j)["rows"]) r["final_epoch"].erase("seconds");
  }
  EXPECT_EQ(ja.dump(), jb.dump());
  EXPECT_NE(a.table().find("elliptical  learnable"), std::string::npos) << a.table();
  EXPECT_THROW(run_ablation(AblationGrid{}, tiny_config(1), ds), ConfigError);
}

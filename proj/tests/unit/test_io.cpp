#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <utility>

#include "embseg/checkpoint.hpp"
#include "embseg/errors.hpp"
#include "embseg/image_io.hpp"
#include "embseg/pixel_field.hpp"
#include "embseg/serialization.hpp"
#include "fixtures.hpp"

using namespace embseg;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("embseg_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(PixelField, RoundTripsFloatAndIntFields) {
  const auto dir = fresh_dir("pixel_field");
  std::mt19937_64 rng(1);
  PixelField f({5, 7});
  Field<float> a(2, {5, 7});
  for (float& v : a.data()) v = static_cast<float>(fixtures::uniform(rng, -1e6, 1e6));
  a.data()[3] = -0.0f;
  Field<std::int32_t> b(1, {5, 7});
  for (auto& v : b.data()) v = fixtures::integer(rng, -100000, 100000);
  f.set("a", a);
  f.set("b", b);
  f.attributes = {{"note", "x"}, {"values", {1, 2}}};
  f.save(dir / "f");
  const auto g = PixelField::load(dir / "f");
  EXPECT_EQ(g.shape(), f.shape());
  EXPECT_EQ(g.names(), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(g.floats("a"), a);
  EXPECT_TRUE(std::signbit(g.floats("a").data()[3]));
  EXPECT_EQ(g.ints("b"), b);
  EXPECT_EQ(g.attributes, f.attributes);
  EXPECT_THROW(g.ints("a"), DataError);
  EXPECT_THROW(g.floats("missing"), DataError);
  fs::remove_all(dir);
}

TEST(PixelField, RejectsBadInput) {
  PixelField f({4, 4});
  EXPECT_THROW(f.set("x", Field<float>(1, {4, 5})), ConfigError);
  EXPECT_THROW(f.set("../x", Field<float>(1, {4, 4})), ConfigError);
  const auto dir = fresh_dir("pixel_field_bad");
  EXPECT_THROW(PixelField::load(dir), DataError);
  f.set("x", Field<float>(1, {4, 4}));
  f.save(dir / "f");
  fs::resize_file(dir / "f" / "x.bin", 10);
  EXPECT_THROW(PixelField::load(dir / "f"), DataError);
  fs::remove_all(dir);
}

TEST(Png, EightAndSixteenBitRoundTrip) {
  const auto dir = fresh_dir("png");
  std::mt19937_64 rng(2);
  PngImage rgb{5, 3, 3, 8, {}};
  for (int i = 0; i < 45; ++i) rgb.samples.push_back(static_cast<std::uint16_t>(fixtures::integer(rng, 0, 255)));
  write_png(dir / "rgb.png", rgb);
  const auto back = read_png(dir / "rgb.png");
  EXPECT_EQ(back.samples, rgb.samples);
  EXPECT_EQ(back.channels, 3);
  EXPECT_EQ(back.width, 5);

  std::vector<std::int32_t> labels(15);
  for (auto& v : labels) v = fixtures::integer(rng, 0, 65535);
  write_png(dir / "lab.png", label_png16({3, 5}, labels));
  EXPECT_EQ(labels_from_png16(read_png(dir / "lab.png")), labels);
  labels[0] = 70000;
  EXPECT_ANY_THROW(label_png16({3, 5}, labels));

  Field<float> img(3, {3, 5});
  for (float& v : img.data()) v = static_cast<float>(fixtures::integer(rng, 0, 255) / 255.0);
  write_png(dir / "img.png", to_png8(img));
  EXPECT_EQ(from_png(read_png(dir / "img.png")), img);

  std::ofstream(dir / "junk.png") << "not a png";
  EXPECT_THROW(read_png(dir / "junk.png"), DataError);
  EXPECT_THROW(read_png(dir / "absent.png"), DataError);
  fs::remove_all(dir);
}

TEST(Checkpoint, RoundTripsWeightsAndMeta) {
  const auto dir = fresh_dir("ckpt");
  ModelConfig mc;
  mc.width = 4;
  mc.sigma_channels = 2;
  mc.init_seed = 3;
  SpatialEmbeddingNet net(mc);
  net.init_sigma_bias(5.0, 32);
  make_checkpoint(net, {{"epoch", 4}}).save(dir / "m.ckpt");
  const auto ck = Checkpoint::load(dir / "m.ckpt");
  EXPECT_EQ(ck.meta.at("epoch"), 4);
  EXPECT_EQ(ck.model_config.sigma_channels, 2);
  const auto restored = restore_network(ck);
  const auto pa = std::as_const(net).parameters();
  const auto pb = restored.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i]->value, pb[i]->value);
  EXPECT_FALSE(fs::exists(dir / "m.ckpt.tmp"));

  auto broken = ck;
  broken.arrays.pop_back();
  EXPECT_THROW(restore_network(broken), DataError);
  std::ofstream(dir / "bad.ckpt") << "EMBSEGXX";
  EXPECT_THROW(Checkpoint::load(dir / "bad.ckpt"), DataError);
  fs::resize_file(dir / "m.ckpt", fs::file_size(dir / "m.ckpt") - 4);
  EXPECT_THROW(Checkpoint::load(dir / "m.ckpt"), DataError);
  fs::remove_all(dir);
}

TEST(ClusterExport, RoundTripsThroughLabelImageAndSidecar) {
  std::mt19937_64 rng(5);
  // one class, so no instance is hidden behind another in the label image
  const auto out = fixtures::random_model_output({16, 16}, 1, 1, rng);
  ClusterConfig cfg;
  cfg.min_pixels = 2;
  const auto r = cluster(out, cfg);
  ASSERT_FALSE(r.instances.empty());
  const auto back = cluster_from_export(r.shape, r.instance_map, cluster_sidecar(r));
  EXPECT_EQ(back.instance_map, r.instance_map);
  ASSERT_EQ(back.instances.size(), r.instances.size());
  for (std::size_t k = 0; k < r.instances.size(); ++k) {
    EXPECT_EQ(back.instances[k].class_id, r.instances[k].class_id);
    EXPECT_DOUBLE_EQ(back.instances[k].confidence, r.instances[k].confidence);
    EXPECT_EQ(back.instances[k].pixels, r.instances[k].pixels);
  }
}

TEST(ConfigJson, LossAndClusterRoundTrip) {
  LossConfig l;
  l.sigma_mode = SigmaMode::elliptical;
  l.center_mode = CenterMode::learnable;
  const nlohmann::json jl = l;
  EXPECT_EQ(nlohmann::json(jl.get<LossConfig>()), jl);
  ClusterConfig c;
  c.fixed_sigma = 0.1;
  const nlohmann::json jc = c;
  EXPECT_EQ(nlohmann::json(jc.get<ClusterConfig>()), jc);
  auto bad = jl;
  bad["sigma_mode"] = "hexagonal";
  EXPECT_THROW(bad.get<LossConfig>(), ConfigError);
}

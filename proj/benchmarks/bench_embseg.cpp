#include <benchmark/benchmark.h>

#include <random>

#include "embseg/clustering.hpp"
#include "embseg/loss.hpp"
#include "embseg/lovasz.hpp"
#include "embseg/network.hpp"
#include "embseg/synthdata.hpp"

using namespace embseg;

namespace {

ModelConfig model(int width, int sigma_channels) {
  ModelConfig c;
  c.width = width;
  c.sigma_channels = sigma_channels;
  return c;
}

LossConfig elliptical_learnable() {
  LossConfig c;
  c.sigma_mode = SigmaMode::elliptical;
  c.center_mode = CenterMode::learnable;
  return c;
}

void BM_Forward(benchmark::State& state) {
  const SpatialEmbeddingNet net(model(static_cast<int>(state.range(0)), 2));
  const auto scene = generate(SceneSpec{}, 0);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(scene.image));
}
BENCHMARK(BM_Forward)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  SpatialEmbeddingNet net(model(16, 2));
  const auto scene = generate(SceneSpec{}, 0);
  const auto cfg = elliptical_learnable();
  SpatialEmbeddingNet::ForwardPass pass;
  for (auto _ : state) {
    const auto heads = net.forward(scene.image, &pass);
    const auto res = total_loss(heads, scene.labels, cfg, true);
    net.backward(pass, res.grad);
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_TotalLoss(benchmark::State& state) {
  const SpatialEmbeddingNet net(model(16, 2));
  const auto scene = generate(SceneSpec{}, 0);
  const auto heads = net.forward(scene.image);
  const auto cfg = elliptical_learnable();
  for (auto _ : state) benchmark::DoNotOptimize(total_loss(heads, scene.labels, cfg, state.range(0) != 0));
}
BENCHMARK(BM_TotalLoss)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_LovaszHinge(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> s(n);
  std::vector<std::uint8_t> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = u(rng);
    y[i] = rng() & 1;
  }
  for (auto _ : state) benchmark::DoNotOptimize(lovasz_hinge_with_grad<double>(s, y));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_LovaszHinge)->RangeMultiplier(4)->Range(256, 16384)->Complexity(benchmark::oNLogN);

// Ideal heads for a generated scene: every member points at its centroid.
ModelOutput ideal_output(const InstanceScene& scene) {
  const auto shape = scene.labels.shape();
  const auto coords = build_coordinate_map<double>(shape);
  Field<float> off(2, shape), sig(1, shape, 0.03f), seed(2, shape);
  for (int k = 1; k <= scene.labels.num_instances(); ++k) {
    const auto& members = scene.labels.members()[static_cast<std::size_t>(k - 1)];
    const auto c = centroid(members, coords);
    for (auto i : members) {
      off.data()[i] = static_cast<float>(c.x - coords.channel(0)[i]);
      off.data()[shape.pixels() + i] = static_cast<float>(c.y - coords.channel(1)[i]);
      seed.channel(scene.labels.class_of(k))[i] = 0.9f;
    }
  }
  return ModelOutput::from_activated(off, sig, seed);
}

void BM_Cluster(benchmark::State& state) {
  const auto scene = generate(SceneSpec{}, 0);
  const auto out = ideal_output(scene);
  for (auto _ : state) benchmark::DoNotOptimize(cluster(out, ClusterConfig{}));
}
BENCHMARK(BM_Cluster)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

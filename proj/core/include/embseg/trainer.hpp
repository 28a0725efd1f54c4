#pragma once

// Single-stage training on whole synthetic scenes: Adam with polynomial
// learning-rate decay, horizontal-flip augmentation, periodic AP_gt
// validation, NDJSON metric logs and resumable checkpoints.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "embseg/clustering.hpp"
#include "embseg/evaluator.hpp"
#include "embseg/loss.hpp"
#include "embseg/network.hpp"
#include "embseg/optimizer.hpp"
#include "embseg/synthdata.hpp"

namespace embseg {

struct TrainConfig {
  int epochs = 40;
  int batch_size = 4;
  double learning_rate = 5e-4;
  double poly_power = 0.9;
  AdamConfig adam;
  LossConfig loss;
  ClusterConfig cluster;
  /// Width and init seed are used; sigma channels and classes are derived.
  ModelConfig model;
  /// Initial margin of the sigma head, in pixels.
  double init_margin_px = 6.0;
  bool hflip = true;
  /// Validate every N epochs (and after the last one); 0 disables.
  int eval_every = 5;
  std::uint64_t seed = 1;

  void validate() const;
  /// Model config for a dataset with `num_classes` semantic classes.
  ModelConfig model_for(int num_classes) const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct EpochRecord {
  int epoch = 0;  // 1-based index of the completed epoch
  double lr = 0.0;
  double loss = 0.0;
  double instance = 0.0;
  double seed = 0.0;
  double smooth = 0.0;
  std::optional<double> ap_gt;
  double seconds = 0.0;
};

void to_json(nlohmann::json& j, const EpochRecord& r);
void from_json(const nlohmann::json& j, EpochRecord& r);

struct TrainOptions {
  /// Artifact directory: config.json, metrics.ndjson, last.ckpt, model.ckpt.
  /// Empty: train in memory only.
  std::filesystem::path out_dir;
  /// Continue from out_dir/last.ckpt when present.
  bool resume = false;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  SpatialEmbeddingNet net;
  std::vector<EpochRecord> log;
};

/// Throws NumericalError (with a dump directory when out_dir is set) on a
/// non-finite loss or gradient.
TrainResult train(const TrainConfig& config, const Dataset& data, const TrainOptions& options = {});

/// Activated outputs for a list of scenes.
std::vector<ModelOutput> predict_all(const SpatialEmbeddingNet& net, std::span<const InstanceScene> scenes);

/// AP_gt of `net` on `scenes`, with the fixed sigma applied when the loss uses one.
EvalReport evaluate_ap_gt(const SpatialEmbeddingNet& net, std::span<const InstanceScene> scenes,
                          const LossConfig& loss, std::optional<SizeRange> subset = std::nullopt);

/// Left-right mirror of an image field.
Field<float> flip_horizontal(const Field<float>& image);

}  // namespace embseg

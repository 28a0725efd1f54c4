#include "embseg/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <random>

#include "embseg/checkpoint.hpp"
#include "embseg/errors.hpp"
#include "embseg/pixel_field.hpp"
#include "embseg/serialization.hpp"

namespace embseg {
namespace {

using json = nlohmann::json;

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch, std::vector<bool>& flips) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch)};
  std::mt19937_64 rng(seq);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  flips.resize(n);
  for (std::size_t i = 0; i < n; ++i) flips[i] = (rng() >> 63) != 0;
  return order;
}

bool all_finite(const Field<float>& f) {
  for (float v : f.data()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::filesystem::path dump_batch(const std::filesystem::path& out_dir, int epoch, int step, const std::string& name,
                                 bool flipped, const Field<float>& image, const InstanceLabelMap& labels,
                                 const RawHeads<float>& heads, const LossReport& report) {
  const auto base = out_dir.empty() ? std::filesystem::temp_directory_path() : out_dir;
  const auto dir = base / ("nonfinite_e" + std::to_string(epoch) + "_s" + std::to_string(step));
  PixelField field(image.shape());
  field.set("image", image);
  field.set("labels", Field<std::int32_t>(1, labels.shape(), labels.labels()));
  field.set("offset_raw", heads.offset);
  field.set("sigma_raw", heads.sigma);
  field.set("seed_raw", heads.seed);
  field.attributes = {{"epoch", epoch}, {"step", step}, {"scene", name}, {"flipped", flipped},
                      {"class_of", labels.classes()}, {"loss", report}};
  field.save(dir);
  return dir;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be positive");
  if (!(poly_power > 0.0)) throw ConfigError("poly_power must be positive");
  if (!(init_margin_px > 0.0)) throw ConfigError("init_margin_px must be positive");
  if (eval_every < 0) throw ConfigError("eval_every must be >= 0");
  loss.validate();
  if (model.width < 1) throw ConfigError("model width must be >= 1");
}

ModelConfig TrainConfig::model_for(int num_classes) const {
  ModelConfig m = model;
  m.num_classes = num_classes;
  m.sigma_channels = loss.sigma_channels();
  m.validate();
  return m;
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"epochs", c.epochs},
           {"batch_size", c.batch_size},
           {"learning_rate", c.learning_rate},
           {"poly_power", c.poly_power},
           {"adam", {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"epsilon", c.adam.epsilon}}},
           {"loss", c.loss},
           {"cluster", c.cluster},
           {"model", {{"width", c.model.width}, {"init_seed", c.model.init_seed}}},
           {"init_margin_px", c.init_margin_px},
           {"hflip", c.hflip},
           {"eval_every", c.eval_every},
           {"seed", c.seed}};
}

void from_json(const json& j, TrainConfig& c) {
  c = TrainConfig{};
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.poly_power = j.value("poly_power", c.poly_power);
    if (j.contains("adam")) {
      const auto& a = j.at("adam");
      c.adam.beta1 = a.value("beta1", c.adam.beta1);
      c.adam.beta2 = a.value("beta2", c.adam.beta2);
      c.adam.epsilon = a.value("epsilon", c.adam.epsilon);
    }
    if (j.contains("loss")) c.loss = j.at("loss").get<LossConfig>();
    if (j.contains("cluster")) c.cluster = j.at("cluster").get<ClusterConfig>();
    if (j.contains("model")) {
      const auto& m = j.at("model");
      c.model.width = m.value("width", c.model.width);
      c.model.init_seed = m.value("init_seed", c.model.init_seed);
    }
    c.init_margin_px = j.value("init_margin_px", c.init_margin_px);
    c.hflip = j.value("hflip", c.hflip);
    c.eval_every = j.value("eval_every", c.eval_every);
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad train config: ") + e.what());
  }
  c.validate();
}

void to_json(json& j, const EpochRecord& r) {
  j = json{{"epoch", r.epoch},     {"lr", r.lr},         {"loss", r.loss},      {"instance", r.instance},
           {"seed", r.seed},       {"smooth", r.smooth}, {"seconds", r.seconds}};
  if (r.ap_gt) j["ap_gt"] = *r.ap_gt;
}

void from_json(const json& j, EpochRecord& r) {
  r.epoch = j.at("epoch");
  r.lr = j.at("lr");
  r.loss = j.at("loss");
  r.instance = j.at("instance");
  r.seed = j.at("seed");
  r.smooth = j.at("smooth");
  r.seconds = j.value("seconds", 0.0);
  r.ap_gt = j.contains("ap_gt") ? std::optional<double>(j.at("ap_gt").get<double>()) : std::nullopt;
}

Field<float> flip_horizontal(const Field<float>& image) {
  Field<float> out(image.channels(), image.shape());
  const int w = image.width();
  for (int c = 0; c < image.channels(); ++c) {
    for (int r = 0; r < image.height(); ++r) {
      for (int x = 0; x < w; ++x) out(c, r, x) = image(c, r, w - 1 - x);
    }
  }
  return out;
}

std::vector<ModelOutput> predict_all(const SpatialEmbeddingNet& net, std::span<const InstanceScene> scenes) {
  std::vector<ModelOutput> outputs;
  outputs.reserve(scenes.size());
  for (const auto& s : scenes) outputs.push_back(net.predict(s.image));
  return outputs;
}

EvalReport evaluate_ap_gt(const SpatialEmbeddingNet& net, std::span<const InstanceScene> scenes,
                          const LossConfig& loss, std::optional<SizeRange> subset) {
  const auto outputs = predict_all(net, scenes);
  std::vector<InstanceLabelMap> truths;
  for (const auto& s : scenes) truths.push_back(s.labels);
  std::optional<double> fixed;
  if (loss.sigma_mode == SigmaMode::fixed && !scenes.empty()) fixed = loss.fixed_sigma(scenes.front().labels.shape().height);
  return ap_gt(outputs, truths, MatchSpec{}, fixed, subset);
}

TrainResult train(const TrainConfig& config, const Dataset& data, const TrainOptions& options) {
  config.validate();
  const ModelConfig model_config = config.model_for(data.spec.num_classes);
  const int height = data.spec.shape.height;
  const bool artifacts = !options.out_dir.empty();
  const auto last_path = options.out_dir / "last.ckpt";

  SpatialEmbeddingNet net(model_config);
  net.init_sigma_bias(config.init_margin_px, height);
  Adam adam(net.parameters(), config.adam);
  std::vector<EpochRecord> log;
  int start_epoch = 0;

  if (artifacts) {
    std::filesystem::create_directories(options.out_dir);
    if (options.resume && std::filesystem::exists(last_path)) {
      const Checkpoint ckpt = Checkpoint::load(last_path);
      if (ckpt.meta.at("train_config") != json(config)) {
        throw ConfigError("resume config differs from the checkpointed run");
      }
      net = restore_network(ckpt);
      adam = Adam(net.parameters(), config.adam);
      adam.load_state(ckpt);
      start_epoch = ckpt.meta.at("epoch").get<int>();
      log = ckpt.meta.at("log").get<std::vector<EpochRecord>>();
    }
    write_text(options.out_dir / "config.json", json(config).dump(2) + "\n");
    std::string lines;
    for (const auto& r : log) lines += json(r).dump() + "\n";
    write_text(options.out_dir / "metrics.ndjson", lines);
  }

  const auto& scenes = data.train;
  if (scenes.empty() && config.epochs > 0) throw DataError("training set is empty");
  std::vector<InstanceLabelMap> flipped_labels;
  if (config.hflip) {
    for (const auto& s : scenes) flipped_labels.push_back(s.labels.flipped_horizontal());
  }

  SpatialEmbeddingNet::ForwardPass pass;
  for (int epoch = start_epoch; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = poly_learning_rate(config.learning_rate, epoch, config.epochs, config.poly_power);
    std::vector<bool> flips;
    const auto order = epoch_order(scenes.size(), config.seed, epoch, flips);
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.lr = lr;
    const auto scale = 1.0f / static_cast<float>(config.batch_size);
    int step = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(config.batch_size), ++step) {
      net.zero_grad();
      const std::size_t end = std::min(order.size(), b + static_cast<std::size_t>(config.batch_size));
      for (std::size_t i = b; i < end; ++i) {
        const std::size_t k = order[i];
        const bool flip = config.hflip && flips[i];
        const Field<float> image = flip ? flip_horizontal(scenes[k].image) : scenes[k].image;
        const InstanceLabelMap& labels = flip ? flipped_labels[k] : scenes[k].labels;
        const RawHeads<float> heads = net.forward(image, &pass);
        auto fail = [&](const LossReport& report, const std::string& why) {
          const std::string name = k < data.train_names.size() ? data.train_names[k] : std::to_string(k);
          const auto dir = dump_batch(options.out_dir, epoch + 1, step, name, flip, image, labels, heads, report);
          throw NumericalError(why + " at epoch " + std::to_string(epoch + 1) + ", step " + std::to_string(step) +
                                   " (scene " + name + ")",
                               dir.string());
        };
        LossResult<float> res;
        try {
          res = total_loss(heads, labels, config.loss, true);
        } catch (const NumericalError& e) {
          fail(LossReport{}, e.what());
        }
        if (!std::isfinite(res.report.total) || !all_finite(res.grad.offset) || !all_finite(res.grad.sigma) ||
            !all_finite(res.grad.seed)) {
          fail(res.report, "non-finite loss");
        }
        for (auto* f : {&res.grad.offset, &res.grad.sigma, &res.grad.seed}) {
          for (float& g : f->data()) g *= scale;
        }
        net.backward(pass, res.grad);
        rec.loss += res.report.total;
        rec.instance += res.report.instance;
        rec.seed += res.report.seed;
        rec.smooth += res.report.smooth;
      }
      adam.step(lr);
    }
    const auto n = static_cast<double>(std::max<std::size_t>(scenes.size(), 1));
    rec.loss /= n;
    rec.instance /= n;
    rec.seed /= n;
    rec.smooth /= n;
    const bool last = epoch + 1 == config.epochs;
    if (config.eval_every > 0 && !data.val.empty() && ((epoch + 1) % config.eval_every == 0 || last)) {
      rec.ap_gt = evaluate_ap_gt(net, data.val, config.loss).ap;
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log.push_back(rec);
    if (artifacts) {
      std::ofstream(options.out_dir / "metrics.ndjson", std::ios::app) << json(rec).dump() << '\n';
      Checkpoint ckpt = make_checkpoint(net, {{"epoch", epoch + 1}, {"train_config", config}, {"log", log}});
      adam.save_state(ckpt);
      ckpt.save(last_path);
    }
    if (options.on_epoch) options.on_epoch(rec);
  }

  if (artifacts) {
    make_checkpoint(net, {{"epoch", config.epochs}, {"train_config", config}, {"log", log}})
        .save(options.out_dir / "model.ckpt");
  }
  return {std::move(net), std::move(log)};
}

}  // namespace embseg

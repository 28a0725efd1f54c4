#include "embseg/commands.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <fstream>
#include <iostream>

#include "embseg/ablation.hpp"
#include "embseg/checkpoint.hpp"
#include "embseg/clustering.hpp"
#include "embseg/errors.hpp"
#include "embseg/evaluator.hpp"
#include "embseg/image_io.hpp"
#include "embseg/pixel_field.hpp"
#include "embseg/serialization.hpp"
#include "embseg/synthdata.hpp"
#include "embseg/trainer.hpp"
#include "embseg/visualize.hpp"

namespace embseg::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr const char* kInstancesSuffix = "_instances";

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

bool non_empty_dir(const fs::path& dir) { return fs::is_directory(dir) && !fs::is_empty(dir); }

// Output directory policy: refuse to write into a non-empty directory unless
// forced, in which case the listed artifacts are removed first.
void prepare_out(const fs::path& dir, bool force, std::initializer_list<const char*> owned) {
  if (fs::exists(dir) && !fs::is_directory(dir)) throw ConfigError(dir.string() + " exists and is not a directory");
  if (non_empty_dir(dir)) {
    if (!force) throw ConfigError(dir.string() + " is not empty (use --force)");
    for (const char* name : owned) fs::remove_all(dir / name);
  }
  fs::create_directories(dir);
}

std::vector<fs::path> sorted_pngs(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

Field<float> to_rgb(Field<float> image) {
  if (image.channels() == 3) return image;
  Field<float> rgb(3, image.shape());
  for (int c = 0; c < 3; ++c) std::copy(image.channel(0).begin(), image.channel(0).end(), rgb.channel(c).begin());
  return rgb;
}

InstanceLabelMap load_truth(const fs::path& truth_dir, const std::string& name) {
  const fs::path scenes = fs::is_directory(truth_dir / "scenes") ? truth_dir / "scenes" : truth_dir;
  const fs::path dir = scenes / name;
  if (!fs::exists(dir / PixelField::kManifestName)) throw DataError("no truth for " + name + " in " + scenes.string());
  const PixelField field = PixelField::load(dir);
  return InstanceLabelMap(field.shape(), field.ints("labels").data(),
                          field.attributes.at("class_of").get<std::vector<int>>());
}

int cmd_generate(const fs::path& spec_file, int count, double val_fraction, const fs::path& out_dir, bool force,
                 std::ostream& out) {
  SceneSpec spec;
  if (!spec_file.empty()) spec = read_json(spec_file).get<SceneSpec>();
  spec.validate();
  if (count < 1) throw ConfigError("--count must be >= 1");
  prepare_out(out_dir, force, {"manifest.json", "scenes"});
  write_dataset(out_dir, spec, count, val_fraction);
  out << "wrote " << count << " scenes to " << out_dir.string() << "\n";
  return kExitOk;
}

int cmd_train(const fs::path& config_file, const fs::path& data_dir, const fs::path& out_dir, bool resume, bool force,
              std::ostream& out) {
  TrainConfig config;
  if (!config_file.empty()) config = read_json(config_file).get<TrainConfig>();
  config.validate();
  const Dataset data = load_dataset(data_dir);
  if (!resume) prepare_out(out_dir, force, {"config.json", "metrics.ndjson", "last.ckpt", "model.ckpt"});
  TrainOptions options;
  options.out_dir = out_dir;
  options.resume = resume;
  options.on_epoch = [&](const EpochRecord& r) { out << json(r).dump() << "\n" << std::flush; };
  train(config, data, options);
  out << "final checkpoint: " << (out_dir / "model.ckpt").string() << "\n";
  return kExitOk;
}

int cmd_infer(const fs::path& checkpoint, const fs::path& input, const fs::path& out_dir, bool dump_fields,
              bool force, std::ostream& out) {
  const Checkpoint ckpt = Checkpoint::load(checkpoint);
  const SpatialEmbeddingNet net = restore_network(ckpt);
  TrainConfig config;
  if (ckpt.meta.contains("train_config")) config = ckpt.meta.at("train_config").get<TrainConfig>();

  std::vector<fs::path> inputs;
  if (fs::is_directory(input)) {
    inputs = sorted_pngs(input);
  } else if (fs::is_regular_file(input)) {
    inputs.push_back(input);
  } else {
    throw DataError("input " + input.string() + " does not exist");
  }
  if (inputs.empty()) throw DataError("no PNG images in " + input.string());
  prepare_out(out_dir, force, {});

  for (const auto& path : inputs) {
    const Field<float> image = to_rgb(from_png(read_png(path)));
    const int height = image.height();
    ClusterConfig ccfg = config.cluster;
    if (config.loss.sigma_mode == SigmaMode::fixed) ccfg.fixed_sigma = config.loss.fixed_sigma(height);
    const ModelOutput output = net.predict(image);
    const ClusterResult result = cluster(output, ccfg);
    const std::string stem = path.stem().string();

    write_png(out_dir / (stem + kInstancesSuffix + ".png"), label_png16(result.shape, result.instance_map));
    write_json(out_dir / (stem + kInstancesSuffix + ".json"), cluster_sidecar(result));
    PixelField heads(output.shape());
    heads.set("offset_raw", output.raw.offset);
    heads.set("sigma_raw", output.raw.sigma);
    heads.set("seed_raw", output.raw.seed);
    heads.attributes["sigma_mode"] = to_string(config.loss.sigma_mode);
    if (ccfg.fixed_sigma) heads.attributes["fixed_sigma"] = *ccfg.fixed_sigma;
    heads.save(out_dir / (stem + "_heads"));
    if (dump_fields) {
      write_png(out_dir / (stem + "_offsets.png"), to_png8(offset_color_map(output)));
      write_png(out_dir / (stem + "_sigma.png"), to_png8(sigma_heat_map(output)));
      write_png(out_dir / (stem + "_margin.png"), to_png8(margin_heat_map(output)));
      for (int c = 0; c < output.num_classes(); ++c) {
        write_png(out_dir / (stem + "_seed_" + std::to_string(c) + ".png"), to_png8(seed_map(output, c)));
      }
    }
    out << stem << ": " << result.instances.size() << " instances\n";
  }
  write_json(out_dir / "infer.json", {{"checkpoint", fs::absolute(checkpoint).string()},
                                      {"input", fs::absolute(input).string()},
                                      {"train_config", config}});
  return kExitOk;
}

int cmd_eval(const fs::path& pred_dir, const fs::path& truth_dir, bool gt_sampling, const fs::path& report_file,
             std::ostream& out) {
  if (!fs::is_directory(pred_dir)) throw DataError("prediction directory " + pred_dir.string() + " does not exist");
  std::vector<std::string> names;
  for (const auto& p : sorted_pngs(pred_dir)) {
    const std::string stem = p.stem().string();
    const std::string suffix = kInstancesSuffix;
    if (stem.size() > suffix.size() && stem.ends_with(suffix)) names.push_back(stem.substr(0, stem.size() - suffix.size()));
  }
  if (names.empty()) throw DataError("no *_instances.png predictions in " + pred_dir.string());

  std::vector<InstanceLabelMap> truths;
  for (const auto& name : names) truths.push_back(load_truth(truth_dir, name));

  EvalReport report;
  if (gt_sampling) {
    std::vector<ModelOutput> outputs;
    std::optional<double> fixed;
    for (const auto& name : names) {
      const PixelField heads = PixelField::load(pred_dir / (name + "_heads"));
      outputs.push_back(ModelOutput::from_raw(
          RawHeads<float>{heads.floats("offset_raw"), heads.floats("sigma_raw"), heads.floats("seed_raw")}));
      if (heads.attributes.contains("fixed_sigma")) fixed = heads.attributes.at("fixed_sigma").get<double>();
    }
    report = ap_gt(outputs, truths, MatchSpec{}, fixed);
  } else {
    std::vector<ClusterResult> preds;
    for (std::size_t i = 0; i < names.size(); ++i) {
      const PngImage png = read_png(pred_dir / (names[i] + kInstancesSuffix + ".png"));
      const GridShape shape{png.height, png.width};
      if (shape != truths[i].shape()) throw DataError("prediction and truth differ in shape for " + names[i]);
      preds.push_back(cluster_from_export(shape, labels_from_png16(png),
                                          read_json(pred_dir / (names[i] + kInstancesSuffix + ".json"))));
    }
    report = average_precision(preds, truths);
  }
  const json j = report;
  if (!report_file.empty()) write_json(report_file, j);
  out << j.dump(2) << "\n";
  return kExitOk;
}

int cmd_ablate(const fs::path& grid_file, const fs::path& config_file, const fs::path& data_dir, const fs::path& out_dir,
               bool force, std::ostream& out) {
  AblationGrid grid = AblationGrid::standard();
  if (!grid_file.empty()) grid = read_json(grid_file).get<AblationGrid>();
  grid.validate();
  TrainConfig base;
  if (!config_file.empty()) base = read_json(config_file).get<TrainConfig>();
  base.validate();
  const Dataset data = load_dataset(data_dir);
  prepare_out(out_dir, force, {"grid.json", "config.json", "report.json", "table.txt"});
  for (const auto& cell : grid.cells) fs::remove_all(out_dir / cell.name());
  write_json(out_dir / "grid.json", grid);
  write_json(out_dir / "config.json", base);
  AblationOptions options;
  options.out_dir = out_dir;
  options.on_epoch = [&](const AblationCell& cell, const EpochRecord& r) {
    out << cell.name() << " " << json(r).dump() << "\n" << std::flush;
  };
  const AblationReport report = run_ablation(grid, base, data, options);
  out << report.table();
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Instance segmentation by spatial embeddings with learnable clustering bandwidth", "embseg"};
  app.require_subcommand(1);

  fs::path spec_file, out_dir, config_file, data_dir, checkpoint, input, pred_dir, truth_dir, report_file, grid_file;
  int count = 0;
  double val_fraction = 0.2;
  bool force = false, resume = false, dump_fields = false, gt_sampling = false;

  auto* gen = app.add_subcommand("generate", "Write a synthetic scene dataset");
  gen->add_option("--spec", spec_file, "Scene spec JSON")->check(CLI::ExistingFile);
  gen->add_option("--count", count, "Number of scenes")->required();
  gen->add_option("--val-fraction", val_fraction, "Fraction of scenes tagged val");
  gen->add_option("--out", out_dir, "Output directory")->required();
  gen->add_flag("--force", force, "Overwrite an existing dataset");

  auto* tr = app.add_subcommand("train", "Train a model");
  tr->add_option("--config", config_file, "Train config JSON")->check(CLI::ExistingFile);
  tr->add_option("--data", data_dir, "Dataset directory")->required();
  tr->add_option("--out", out_dir, "Run directory")->required();
  tr->add_flag("--resume", resume, "Continue from the run directory's last checkpoint");
  tr->add_flag("--force", force, "Overwrite an existing run");

  auto* inf = app.add_subcommand("infer", "Cluster instances from images");
  inf->add_option("--checkpoint", checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
  inf->add_option("--input", input, "PNG image or directory of PNGs")->required();
  inf->add_option("--out", out_dir, "Output directory")->required();
  inf->add_flag("--dump-fields", dump_fields, "Also write offset, sigma, margin and seed images");
  inf->add_flag("--force", force, "Write into a non-empty directory");

  auto* ev = app.add_subcommand("eval", "Score predictions against a dataset");
  ev->add_option("--pred", pred_dir, "Directory written by infer")->required();
  ev->add_option("--truth", truth_dir, "Dataset directory")->required();
  ev->add_flag("--gt-sampling", gt_sampling, "Cluster around ground-truth centers (AP_gt)");
  ev->add_option("--report", report_file, "Also write the report here");

  auto* ab = app.add_subcommand("ablate", "Run the sigma/center ablation grid");
  ab->add_option("--grid", grid_file, "Grid JSON")->check(CLI::ExistingFile);
  ab->add_option("--config", config_file, "Base train config JSON")->check(CLI::ExistingFile);
  ab->add_option("--data", data_dir, "Dataset directory")->required();
  ab->add_option("--out", out_dir, "Output directory")->required();
  ab->add_flag("--force", force, "Overwrite an existing report");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*gen) return cmd_generate(spec_file, count, val_fraction, out_dir, force, out);
    if (*tr) return cmd_train(config_file, data_dir, out_dir, resume, force, out);
    if (*inf) return cmd_infer(checkpoint, input, out_dir, dump_fields, force, out);
    if (*ev) return cmd_eval(pred_dir, truth_dir, gt_sampling, report_file, out);
    if (*ab) return cmd_ablate(grid_file, config_file, data_dir, out_dir, force, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    if (!e.dump_path().empty()) err << "batch dump: " << e.dump_path() << "\n";
    return kExitNumerical;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const nlohmann::json::exception& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitConfig;
}

}  // namespace embseg::cli

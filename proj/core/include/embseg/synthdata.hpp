#pragma once

// Deterministic synthetic instance scenes: flat-colored disks and elongated
// bars of mixed sizes, painted in z-order with additive Gaussian noise.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "embseg/grid.hpp"
#include "embseg/labels.hpp"

namespace embseg {

struct Interval {
  double min = 0.0;
  double max = 0.0;
};

struct SceneSpec {
  GridShape shape{64, 64};
  /// 1: disks only; 2: disks (class 0) and bars (class 1).
  int num_classes = 2;
  int min_instances = 2;
  int max_instances = 6;
  /// Probability that an instance is drawn from the small size regime.
  double small_fraction = 0.6;
  /// Disk radius / bar half-length in pixels, per size regime.
  Interval small_radius{2.5, 5.0};
  Interval large_radius{12.0, 22.0};
  /// Bar length-to-width ratio.
  Interval bar_elongation{2.0, 6.0};
  /// Probability that a small instance is placed touching-distance from an earlier small one.
  double adjacent_small_prob = 0.35;
  /// Standard deviation of the pixel noise, as a fraction of the [0, 1] range.
  double noise_sigma = 0.05;
  /// Instances left with fewer visible pixels after occlusion are dropped.
  int min_visible_pixels = 4;
  std::uint64_t seed = 2024;

  void validate() const;
  static const std::vector<std::string>& class_names();
};

struct InstanceScene {
  /// (3, H, W) in [0, 1], quantized to 8-bit levels so PNG storage is lossless.
  Field<float> image;
  InstanceLabelMap labels;
  /// Flat color of each instance (index id-1) and of the background, before noise.
  std::vector<std::array<float, 3>> colors;
  std::array<float, 3> background{};
  /// Nominal size of each instance: disk radius or bar half-length, in pixels.
  std::vector<double> radius;
};

InstanceScene generate(const SceneSpec& spec, std::uint64_t index);

/// FNV-1a over the 8-bit image levels, the label map and the class list.
std::uint64_t scene_checksum(const InstanceScene& scene);
std::string checksum_hex(std::uint64_t checksum);

void to_json(nlohmann::json& j, const SceneSpec& s);
void from_json(const nlohmann::json& j, SceneSpec& s);

/// Manifest: spec echo, scene indices 0..n-1, split tags (the last
/// round(n * val_fraction) scenes are "val"), and per-scene checksums.
nlohmann::json dataset_manifest(const SceneSpec& spec, int n, double val_fraction = 0.2);

struct Dataset {
  SceneSpec spec;
  std::vector<InstanceScene> train;
  std::vector<InstanceScene> val;
  std::vector<std::string> train_names;
  std::vector<std::string> val_names;
};

/// Generates in memory, split like dataset_manifest.
Dataset generate_dataset(const SceneSpec& spec, int n, double val_fraction = 0.2);

/// Writes manifest.json, scenes/<name>.png and scenes/<name>/ (label pixel field).
void write_dataset(const std::filesystem::path& dir, const SceneSpec& spec, int n, double val_fraction = 0.2);
/// Loads scenes from disk and verifies each against its manifest checksum.
Dataset load_dataset(const std::filesystem::path& dir);
/// Regenerates every scene of a manifest and checks the stored checksums.
bool verify_manifest(const nlohmann::json& manifest);

std::string scene_name(std::uint64_t index);

}  // namespace embseg

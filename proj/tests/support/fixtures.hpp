#pragma once

// Random inputs shared by unit and acceptance tests.

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "embseg/heads.hpp"
#include "embseg/labels.hpp"

namespace embseg::fixtures {

inline double uniform(std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int integer(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

/// Up to `max_instances` random rectangles painted in z-order.
inline InstanceLabelMap random_label_map(GridShape shape, int max_instances, int num_classes, std::mt19937_64& rng) {
  const int count = integer(rng, 0, max_instances);
  std::vector<std::int32_t> raw(shape.pixels(), 0);
  std::vector<int> classes{0};
  for (int k = 1; k <= count; ++k) {
    const int h = integer(rng, 1, std::max(1, shape.height / 2));
    const int w = integer(rng, 1, std::max(1, shape.width / 2));
    const int r0 = integer(rng, 0, shape.height - h);
    const int c0 = integer(rng, 0, shape.width - w);
    for (int r = r0; r < r0 + h; ++r) {
      for (int c = c0; c < c0 + w; ++c) raw[static_cast<std::size_t>(r) * shape.width + c] = k;
    }
    classes.push_back(integer(rng, 0, num_classes - 1));
  }
  return compact_labels(shape, raw, classes);
}

/// Embeddings scattered around a few attractors, random sigmas, and seed
/// values on a coarse grid of levels so that ties occur.
inline ModelOutput random_model_output(GridShape shape, int num_classes, int sigma_channels, std::mt19937_64& rng) {
  const std::size_t n = shape.pixels();
  const int attractors = integer(rng, 1, 5);
  std::vector<std::pair<double, double>> centers;
  for (int k = 0; k < attractors; ++k) centers.emplace_back(uniform(rng, 0.1, 0.9), uniform(rng, 0.1, 0.9));
  Field<float> offsets(2, shape);
  Field<float> sigmas(sigma_channels, shape);
  Field<float> seeds(num_classes, shape);
  for (std::size_t i = 0; i < n; ++i) {
    const int r = static_cast<int>(i) / shape.width;
    const int c = static_cast<int>(i) % shape.width;
    const double x = static_cast<double>(c) / shape.height;
    const double y = static_cast<double>(r) / shape.height;
    const auto& a = centers[static_cast<std::size_t>(integer(rng, 0, attractors - 1))];
    const double spread = uniform(rng, 0.0, 0.15);
    const double tx = a.first + uniform(rng, -spread, spread);
    const double ty = a.second + uniform(rng, -spread, spread);
    offsets.data()[i] = static_cast<float>(std::clamp(tx - x, -0.99, 0.99));
    offsets.data()[n + i] = static_cast<float>(std::clamp(ty - y, -0.99, 0.99));
    for (int s = 0; s < sigma_channels; ++s) sigmas.data()[s * n + i] = static_cast<float>(uniform(rng, 0.02, 0.2));
    for (int k = 0; k < num_classes; ++k) seeds.data()[k * n + i] = static_cast<float>(integer(rng, 0, 16) / 16.0);
  }
  return ModelOutput::from_activated(offsets, sigmas, seeds);
}

}  // namespace embseg::fixtures

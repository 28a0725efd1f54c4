#pragma once

// Inference-time instance recovery from seed maps, embeddings and sigmas.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "embseg/geometry.hpp"
#include "embseg/heads.hpp"
#include "embseg/labels.hpp"

namespace embseg {

/// Membership threshold on phi; fixed by the assignment rule.
inline constexpr double kPhiThreshold = 0.5;

struct ClusterConfig {
  /// Sampling stops once no unmasked candidate seed exceeds this value.
  double seed_threshold = 0.5;
  /// Only pixels whose class seed exceeds this value are candidates.
  double fg_threshold = 0.5;
  /// Clusters with fewer pixels are discarded (their pixels stay masked).
  int min_pixels = 16;
  /// Normalized bandwidth replacing the predicted sigma (fixed-sigma models).
  std::optional<double> fixed_sigma;

  void validate() const;
};

struct ClusteredInstance {
  int id = 0;
  int class_id = 0;
  /// Seed value at the sampled center (1.0 for oracle centers).
  double confidence = 0.0;
  Point2<double> center;
  Sigma<double> sigma;
  /// Row-major pixel indices, ascending.
  std::vector<std::size_t> pixels;
  /// Ground-truth instance the center came from (oracle mode only, else 0).
  int truth_id = 0;
};

struct ClusterResult {
  GridShape shape{};
  /// Flattened map; where instances of different classes overlap the one
  /// with the higher confidence wins (ties: lower id).
  std::vector<std::int32_t> instance_map;
  std::vector<ClusteredInstance> instances;
  std::vector<std::string> warnings;

  std::vector<std::uint8_t> mask(const ClusteredInstance& inst) const;
};

/// Sequential seed-driven clustering, one class at a time.
ClusterResult cluster(const ModelOutput& output, const ClusterConfig& config);

/// Clustering with ground-truth centers and classes: center = mean member
/// embedding, sigma = mean member sigma (or `fixed_sigma`), assignment by
/// phi > 0.5 over all pixels, overlaps resolved by the higher phi.
ClusterResult cluster_with_oracle_centers(const ModelOutput& output, const InstanceLabelMap& truth,
                                          std::optional<double> fixed_sigma = std::nullopt);

/// Assigns every pixel to its nearest center (ids 1..K; ties to the lower id).
std::vector<std::int32_t> nearest_centroid_assign(const Field<double>& embeddings,
                                                  std::span<const Point2<double>> centers);

/// Assigns a pixel to the nearest center strictly closer than `delta`, else 0.
std::vector<std::int32_t> fixed_margin_assign(const Field<double>& embeddings, std::span<const Point2<double>> centers,
                                              double delta);

/// Rebuilds the flattened map of `result` from its instance pixel lists.
void flatten_instances(ClusterResult& result);

}  // namespace embseg

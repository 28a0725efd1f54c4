#pragma once

// Single-file weight archive:
//   bytes 0..7   magic "EMBSEGCK"
//   uint32       format version
//   uint64       header length in bytes
//   header       UTF-8 JSON: {"version", "model_config", "meta", "arrays": [{"name", "count"}]}
//   payload      float32 arrays in header order, little-endian
// Optimizer moments, when present, are stored as arrays named "adam.m/<param>"
// and "adam.v/<param>".

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "embseg/network.hpp"

namespace embseg {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig model_config;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, std::vector<float>>> arrays;

  const std::vector<float>* find(const std::string& name) const;

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
};

/// Snapshot of the network weights (no optimizer state).
Checkpoint make_checkpoint(const SpatialEmbeddingNet& net, nlohmann::json meta = nlohmann::json::object());

/// Rebuilds a network from a checkpoint; every parameter must be present with the right size.
SpatialEmbeddingNet restore_network(const Checkpoint& ckpt);

}  // namespace embseg

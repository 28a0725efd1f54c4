#pragma once

// Sigma-mode x center-mode ablation: one model per cell trained with shared
// seeds and budget, scored by AP_gt overall and on small/large object subsets.

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "embseg/evaluator.hpp"
#include "embseg/loss.hpp"
#include "embseg/trainer.hpp"

namespace embseg {

struct AblationCell {
  SigmaMode sigma = SigmaMode::circular;
  CenterMode center = CenterMode::centroid;

  std::string name() const;
  friend bool operator==(const AblationCell&, const AblationCell&) = default;
};

struct AblationGrid {
  std::vector<AblationCell> cells;
  /// Truth-size subsets (pixels) for the small/large breakdown.
  SizeRange small{0, 150};
  SizeRange large{400};

  /// fixed/centroid, circular/centroid, circular/learnable,
  /// elliptical/centroid, elliptical/learnable.
  static AblationGrid standard();
  void validate() const;
};

void to_json(nlohmann::json& j, const AblationGrid& g);
void from_json(const nlohmann::json& j, AblationGrid& g);

struct AblationRow {
  AblationCell cell;
  EvalReport overall;
  EvalReport small;
  EvalReport large;
  MarginSizeCorrelation scatter;
  std::vector<EpochRecord> log;
};

struct AblationReport {
  std::vector<AblationRow> rows;
  std::vector<std::string> class_names;
  const AblationRow* find(const AblationCell& cell) const;
  /// Fixed-width text table: one row per cell, AP_gt then per-class AP_gt.
  std::string table() const;
};

void to_json(nlohmann::json& j, const AblationReport& r);

struct AblationOptions {
  /// Per-cell run directories, report.json, table.txt and scatter_<cell>.csv.
  std::filesystem::path out_dir;
  /// Continue each cell from its last checkpoint when present.
  bool resume = false;
  std::function<void(const AblationCell&, const EpochRecord&)> on_epoch;
  /// Receives each cell's trained network.
  std::function<void(const AblationCell&, const SpatialEmbeddingNet&)> on_model;
};

AblationReport run_ablation(const AblationGrid& grid, const TrainConfig& base, const Dataset& data,
                            const AblationOptions& options = {});

}  // namespace embseg

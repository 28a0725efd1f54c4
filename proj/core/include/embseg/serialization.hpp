#pragma once

// JSON conversions for configurations and reports.

#include <nlohmann/json.hpp>

#include "embseg/clustering.hpp"
#include "embseg/evaluator.hpp"
#include "embseg/loss.hpp"
#include "embseg/network.hpp"

namespace embseg {

void to_json(nlohmann::json& j, const LossConfig& c);
void from_json(const nlohmann::json& j, LossConfig& c);
void to_json(nlohmann::json& j, const ClusterConfig& c);
void from_json(const nlohmann::json& j, ClusterConfig& c);
void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

void to_json(nlohmann::json& j, const LossReport& r);
void to_json(nlohmann::json& j, const EvalReport& r);

/// Instance list sidecar of a clustering result (pixels omitted; see the label image).
nlohmann::json cluster_sidecar(const ClusterResult& result);
/// Rebuilds a clustering result from a label image and its sidecar.
ClusterResult cluster_from_export(GridShape shape, const std::vector<std::int32_t>& label_image,
                                  const nlohmann::json& sidecar);

}  // namespace embseg

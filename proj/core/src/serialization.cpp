#include "embseg/serialization.hpp"

namespace embseg {

using nlohmann::json;

void to_json(json& j, const LossConfig& c) {
  j = json{{"sigma_mode", to_string(c.sigma_mode)},
           {"fixed_sigma_margin", c.fixed_sigma_margin},
           {"center_mode", to_string(c.center_mode)},
           {"weights", {{"instance", c.weights.instance}, {"seed", c.weights.seed}, {"smooth", c.weights.smooth}}}};
}

void from_json(const json& j, LossConfig& c) {
  c = LossConfig{};
  if (j.contains("sigma_mode")) c.sigma_mode = parse_sigma_mode(j.at("sigma_mode").get<std::string>());
  if (j.contains("center_mode")) c.center_mode = parse_center_mode(j.at("center_mode").get<std::string>());
  c.fixed_sigma_margin = j.value("fixed_sigma_margin", c.fixed_sigma_margin);
  if (j.contains("weights")) {
    const auto& w = j.at("weights");
    c.weights.instance = w.value("instance", c.weights.instance);
    c.weights.seed = w.value("seed", c.weights.seed);
    c.weights.smooth = w.value("smooth", c.weights.smooth);
  }
  c.validate();
}

void to_json(json& j, const ClusterConfig& c) {
  j = json{{"seed_threshold", c.seed_threshold}, {"fg_threshold", c.fg_threshold}, {"min_pixels", c.min_pixels}};
  if (c.fixed_sigma) j["fixed_sigma"] = *c.fixed_sigma;
}

void from_json(const json& j, ClusterConfig& c) {
  c = ClusterConfig{};
  c.seed_threshold = j.value("seed_threshold", c.seed_threshold);
  c.fg_threshold = j.value("fg_threshold", c.fg_threshold);
  c.min_pixels = j.value("min_pixels", c.min_pixels);
  if (j.contains("fixed_sigma") && !j.at("fixed_sigma").is_null()) c.fixed_sigma = j.at("fixed_sigma").get<double>();
  c.validate();
}

void to_json(json& j, const ModelConfig& c) {
  j = json{{"in_channels", c.in_channels},       {"num_classes", c.num_classes}, {"sigma_channels", c.sigma_channels},
           {"width", c.width},                   {"downsampling", c.downsampling},
           {"init_seed", c.init_seed}};
}

void from_json(const json& j, ModelConfig& c) {
  c = ModelConfig{};
  c.in_channels = j.value("in_channels", c.in_channels);
  c.num_classes = j.value("num_classes", c.num_classes);
  c.sigma_channels = j.value("sigma_channels", c.sigma_channels);
  c.width = j.value("width", c.width);
  c.downsampling = j.value("downsampling", c.downsampling);
  c.init_seed = j.value("init_seed", c.init_seed);
  c.validate();
}

void to_json(json& j, const LossReport& r) {
  j = json{{"total", r.total}, {"instance", r.instance}, {"seed", r.seed}, {"smooth", r.smooth}};
  json per = json::array();
  for (const auto& d : r.per_instance) {
    per.push_back({{"id", d.id},
                   {"class_id", d.class_id},
                   {"pixels", d.pixels},
                   {"center", {d.center.x, d.center.y}},
                   {"sigma", {d.sigma.x, d.sigma.y}},
                   {"margin", {d.margin.x, d.margin.y}},
                   {"iou", d.iou},
                   {"lovasz", d.lovasz}});
  }
  j["per_instance"] = std::move(per);
}

void to_json(json& j, const EvalReport& r) {
  json per = json::object();
  for (const auto& [cls, v] : r.per_class_ap) {
    per[std::to_string(cls)] = {{"ap", v}, {"ap50", r.per_class_ap50.at(cls)}};
  }
  j = json{{"ap", r.ap},
           {"ap50", r.ap50},
           {"per_class", per},
           {"ap_per_threshold", r.ap_per_threshold},
           {"num_predictions", r.num_predictions},
           {"num_truths", r.num_truths}};
}

json cluster_sidecar(const ClusterResult& result) {
  json inst = json::array();
  for (const auto& i : result.instances) {
    inst.push_back({{"id", i.id},
                    {"class_id", i.class_id},
                    {"confidence", i.confidence},
                    {"center", {i.center.x, i.center.y}},
                    {"sigma", {i.sigma.x, i.sigma.y}},
                    {"elliptical", i.sigma.elliptical},
                    {"pixel_count", i.pixels.size()},
                    {"truth_id", i.truth_id}});
  }
  return json{{"shape", {result.shape.height, result.shape.width}}, {"instances", inst}, {"warnings", result.warnings}};
}

ClusterResult cluster_from_export(GridShape shape, const std::vector<std::int32_t>& label_image, const json& sidecar) {
  if (label_image.size() != shape.pixels()) throw DataError("label image does not match its shape");
  ClusterResult r;
  r.shape = shape;
  std::map<int, std::vector<std::size_t>> pixels;
  for (std::size_t i = 0; i < label_image.size(); ++i) {
    if (label_image[i] > 0) pixels[label_image[i]].push_back(i);
  }
  try {
    for (const auto& e : sidecar.at("instances")) {
      const int id = e.at("id").get<int>();
      auto it = pixels.find(id);
      if (it == pixels.end()) continue;  // fully covered by a more confident instance
      ClusteredInstance inst;
      inst.id = static_cast<int>(r.instances.size()) + 1;
      inst.class_id = e.at("class_id").get<int>();
      inst.confidence = e.at("confidence").get<double>();
      inst.center = {e.at("center").at(0).get<double>(), e.at("center").at(1).get<double>()};
      const bool ell = e.value("elliptical", false);
      inst.sigma = {e.at("sigma").at(0).get<double>(), e.at("sigma").at(1).get<double>(), ell};
      inst.truth_id = e.value("truth_id", 0);
      inst.pixels = it->second;
      r.instances.push_back(std::move(inst));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed cluster sidecar: ") + e.what());
  }
  flatten_instances(r);
  return r;
}

}  // namespace embseg

#include "embseg/ablation.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "embseg/errors.hpp"
#include "embseg/serialization.hpp"

namespace embseg {

using json = nlohmann::json;

std::string AblationCell::name() const { return to_string(sigma) + "_" + to_string(center); }

AblationGrid AblationGrid::standard() {
  AblationGrid g;
  g.cells = {{SigmaMode::fixed, CenterMode::centroid},
             {SigmaMode::circular, CenterMode::centroid},
             {SigmaMode::circular, CenterMode::learnable},
             {SigmaMode::elliptical, CenterMode::centroid},
             {SigmaMode::elliptical, CenterMode::learnable}};
  return g;
}

void AblationGrid::validate() const {
  if (cells.empty()) throw ConfigError("ablation grid has no cells");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].sigma == SigmaMode::fixed && cells[i].center == CenterMode::learnable) {
      throw ConfigError("fixed sigma with a learnable center is not a defined cell");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (cells[i] == cells[j]) throw ConfigError("duplicate ablation cell " + cells[i].name());
    }
  }
  if (small.max_pixels <= small.min_pixels || large.max_pixels <= large.min_pixels) {
    throw ConfigError("size subsets must be non-empty ranges");
  }
}

void to_json(json& j, const AblationGrid& g) {
  j = json{{"cells", json::array()},
           {"small_pixels", {g.small.min_pixels, g.small.max_pixels}},
           {"large_min_pixels", g.large.min_pixels}};
  for (const auto& c : g.cells) j["cells"].push_back({{"sigma_mode", to_string(c.sigma)}, {"center_mode", to_string(c.center)}});
}

void from_json(const json& j, AblationGrid& g) {
  g = AblationGrid::standard();
  try {
    if (j.contains("cells")) {
      g.cells.clear();
      for (const auto& c : j.at("cells")) {
        g.cells.push_back({parse_sigma_mode(c.at("sigma_mode").get<std::string>()),
                           parse_center_mode(c.value("center_mode", std::string("centroid")))});
      }
    }
    if (j.contains("small_pixels")) {
      g.small = {j.at("small_pixels").at(0).get<std::size_t>(), j.at("small_pixels").at(1).get<std::size_t>()};
    }
    if (j.contains("large_min_pixels")) g.large.min_pixels = j.at("large_min_pixels").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad ablation grid: ") + e.what());
  }
  g.validate();
}

const AblationRow* AblationReport::find(const AblationCell& cell) const {
  for (const auto& r : rows) {
    if (r.cell == cell) return &r;
  }
  return nullptr;
}

std::string AblationReport::table() const {
  std::ostringstream out;
  out << std::left << std::setw(12) << "sigma" << std::setw(11) << "center" << std::right << std::setw(8) << "AP_gt"
      << std::setw(8) << "small" << std::setw(8) << "large";
  for (const auto& n : class_names) out << std::setw(8) << n;
  out << "\n";
  out << std::fixed << std::setprecision(1);
  for (const auto& r : rows) {
    out << std::left << std::setw(12) << to_string(r.cell.sigma) << std::setw(11) << to_string(r.cell.center)
        << std::right << std::setw(8) << 100.0 * r.overall.ap << std::setw(8) << 100.0 * r.small.ap << std::setw(8)
        << 100.0 * r.large.ap;
    for (std::size_t c = 0; c < class_names.size(); ++c) {
      const auto it = r.overall.per_class_ap.find(static_cast<int>(c));
      if (it == r.overall.per_class_ap.end()) {
        out << std::setw(8) << "-";
      } else {
        out << std::setw(8) << 100.0 * it->second;
      }
    }
    out << "\n";
  }
  return out.str();
}

void to_json(json& j, const AblationReport& r) {
  j = json{{"classes", r.class_names}, {"rows", json::array()}};
  for (const auto& row : r.rows) {
    j["rows"].push_back({{"sigma_mode", to_string(row.cell.sigma)},
                         {"center_mode", to_string(row.cell.center)},
                         {"ap_gt", row.overall},
                         {"ap_gt_small", row.small},
                         {"ap_gt_large", row.large},
                         {"spearman", row.scatter.spearman},
                         {"final_epoch", row.log.empty() ? json(nullptr) : json(row.log.back())}});
  }
}

AblationReport run_ablation(const AblationGrid& grid, const TrainConfig& base, const Dataset& data,
                            const AblationOptions& options) {
  grid.validate();
  base.validate();
  if (data.val.empty()) throw DataError("ablation needs validation scenes");
  AblationReport report;
  const auto& names = SceneSpec::class_names();
  report.class_names.assign(names.begin(), names.begin() + data.spec.num_classes);
  std::vector<InstanceLabelMap> truths;
  for (const auto& s : data.val) truths.push_back(s.labels);

  for (const auto& cell : grid.cells) {
    TrainConfig config = base;
    config.loss.sigma_mode = cell.sigma;
    config.loss.center_mode = cell.center;
    TrainOptions topts;
    if (!options.out_dir.empty()) topts.out_dir = options.out_dir / cell.name();
    topts.resume = options.resume;
    if (options.on_epoch) topts.on_epoch = [&](const EpochRecord& r) { options.on_epoch(cell, r); };
    TrainResult trained = train(config, data, topts);

    AblationRow row;
    row.cell = cell;
    row.log = std::move(trained.log);
    const auto outputs = predict_all(trained.net, data.val);
    std::optional<double> fixed;
    if (cell.sigma == SigmaMode::fixed) fixed = config.loss.fixed_sigma(data.spec.shape.height);
    row.overall = ap_gt(outputs, truths, MatchSpec{}, fixed);
    row.small = ap_gt(outputs, truths, MatchSpec{}, fixed, grid.small);
    row.large = ap_gt(outputs, truths, MatchSpec{}, fixed, grid.large);
    row.scatter = margin_size_correlation(outputs, truths);
    if (options.on_model) options.on_model(cell, trained.net);
    report.rows.push_back(std::move(row));

    if (!options.out_dir.empty()) {
      std::ofstream csv(options.out_dir / ("scatter_" + cell.name() + ".csv"));
      csv << "size_px,margin_px\n";
      for (const auto& p : report.rows.back().scatter.pairs) csv << p.size_px << "," << p.margin_px << "\n";
    }
  }

  if (!options.out_dir.empty()) {
    std::filesystem::create_directories(options.out_dir);
    std::ofstream(options.out_dir / "report.json") << json(report).dump(2) << "\n";
    std::ofstream(options.out_dir / "table.txt") << report.table();
  }
  return report;
}

}  // namespace embseg

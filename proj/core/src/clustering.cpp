#include "embseg/clustering.hpp"

#include <cmath>
#include <limits>

namespace embseg {

void ClusterConfig::validate() const {
  if (!(seed_threshold > 0.0 && seed_threshold < 1.0)) throw ConfigError("seed_threshold must lie in (0, 1)");
  if (!(fg_threshold > 0.0 && fg_threshold < 1.0)) throw ConfigError("fg_threshold must lie in (0, 1)");
  if (min_pixels < 1) throw ConfigError("min_pixels must be at least 1");
  if (fixed_sigma && !(*fixed_sigma > 0.0 && std::isfinite(*fixed_sigma))) {
    throw ConfigError("fixed_sigma must be positive");
  }
}

std::vector<std::uint8_t> ClusterResult::mask(const ClusteredInstance& inst) const {
  std::vector<std::uint8_t> m(shape.pixels(), 0);
  for (auto i : inst.pixels) m[i] = 1;
  return m;
}

void flatten_instances(ClusterResult& result) {
  result.instance_map.assign(result.shape.pixels(), 0);
  std::vector<double> owner_conf(result.shape.pixels(), -1.0);
  for (const auto& inst : result.instances) {
    for (auto i : inst.pixels) {
      if (result.instance_map[i] == 0 || inst.confidence > owner_conf[i]) {
        result.instance_map[i] = inst.id;
        owner_conf[i] = inst.confidence;
      }
    }
  }
}

ClusterResult cluster(const ModelOutput& output, const ClusterConfig& config) {
  config.validate();
  const GridShape shape = output.shape();
  const std::size_t n = shape.pixels();
  ClusterResult result;
  result.shape = shape;

  std::vector<char> masked(n);
  for (int c = 0; c < output.num_classes(); ++c) {
    const auto seeds = output.seeds.channel(c);
    for (std::size_t i = 0; i < n; ++i) masked[i] = !(seeds[i] > config.fg_threshold);

    while (true) {
      std::size_t best = n;
      float best_val = -std::numeric_limits<float>::infinity();
      for (std::size_t i = 0; i < n; ++i) {
        if (!masked[i] && seeds[i] > best_val) {
          best_val = seeds[i];
          best = i;
        }
      }
      if (best == n || !(best_val > config.seed_threshold)) break;

      const Sigma<double> sigma =
          config.fixed_sigma ? Sigma<double>::circular(*config.fixed_sigma) : output.sigma_at(best);
      const Point2<double> center = output.embedding_at(best);
      masked[best] = 1;
      if (!sigma.finite() || !sigma.positive() || !std::isfinite(center.x) || !std::isfinite(center.y)) {
        result.warnings.push_back("class " + std::to_string(c) + ": skipped seed at pixel " + std::to_string(best) +
                                  " with non-finite sigma or embedding");
        continue;
      }

      std::vector<std::size_t> pixels;
      for (std::size_t i = 0; i < n; ++i) {
        if (i != best && masked[i]) continue;
        if (gaussian_phi(output.embedding_at(i), center, sigma) > kPhiThreshold) {
          pixels.push_back(i);
          masked[i] = 1;
        }
      }
      if (static_cast<int>(pixels.size()) < config.min_pixels) continue;

      ClusteredInstance inst;
      inst.id = static_cast<int>(result.instances.size()) + 1;
      inst.class_id = c;
      inst.confidence = static_cast<double>(best_val);
      inst.center = center;
      inst.sigma = sigma;
      inst.pixels = std::move(pixels);
      result.instances.push_back(std::move(inst));
    }
  }
  flatten_instances(result);
  return result;
}

ClusterResult cluster_with_oracle_centers(const ModelOutput& output, const InstanceLabelMap& truth,
                                          std::optional<double> fixed_sigma) {
  const GridShape shape = output.shape();
  if (truth.shape() != shape) throw ConfigError("cluster_with_oracle_centers: truth and output differ in shape");
  const std::size_t n = shape.pixels();
  const int s_ch = output.sigma_channels();

  struct Claim {
    Point2<double> center;
    Sigma<double> sigma;
  };
  std::vector<Claim> claims;
  for (const auto& members : truth.members()) {
    Claim cl;
    double sx = 0.0;
    double sy = 0.0;
    for (auto i : members) {
      sx += output.embeddings.channel(0)[i];
      sy += output.embeddings.channel(1)[i];
    }
    const auto nk = static_cast<double>(members.size());
    cl.center = {sx / nk, sy / nk};
    if (fixed_sigma) {
      cl.sigma = Sigma<double>::circular(*fixed_sigma);
    } else {
      double acc[2] = {0.0, 0.0};
      for (int ch = 0; ch < s_ch; ++ch) {
        for (auto i : members) acc[ch] += output.sigmas.channel(ch)[i];
        acc[ch] /= nk;
      }
      cl.sigma = s_ch == 2 ? Sigma<double>::axes(acc[0], acc[1]) : Sigma<double>::circular(acc[0]);
    }
    claims.push_back(cl);
  }

  ClusterResult result;
  result.shape = shape;
  std::vector<int> owner(n, 0);
  std::vector<double> best_phi(n, 0.0);
  for (std::size_t k = 0; k < claims.size(); ++k) {
    const auto& cl = claims[k];
    if (!cl.sigma.finite() || !cl.sigma.positive() || !std::isfinite(cl.center.x) || !std::isfinite(cl.center.y)) {
      result.warnings.push_back("truth instance " + std::to_string(k + 1) + ": non-finite center or sigma");
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double phi = gaussian_phi(output.embedding_at(i), cl.center, cl.sigma);
      if (phi > kPhiThreshold && phi > best_phi[i]) {
        best_phi[i] = phi;
        owner[i] = static_cast<int>(k) + 1;
      }
    }
  }

  std::vector<std::vector<std::size_t>> pixels(claims.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (owner[i] > 0) pixels[static_cast<std::size_t>(owner[i] - 1)].push_back(i);
  }
  for (std::size_t k = 0; k < claims.size(); ++k) {
    if (pixels[k].empty()) continue;
    ClusteredInstance inst;
    inst.id = static_cast<int>(result.instances.size()) + 1;
    inst.truth_id = static_cast<int>(k) + 1;
    inst.class_id = truth.class_of(inst.truth_id);
    inst.confidence = 1.0;
    inst.center = claims[k].center;
    inst.sigma = claims[k].sigma;
    inst.pixels = std::move(pixels[k]);
    result.instances.push_back(std::move(inst));
  }
  flatten_instances(result);
  return result;
}

std::vector<std::int32_t> nearest_centroid_assign(const Field<double>& embeddings,
                                                  std::span<const Point2<double>> centers) {
  if (centers.empty()) throw ConfigError("nearest_centroid_assign: no centers");
  const std::size_t n = embeddings.shape().pixels();
  std::vector<std::int32_t> out(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto e = point_at(embeddings, i);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const double dx = e.x - centers[k].x;
      const double dy = e.y - centers[k].y;
      const double d2 = dx * dx + dy * dy;
      if (d2 < best) {
        best = d2;
        out[i] = static_cast<std::int32_t>(k + 1);
      }
    }
  }
  return out;
}

std::vector<std::int32_t> fixed_margin_assign(const Field<double>& embeddings, std::span<const Point2<double>> centers,
                                              double delta) {
  if (!(delta > 0.0)) throw ConfigError("fixed_margin_assign: delta must be positive");
  const std::size_t n = embeddings.shape().pixels();
  std::vector<std::int32_t> out(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto e = point_at(embeddings, i);
    double best = delta;
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const double dx = e.x - centers[k].x;
      const double dy = e.y - centers[k].y;
      const double d = std::sqrt(dx * dx + dy * dy);
      if (d < best) {
        best = d;
        out[i] = static_cast<std::int32_t>(k + 1);
      }
    }
  }
  return out;
}

}  // namespace embseg

#include "embseg/heads.hpp"

#include <algorithm>
#include <limits>

namespace embseg {

ModelOutput ModelOutput::from_raw(RawHeads<float> raw) {
  raw.validate();
  ModelOutput out;
  const auto shape = raw.shape();
  out.offsets = Field<float>(2, shape);
  out.sigmas = Field<float>(raw.sigma_channels(), shape);
  out.seeds = Field<float>(raw.num_classes(), shape);
  std::transform(raw.offset.data().begin(), raw.offset.data().end(), out.offsets.data().begin(),
                 [](float v) { return std::tanh(v); });
  std::transform(raw.sigma.data().begin(), raw.sigma.data().end(), out.sigmas.data().begin(),
                 [](float v) { return std::isfinite(v) ? sigma_from_raw(v) : std::numeric_limits<float>::quiet_NaN(); });
  std::transform(raw.seed.data().begin(), raw.seed.data().end(), out.seeds.data().begin(),
                 [](float v) { return sigmoid(v); });
  out.embeddings = embed(build_coordinate_map<float>(shape), out.offsets);
  out.raw = std::move(raw);
  return out;
}

ModelOutput ModelOutput::from_activated(const Field<float>& offsets, const Field<float>& sigmas,
                                        const Field<float>& seeds) {
  ModelOutput out;
  const auto shape = offsets.shape();
  out.raw = RawHeads<float>::zeros(shape, sigmas.channels(), seeds.channels());
  out.raw.validate();
  if (sigmas.shape() != shape || seeds.shape() != shape) throw ConfigError("from_activated: fields differ in shape");
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    const float o = offsets.data()[i];
    if (!(o > -1.0f && o < 1.0f)) throw ConfigError("from_activated: offsets must lie in (-1, 1)");
    out.raw.offset.data()[i] = std::atanh(o);
  }
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    const float s = sigmas.data()[i];
    out.raw.sigma.data()[i] = s > 0.0f && std::isfinite(s) ? raw_from_sigma(s) : std::numeric_limits<float>::quiet_NaN();
  }
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const float s = std::clamp(seeds.data()[i], 0.0f, 1.0f);
    out.raw.seed.data()[i] = std::log(s) - std::log1p(-s);
  }
  out.offsets = offsets;
  out.sigmas = sigmas;
  out.seeds = seeds;
  for (auto& s : out.seeds.data()) s = std::clamp(s, 0.0f, 1.0f);
  out.embeddings = embed(build_coordinate_map<float>(shape), out.offsets);
  return out;
}

}  // namespace embseg

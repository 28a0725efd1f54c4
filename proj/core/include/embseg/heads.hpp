#pragma once

#include <cmath>

#include "embseg/geometry.hpp"
#include "embseg/grid.hpp"

namespace embseg {

/// Pre-activation network outputs: offsets (2), log(1/(2 sigma^2)) (1 or 2) and
/// one seed logit per semantic class.
template <typename T>
struct RawHeads {
  Field<T> offset;
  Field<T> sigma;
  Field<T> seed;

  static RawHeads zeros(GridShape shape, int sigma_channels, int num_classes) {
    return {Field<T>(2, shape), Field<T>(sigma_channels, shape), Field<T>(num_classes, shape)};
  }

  GridShape shape() const noexcept { return offset.shape(); }
  int sigma_channels() const noexcept { return sigma.channels(); }
  int num_classes() const noexcept { return seed.channels(); }

  void validate() const {
    if (offset.channels() != 2) throw ConfigError("offset head must have 2 channels");
    if (sigma.channels() != 1 && sigma.channels() != 2) throw ConfigError("sigma head must have 1 or 2 channels");
    if (seed.channels() < 1) throw ConfigError("seed head needs at least one class channel");
    if (sigma.shape() != offset.shape() || seed.shape() != offset.shape()) {
      throw ConfigError("head fields must share one grid");
    }
  }

  template <typename U>
  RawHeads<U> cast() const {
    auto conv = [](const Field<T>& f) {
      std::vector<U> d(f.data().begin(), f.data().end());
      return Field<U>(f.channels(), f.shape(), std::move(d));
    };
    return {conv(offset), conv(sigma), conv(seed)};
  }
};

template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

/// Raw heads plus the activated fields: tanh offsets, positive sigmas,
/// sigmoid seed maps, and the resulting spatial embeddings.
struct ModelOutput {
  RawHeads<float> raw;
  Field<float> offsets;
  Field<float> sigmas;
  Field<float> seeds;
  Field<float> embeddings;

  GridShape shape() const noexcept { return raw.shape(); }
  int sigma_channels() const noexcept { return raw.sigma_channels(); }
  int num_classes() const noexcept { return raw.num_classes(); }

  static ModelOutput from_raw(RawHeads<float> raw);

  /// Builds an output whose activations equal the given fields exactly up to
  /// float rounding of the inverse activations. Offsets must lie in (-1, 1),
  /// sigmas must be positive, seeds in [0, 1].
  static ModelOutput from_activated(const Field<float>& offsets, const Field<float>& sigmas, const Field<float>& seeds);

  /// Sigma at pixel `index` as a bandwidth (circular or per axis).
  Sigma<double> sigma_at(std::size_t index) const {
    if (sigma_channels() == 1) return Sigma<double>::circular(sigmas.channel(0)[index]);
    return Sigma<double>::axes(sigmas.channel(0)[index], sigmas.channel(1)[index]);
  }
  Point2<double> embedding_at(std::size_t index) const {
    return {embeddings.channel(0)[index], embeddings.channel(1)[index]};
  }
};

}  // namespace embseg

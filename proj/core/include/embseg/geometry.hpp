#pragma once

// Spatial embedding geometry: the normalized coordinate map, embeddings and
// the Gaussian assignment function that turns an embedding-to-center distance
// into a membership probability.
//
// Coordinates are normalized so that one pixel step equals 1/H along both
// axes: x in [0, (W-1)/H], y in [0, (H-1)/H].

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "embseg/errors.hpp"
#include "embseg/grid.hpp"

namespace embseg {

/// Raw sigma activations are clamped to this range before exponentiation.
inline constexpr double kSigmaRawLimit = 12.0;

template <typename T>
struct Point2 {
  T x{};
  T y{};
  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Bandwidth of the Gaussian assignment: circular (x == y) or one per axis.
template <typename T>
struct Sigma {
  T x{};
  T y{};
  bool elliptical = false;

  static Sigma circular(T s) { return {s, s, false}; }
  static Sigma axes(T sx, T sy) { return {sx, sy, true}; }

  bool positive() const noexcept { return x > T(0) && y > T(0); }
  bool finite() const noexcept { return std::isfinite(x) && std::isfinite(y); }
};

/// Field of shape (2, H, W) holding (x, y) = (c/H, r/H) for every pixel.
template <typename T>
Field<T> build_coordinate_map(GridShape shape) {
  shape.validate();
  Field<T> coords(2, shape);
  const double inv_h = 1.0 / static_cast<double>(shape.height);
  for (int r = 0; r < shape.height; ++r) {
    for (int c = 0; c < shape.width; ++c) {
      coords(0, r, c) = static_cast<T>(static_cast<double>(c) * inv_h);
      coords(1, r, c) = static_cast<T>(static_cast<double>(r) * inv_h);
    }
  }
  return coords;
}

/// e = x + o, elementwise.
template <typename T>
Field<T> embed(const Field<T>& coords, const Field<T>& offsets) {
  if (coords.channels() != 2 || offsets.channels() != 2 || coords.shape() != offsets.shape()) {
    throw ConfigError("embed: coordinate and offset fields must both be (2, H, W) on the same grid");
  }
  Field<T> out = coords;
  auto& d = out.data();
  const auto& o = offsets.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += o[i];
  return out;
}

/// Pixel distance to normalized units on a grid of the given height.
inline double pixels_to_normalized(double pixels, int grid_height) { return pixels / grid_height; }
inline double normalized_to_pixels(double normalized, int grid_height) { return normalized * grid_height; }

/// Distance at which the Gaussian crosses 0.5: sqrt(-2 sigma^2 ln 0.5).
template <typename T>
T margin_of(T sigma) {
  if (!(sigma > T(0))) throw ConfigError("margin_of: sigma must be positive");
  return std::sqrt(T(-2) * sigma * sigma * std::log(T(0.5)));
}

/// Inverse of margin_of.
template <typename T>
T sigma_from_margin(T margin) {
  if (!(margin > T(0))) throw ConfigError("sigma_from_margin: margin must be positive");
  return margin / std::sqrt(T(2) * std::numbers::ln2_v<T>);
}

template <typename T>
T clamp_sigma_raw(T raw) {
  return std::clamp(raw, T(-kSigmaRawLimit), T(kSigmaRawLimit));
}

/// The sigma head predicts log(1 / (2 sigma^2)); sigma = exp(-raw/2) / sqrt(2).
template <typename T>
T sigma_from_raw(T raw) {
  if (!std::isfinite(raw)) throw NumericalError("sigma_from_raw: non-finite raw value");
  return std::exp(-clamp_sigma_raw(raw) / T(2)) / std::numbers::sqrt2_v<T>;
}

/// d sigma / d raw, zero outside the clamp range.
template <typename T>
T sigma_from_raw_derivative(T raw) {
  if (raw < T(-kSigmaRawLimit) || raw > T(kSigmaRawLimit)) return T(0);
  return -sigma_from_raw(raw) / T(2);
}

template <typename T>
T raw_from_sigma(T sigma) {
  if (!(sigma > T(0))) throw ConfigError("raw_from_sigma: sigma must be positive");
  return -std::log(T(2) * sigma * sigma);
}

/// Gaussian membership probability of embedding e for an instance at `center`.
template <typename T>
T gaussian_phi(Point2<T> e, Point2<T> center, Sigma<T> sigma) {
  if (!sigma.positive()) throw ConfigError("gaussian_phi: sigma must be positive");
  const T dx = e.x - center.x;
  const T dy = e.y - center.y;
  if (!sigma.elliptical) {
    return std::exp(-(dx * dx + dy * dy) / (T(2) * sigma.x * sigma.x));
  }
  return std::exp(-(dx * dx) / (T(2) * sigma.x * sigma.x) - (dy * dy) / (T(2) * sigma.y * sigma.y));
}

/// Value and partial derivatives of gaussian_phi. For a circular sigma the
/// whole sigma derivative is reported in d_sigma.x and d_sigma.y is zero.
template <typename T>
struct PhiWithGrad {
  T value{};
  Point2<T> d_embedding;
  Point2<T> d_center;
  Point2<T> d_sigma;
};

template <typename T>
PhiWithGrad<T> gaussian_phi_grad(Point2<T> e, Point2<T> center, Sigma<T> sigma) {
  const T phi = gaussian_phi(e, center, sigma);
  const T dx = e.x - center.x;
  const T dy = e.y - center.y;
  PhiWithGrad<T> g;
  g.value = phi;
  const T isx2 = T(1) / (sigma.x * sigma.x);
  const T isy2 = T(1) / (sigma.y * sigma.y);
  g.d_embedding = {-phi * dx * isx2, -phi * dy * isy2};
  g.d_center = {-g.d_embedding.x, -g.d_embedding.y};
  if (sigma.elliptical) {
    g.d_sigma = {phi * dx * dx * isx2 / sigma.x, phi * dy * dy * isy2 / sigma.y};
  } else {
    g.d_sigma = {phi * (dx * dx + dy * dy) * isx2 / sigma.x, T(0)};
  }
  return g;
}

/// Evaluates the Gaussian over a subset of embedding points.
template <typename T>
std::vector<T> gaussian_phi(std::span<const Point2<T>> embeddings, Point2<T> center, Sigma<T> sigma) {
  std::vector<T> out;
  out.reserve(embeddings.size());
  for (const auto& e : embeddings) out.push_back(gaussian_phi(e, center, sigma));
  return out;
}

/// Reads pixel `index` (row-major) of a (2, H, W) field as a point.
template <typename T>
Point2<T> point_at(const Field<T>& field, std::size_t index) {
  return {field.channel(0)[index], field.channel(1)[index]};
}

}  // namespace embseg

#pragma once

// Lovasz hinge: a piecewise-linear convex surrogate of the Jaccard loss
// (1 - IoU) for a single binary mask.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "embseg/errors.hpp"

namespace embseg {

template <typename T>
struct LovaszResult {
  T loss{};
  /// d loss / d score per pixel.
  std::vector<T> grad;
  /// Pixel indices sorted by descending hinge error (stable by index).
  std::vector<std::uint32_t> order;
};

/// Maps a membership probability in (0, 1] to a hinge score; phi = 0.5 -> 0.
template <typename T>
T phi_to_score(T phi) {
  if (!(phi >= T(0) && phi <= T(1))) throw ConfigError("phi_to_score: phi must lie in [0, 1]");
  return T(2) * phi - T(1);
}

/// Weights of the Lovasz extension of the Jaccard loss along a sorted order:
/// the discrete gradient of 1 - |F \ A_j| / |F u A_j| over the prefix sets A_j.
template <typename T>
std::vector<T> lovasz_jaccard_weights(std::span<const std::uint8_t> truth_sorted) {
  const std::size_t n = truth_sorted.size();
  std::vector<T> w(n);
  const auto gts = static_cast<T>(std::count(truth_sorted.begin(), truth_sorted.end(), std::uint8_t{1}));
  T cum_fg = 0;
  T cum_bg = 0;
  T prev = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (truth_sorted[j]) {
      cum_fg += 1;
    } else {
      cum_bg += 1;
    }
    const T jac = T(1) - (gts - cum_fg) / (gts + cum_bg);
    w[j] = jac - prev;
    prev = jac;
  }
  return w;
}

template <typename T>
LovaszResult<T> lovasz_hinge_with_grad(std::span<const T> scores, std::span<const std::uint8_t> truth) {
  if (scores.empty()) throw ConfigError("lovasz_hinge: empty input");
  if (scores.size() != truth.size()) throw ConfigError("lovasz_hinge: scores and truth differ in length");
  const std::size_t n = scores.size();
  std::vector<T> errors(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(scores[i])) throw NumericalError("lovasz_hinge: non-finite score");
    const T sign = truth[i] ? T(1) : T(-1);
    errors[i] = std::max(T(1) - sign * scores[i], T(0));
  }

  LovaszResult<T> result;
  result.order.resize(n);
  std::iota(result.order.begin(), result.order.end(), std::uint32_t{0});
  std::stable_sort(result.order.begin(), result.order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return errors[a] > errors[b]; });

  std::vector<std::uint8_t> truth_sorted(n);
  for (std::size_t j = 0; j < n; ++j) truth_sorted[j] = truth[result.order[j]] ? 1 : 0;
  const auto weights = lovasz_jaccard_weights<T>(truth_sorted);

  result.grad.assign(n, T(0));
  for (std::size_t j = 0; j < n; ++j) {
    const auto i = result.order[j];
    if (errors[i] <= T(0)) break;  // sorted: the remaining hinges are inactive
    result.loss += errors[i] * weights[j];
    result.grad[i] = truth[i] ? -weights[j] : weights[j];
  }
  return result;
}

template <typename T>
T lovasz_hinge(std::span<const T> scores, std::span<const std::uint8_t> truth) {
  return lovasz_hinge_with_grad(scores, truth).loss;
}

}  // namespace embseg

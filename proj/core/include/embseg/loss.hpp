#pragma once

// Training objective: per-instance Gaussian mask loss optimized through the
// Lovasz hinge, seed-map regression and sigma smoothness, plus the regression
// and fixed-margin hinge baselines. All gradients are taken with respect to
// the raw (pre-activation) heads.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "embseg/geometry.hpp"
#include "embseg/heads.hpp"
#include "embseg/labels.hpp"

namespace embseg {

enum class SigmaMode { fixed, circular, elliptical };
enum class CenterMode { centroid, learnable };

std::string to_string(SigmaMode mode);
std::string to_string(CenterMode mode);
SigmaMode parse_sigma_mode(const std::string& s);
CenterMode parse_center_mode(const std::string& s);

struct LossWeights {
  double instance = 1.0;
  double seed = 1.0;
  double smooth = 10.0;
};

struct LossConfig {
  SigmaMode sigma_mode = SigmaMode::circular;
  /// Margin in pixels; used only when sigma_mode == fixed.
  double fixed_sigma_margin = 20.0;
  CenterMode center_mode = CenterMode::centroid;
  LossWeights weights;

  /// Sigma channels the network must emit for this configuration.
  int sigma_channels() const noexcept { return sigma_mode == SigmaMode::elliptical ? 2 : 1; }
  /// Normalized fixed sigma on a grid of height `grid_height`.
  double fixed_sigma(int grid_height) const;
  void validate() const;
};

struct InstanceDiagnostics {
  int id = 0;
  int class_id = 0;
  std::size_t pixels = 0;
  Point2<double> center;
  Sigma<double> sigma;
  /// Margin along x and y in normalized units (equal for circular sigma).
  Point2<double> margin;
  /// IoU of {phi > 0.5} against the instance mask.
  double iou = 0.0;
  double lovasz = 0.0;
};

struct LossReport {
  double total = 0.0;
  double instance = 0.0;
  double seed = 0.0;
  double smooth = 0.0;
  std::vector<InstanceDiagnostics> per_instance;
  /// Hash of every instance's hinge-error sort order; changes exactly when the
  /// piecewise-linear region of the Lovasz terms changes.
  std::uint64_t sort_signature = 0;
  /// Per-pixel seed target: phi of each foreground pixel under its own instance.
  std::vector<double> seed_target;
};

template <typename T>
struct LossResult {
  LossReport report;
  /// d total / d raw heads (empty fields when gradients were not requested).
  RawHeads<T> grad;
};

/// Mean of member coordinates; a constant target.
Point2<double> centroid(std::span<const std::size_t> members, const Field<double>& coords);

/// Mean of member embeddings. d center / d e_j = 1/|S_k| per axis.
template <typename T>
Point2<T> learnable_center(std::span<const Point2<T>> member_embeddings);

/// Arithmetic mean of member sigma values.
template <typename T>
T sigma_k(std::span<const T> member_sigmas);

/// w_instance * instance + w_seed * seed + w_smooth * smooth, with gradients.
template <typename T>
LossResult<T> total_loss(const RawHeads<T>& heads, const InstanceLabelMap& labels, const LossConfig& config,
                         bool with_grad = true);

/// total_loss with the seed target held at `seed_target` instead of being
/// recomputed. The returned gradient is the exact gradient of this function,
/// which is what finite differences must be compared against.
template <typename T>
LossResult<T> total_loss_frozen(const RawHeads<T>& heads, const InstanceLabelMap& labels, const LossConfig& config,
                                std::span<const double> seed_target, bool with_grad = true);

/// Individual terms (unit weights, no gradient). Each equals the matching
/// field of total_loss's report.
template <typename T>
LossReport instance_mask_loss(const RawHeads<T>& heads, const InstanceLabelMap& labels, const LossConfig& config);
template <typename T>
double seed_loss(const RawHeads<T>& heads, const InstanceLabelMap& labels, const LossConfig& config);

/// Per instance: mean over members (and sigma channels) of (sigma_i - sigma_k)^2,
/// summed over instances. `sigmas` holds activated sigma values (S, H, W).
double smoothness_loss(const Field<double>& sigmas, const InstanceLabelMap& labels);

/// Sum over foreground pixels of ||o_i - (C_k - x_i)||.
double regression_baseline_loss(const Field<double>& offsets, const InstanceLabelMap& labels,
                                const Field<double>& coords);

/// Sum over instances and members of max(||e_i - C_k|| - delta, 0), C_k the centroid.
double hinge_baseline_loss(const Field<double>& embeddings, const InstanceLabelMap& labels, double delta);

}  // namespace embseg

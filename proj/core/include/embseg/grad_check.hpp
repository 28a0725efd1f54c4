#pragma once

// Finite-difference verification of total_loss gradients with respect to the
// raw heads, at 64-bit precision.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "embseg/heads.hpp"
#include "embseg/labels.hpp"
#include "embseg/loss.hpp"

namespace embseg {

struct GradCheckCoordinate {
  std::string head;
  int channel = 0;
  int row = 0;
  int col = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct HeadGradCheck {
  std::string head;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  /// Coordinates whose perturbation changed a Lovasz sort order.
  std::size_t skipped = 0;
};

struct GradCheckReport {
  double tolerance = 0.0;
  std::array<HeadGradCheck, 3> heads;  // offset, sigma, seed
  std::vector<GradCheckCoordinate> offending;
  /// The seed term alone yields exactly zero offset and sigma gradients.
  bool seed_term_detached = false;

  bool passed() const noexcept { return offending.empty() && seed_term_detached; }
  double max_rel_error() const noexcept;
  std::string summary() const;
  /// Throws NumericalError listing the offending coordinates unless passed().
  void require() const;
};

/// Relative error |a - n| / max(|a|, |n|, floor).
inline constexpr double kGradCheckFloor = 1e-6;

GradCheckReport grad_check(const LossConfig& config, const RawHeads<double>& heads, const InstanceLabelMap& labels,
                           double tolerance = 1e-3, double step = 1e-5);

struct GradCheckScene {
  RawHeads<double> heads;
  InstanceLabelMap labels;
};

/// Random rectangles in z-order plus random heads with moderate magnitudes.
GradCheckScene random_grad_check_scene(GridShape shape, const LossConfig& config, int num_classes,
                                       std::uint64_t seed);

}  // namespace embseg

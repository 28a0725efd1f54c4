#pragma once

#include <cstdint>
#include <vector>

#include "embseg/grid.hpp"

namespace embseg {

/// Instance ids per pixel (0 = background, 1..K) plus the semantic class of each instance.
class InstanceLabelMap {
 public:
  InstanceLabelMap() = default;
  InstanceLabelMap(GridShape shape, std::vector<std::int32_t> labels, std::vector<int> class_of);

  /// Background-only map.
  explicit InstanceLabelMap(GridShape shape);

  GridShape shape() const noexcept { return shape_; }
  int num_instances() const noexcept { return static_cast<int>(class_of_.size()); }
  const std::vector<std::int32_t>& labels() const noexcept { return labels_; }
  std::int32_t at(int r, int c) const noexcept { return labels_[static_cast<std::size_t>(r) * shape_.width + c]; }

  /// Semantic class of instance `id` (1-based).
  int class_of(int id) const;
  const std::vector<int>& classes() const noexcept { return class_of_; }

  /// Row-major pixel indices of each instance; element k holds instance k+1.
  const std::vector<std::vector<std::size_t>>& members() const noexcept { return members_; }
  std::size_t instance_size(int id) const { return members_.at(static_cast<std::size_t>(id - 1)).size(); }

  /// Binary foreground mask of instance `id`.
  std::vector<std::uint8_t> mask(int id) const;

  /// Mirror left-right.
  InstanceLabelMap flipped_horizontal() const;

  /// Checks contiguity of ids, class coverage and non-empty instances.
  void validate() const;

  friend bool operator==(const InstanceLabelMap& a, const InstanceLabelMap& b) {
    return a.shape_ == b.shape_ && a.labels_ == b.labels_ && a.class_of_ == b.class_of_;
  }

 private:
  void index_members();

  GridShape shape_{};
  std::vector<std::int32_t> labels_;
  std::vector<int> class_of_;
  std::vector<std::vector<std::size_t>> members_;
};

/// Relabels arbitrary ids to contiguous 1..K in order of first appearance
/// (row-major), carrying classes along. `class_by_old_id` maps old id -> class.
InstanceLabelMap compact_labels(GridShape shape, const std::vector<std::int32_t>& raw_ids,
                                const std::vector<int>& class_by_old_id);

}  // namespace embseg

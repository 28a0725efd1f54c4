#include "embseg/labels.hpp"

#include <string>

#include "embseg/errors.hpp"

namespace embseg {

InstanceLabelMap::InstanceLabelMap(GridShape shape, std::vector<std::int32_t> labels, std::vector<int> class_of)
    : shape_(shape), labels_(std::move(labels)), class_of_(std::move(class_of)) {
  validate();
  index_members();
}

InstanceLabelMap::InstanceLabelMap(GridShape shape) : shape_(shape), labels_(shape.pixels(), 0) {
  shape.validate();
}

int InstanceLabelMap::class_of(int id) const {
  if (id < 1 || id > num_instances()) throw DataError("unknown instance id " + std::to_string(id));
  return class_of_[static_cast<std::size_t>(id - 1)];
}

std::vector<std::uint8_t> InstanceLabelMap::mask(int id) const {
  std::vector<std::uint8_t> m(labels_.size(), 0);
  for (auto i : members_.at(static_cast<std::size_t>(id - 1))) m[i] = 1;
  return m;
}

InstanceLabelMap InstanceLabelMap::flipped_horizontal() const {
  std::vector<std::int32_t> out(labels_.size());
  for (int r = 0; r < shape_.height; ++r) {
    for (int c = 0; c < shape_.width; ++c) {
      out[static_cast<std::size_t>(r) * shape_.width + c] = at(r, shape_.width - 1 - c);
    }
  }
  return InstanceLabelMap(shape_, std::move(out), class_of_);
}

void InstanceLabelMap::validate() const {
  shape_.validate();
  if (labels_.size() != shape_.pixels()) throw DataError("label map size does not match grid");
  const auto k = static_cast<std::int32_t>(class_of_.size());
  std::vector<std::size_t> counts(class_of_.size(), 0);
  for (auto id : labels_) {
    if (id < 0 || id > k) throw DataError("instance id " + std::to_string(id) + " out of range 0.." + std::to_string(k));
    if (id > 0) ++counts[static_cast<std::size_t>(id - 1)];
  }
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] == 0) throw DataError("instance " + std::to_string(i + 1) + " has no pixels");
    if (class_of_[i] < 0) throw DataError("instance " + std::to_string(i + 1) + " has a negative class");
  }
}

void InstanceLabelMap::index_members() {
  members_.assign(class_of_.size(), {});
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] > 0) members_[static_cast<std::size_t>(labels_[i] - 1)].push_back(i);
  }
}

InstanceLabelMap compact_labels(GridShape shape, const std::vector<std::int32_t>& raw_ids,
                                const std::vector<int>& class_by_old_id) {
  std::vector<std::int32_t> remap(class_by_old_id.size(), 0);
  std::vector<std::int32_t> out(raw_ids.size(), 0);
  std::vector<int> classes;
  for (std::size_t i = 0; i < raw_ids.size(); ++i) {
    const auto old = raw_ids[i];
    if (old <= 0) continue;
    if (static_cast<std::size_t>(old) >= class_by_old_id.size()) throw DataError("raw instance id without class");
    if (remap[static_cast<std::size_t>(old)] == 0) {
      classes.push_back(class_by_old_id[static_cast<std::size_t>(old)]);
      remap[static_cast<std::size_t>(old)] = static_cast<std::int32_t>(classes.size());
    }
    out[i] = remap[static_cast<std::size_t>(old)];
  }
  return InstanceLabelMap(shape, std::move(out), std::move(classes));
}

}  // namespace embseg

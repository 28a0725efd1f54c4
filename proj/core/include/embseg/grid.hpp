#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "embseg/errors.hpp"

namespace embseg {

/// Height/width of the common image grid, in pixels.
struct GridShape {
  int height = 0;
  int width = 0;

  std::size_t pixels() const noexcept {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }
  bool valid() const noexcept { return height >= 1 && width >= 1; }
  void validate() const {
    if (!valid()) {
      throw ConfigError("grid shape must be at least 1x1, got " + std::to_string(height) + "x" +
                        std::to_string(width));
    }
  }
  friend bool operator==(const GridShape&, const GridShape&) = default;
};

/// Dense channel-major array of shape (channels, height, width), row-major within a channel.
template <typename T>
class Field {
 public:
  Field() = default;
  Field(int channels, GridShape shape, T fill = T{})
      : channels_(channels), shape_(shape), data_(static_cast<std::size_t>(channels) * shape.pixels(), fill) {
    shape.validate();
    if (channels < 1) throw ConfigError("field needs at least one channel");
  }
  Field(int channels, GridShape shape, std::vector<T> data)
      : channels_(channels), shape_(shape), data_(std::move(data)) {
    shape.validate();
    if (channels < 1 || data_.size() != static_cast<std::size_t>(channels) * shape.pixels()) {
      throw DataError("field data size does not match its shape");
    }
  }

  int channels() const noexcept { return channels_; }
  GridShape shape() const noexcept { return shape_; }
  int height() const noexcept { return shape_.height; }
  int width() const noexcept { return shape_.width; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(int c, int r, int col) noexcept { return data_[index(c, r, col)]; }
  const T& operator()(int c, int r, int col) const noexcept { return data_[index(c, r, col)]; }

  std::span<T> channel(int c) noexcept { return {data_.data() + offset(c), shape_.pixels()}; }
  std::span<const T> channel(int c) const noexcept { return {data_.data() + offset(c), shape_.pixels()}; }

  std::vector<T>& data() noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  friend bool operator==(const Field&, const Field&) = default;

 private:
  std::size_t offset(int c) const noexcept { return static_cast<std::size_t>(c) * shape_.pixels(); }
  std::size_t index(int c, int r, int col) const noexcept {
    return offset(c) + static_cast<std::size_t>(r) * shape_.width + col;
  }

  int channels_ = 0;
  GridShape shape_{};
  std::vector<T> data_;
};

}  // namespace embseg

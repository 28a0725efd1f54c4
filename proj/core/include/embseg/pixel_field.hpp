#pragma once

// Directory serialization of named per-pixel arrays: one raw little-endian
// row-major binary file per field plus a JSON manifest.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "embseg/grid.hpp"

namespace embseg {

class PixelField {
 public:
  using Array = std::variant<Field<float>, Field<std::int32_t>>;

  static constexpr const char* kManifestName = "pixel_field.json";

  PixelField() = default;
  explicit PixelField(GridShape shape) : shape_(shape) { shape.validate(); }

  GridShape shape() const noexcept { return shape_; }

  void set(const std::string& name, Field<float> field);
  void set(const std::string& name, Field<std::int32_t> field);
  bool contains(const std::string& name) const { return fields_.count(name) > 0; }
  std::vector<std::string> names() const;

  const Field<float>& floats(const std::string& name) const;
  const Field<std::int32_t>& ints(const std::string& name) const;

  /// Free-form metadata stored in the manifest.
  nlohmann::json attributes = nlohmann::json::object();

  /// Writes the manifest and one `<name>.bin` per field into `dir` (created if needed).
  void save(const std::filesystem::path& dir) const;
  static PixelField load(const std::filesystem::path& dir);

 private:
  GridShape shape_{};
  std::map<std::string, Array> fields_;
};

}  // namespace embseg

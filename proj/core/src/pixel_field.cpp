#include "embseg/pixel_field.hpp"

#include <cctype>
#include <fstream>

#include "binary_io.hpp"

namespace embseg {

namespace fs = std::filesystem;

namespace {

template <typename T>
void check_shape(const Field<T>& f, GridShape shape, const std::string& name) {
  if (f.shape() != shape) throw ConfigError("pixel field '" + name + "' does not match the common grid");
}

bool valid_name(const std::string& name) {
  if (name.empty()) return false;
  for (char ch : name) {
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.')) return false;
  }
  return true;
}

}  // namespace

void PixelField::set(const std::string& name, Field<float> field) {
  if (!valid_name(name)) throw ConfigError("invalid pixel field name '" + name + "'");
  check_shape(field, shape_, name);
  fields_[name] = std::move(field);
}

void PixelField::set(const std::string& name, Field<std::int32_t> field) {
  if (!valid_name(name)) throw ConfigError("invalid pixel field name '" + name + "'");
  check_shape(field, shape_, name);
  fields_[name] = std::move(field);
}

std::vector<std::string> PixelField::names() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : fields_) out.push_back(k);
  return out;
}

const Field<float>& PixelField::floats(const std::string& name) const {
  auto it = fields_.find(name);
  if (it == fields_.end()) throw DataError("pixel field '" + name + "' missing");
  if (const auto* f = std::get_if<Field<float>>(&it->second)) return *f;
  throw DataError("pixel field '" + name + "' is not float32");
}

const Field<std::int32_t>& PixelField::ints(const std::string& name) const {
  auto it = fields_.find(name);
  if (it == fields_.end()) throw DataError("pixel field '" + name + "' missing");
  if (const auto* f = std::get_if<Field<std::int32_t>>(&it->second)) return *f;
  throw DataError("pixel field '" + name + "' is not int32");
}

void PixelField::save(const fs::path& dir) const {
  shape_.validate();
  fs::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "embseg.pixel_field";
  manifest["version"] = 1;
  manifest["shape"] = {shape_.height, shape_.width};
  manifest["byte_order"] = "little";
  manifest["layout"] = "row-major (channel, row, column)";
  manifest["fields"] = nlohmann::json::array();
  for (const auto& [name, array] : fields_) {
    const std::string file = name + ".bin";
    std::ofstream os(dir / file, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write " + (dir / file).string());
    int channels = 0;
    std::string dtype;
    if (const auto* f = std::get_if<Field<float>>(&array)) {
      detail::write_le<float>(os, f->data());
      channels = f->channels();
      dtype = "float32";
    } else {
      const auto& g = std::get<Field<std::int32_t>>(array);
      detail::write_le<std::int32_t>(os, g.data());
      channels = g.channels();
      dtype = "int32";
    }
    manifest["fields"].push_back({{"name", name}, {"dtype", dtype}, {"channels", channels}, {"file", file}});
  }
  manifest["attributes"] = attributes;
  std::ofstream ms(dir / kManifestName, std::ios::trunc);
  if (!ms) throw DataError("cannot write manifest in " + dir.string());
  ms << manifest.dump(2) << '\n';
}

PixelField PixelField::load(const fs::path& dir) {
  std::ifstream ms(dir / kManifestName);
  if (!ms) throw DataError("no pixel field manifest in " + dir.string());
  nlohmann::json manifest;
  try {
    ms >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed pixel field manifest in " + dir.string() + ": " + e.what());
  }
  if (manifest.value("format", "") != "embseg.pixel_field") throw DataError("not a pixel field manifest: " + dir.string());
  const auto& shp = manifest.at("shape");
  PixelField out(GridShape{shp.at(0).get<int>(), shp.at(1).get<int>()});
  out.attributes = manifest.value("attributes", nlohmann::json::object());
  for (const auto& entry : manifest.at("fields")) {
    const auto name = entry.at("name").get<std::string>();
    const auto dtype = entry.at("dtype").get<std::string>();
    const int channels = entry.at("channels").get<int>();
    std::ifstream is(dir / entry.at("file").get<std::string>(), std::ios::binary);
    if (!is) throw DataError("missing data file for field '" + name + "' in " + dir.string());
    const std::size_t count = static_cast<std::size_t>(channels) * out.shape_.pixels();
    if (dtype == "float32") {
      std::vector<float> data(count);
      detail::read_le<float>(is, data);
      out.set(name, Field<float>(channels, out.shape_, std::move(data)));
    } else if (dtype == "int32") {
      std::vector<std::int32_t> data(count);
      detail::read_le<std::int32_t>(is, data);
      out.set(name, Field<std::int32_t>(channels, out.shape_, std::move(data)));
    } else {
      throw DataError("unsupported dtype '" + dtype + "' for field '" + name + "'");
    }
  }
  return out;
}

}  // namespace embseg

#include "embseg/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "binary_io.hpp"
#include "embseg/serialization.hpp"

namespace embseg {

namespace {
constexpr char kMagic[8] = {'E', 'M', 'B', 'S', 'E', 'G', 'C', 'K'};
}

const std::vector<float>* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, v] : arrays) {
    if (n == name) return &v;
  }
  return nullptr;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  nlohmann::json header;
  header["version"] = kCheckpointVersion;
  header["model_config"] = model_config;
  header["meta"] = meta;
  header["arrays"] = nlohmann::json::array();
  for (const auto& [name, data] : arrays) header["arrays"].push_back({{"name", name}, {"count", data.size()}});
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write checkpoint " + path.string());
    os.write(kMagic, sizeof(kMagic));
    detail::write_le_value<std::uint32_t>(os, kCheckpointVersion);
    detail::write_le_value<std::uint64_t>(os, text.size());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, data] : arrays) detail::write_le<float>(os, data);
    if (!os) throw DataError("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw DataError(path.string() + " is not an embseg checkpoint");
  const auto version = detail::read_le_value<std::uint32_t>(is);
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint version " + std::to_string(version) + " is not supported");
  }
  const auto len = detail::read_le_value<std::uint64_t>(is);
  if (len > (1ull << 30)) throw DataError("checkpoint header is implausibly large");
  std::string text(len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(len));
  if (!is) throw DataError("truncated checkpoint header");

  Checkpoint ckpt;
  try {
    const auto header = nlohmann::json::parse(text);
    ckpt.model_config = header.at("model_config").get<ModelConfig>();
    ckpt.meta = header.value("meta", nlohmann::json::object());
    for (const auto& a : header.at("arrays")) {
      std::vector<float> data(a.at("count").get<std::size_t>());
      detail::read_le<float>(is, data);
      ckpt.arrays.emplace_back(a.at("name").get<std::string>(), std::move(data));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed checkpoint header: " + std::string(e.what()));
  }
  return ckpt;
}

Checkpoint make_checkpoint(const SpatialEmbeddingNet& net, nlohmann::json meta) {
  Checkpoint ckpt;
  ckpt.model_config = net.config();
  ckpt.meta = std::move(meta);
  for (const auto* p : net.parameters()) ckpt.arrays.emplace_back(p->name, p->value);
  return ckpt;
}

SpatialEmbeddingNet restore_network(const Checkpoint& ckpt) {
  SpatialEmbeddingNet net(ckpt.model_config);
  for (auto* p : net.parameters()) {
    const auto* data = ckpt.find(p->name);
    if (!data) throw DataError("checkpoint lacks parameter '" + p->name + "'");
    if (data->size() != p->value.size()) throw DataError("checkpoint parameter '" + p->name + "' has the wrong size");
    p->value = *data;
  }
  return net;
}

}  // namespace embseg

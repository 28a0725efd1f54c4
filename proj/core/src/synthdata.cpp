#include "embseg/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include "embseg/errors.hpp"
#include "embseg/image_io.hpp"
#include "embseg/pixel_field.hpp"

namespace embseg {
namespace {

// mt19937_64 output is fixed by the standard; the distributions are not, so
// the variates are derived here to keep scenes identical across toolchains.
class SceneRng {
 public:
  SceneRng(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    engine_.seed(seq);
  }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double uniform(const Interval& i) { return uniform(i.min, i.max); }
  int integer(int lo, int hi) {
    return lo + static_cast<int>(engine_() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

struct Shape {
  int class_id = 0;
  double cx = 0, cy = 0;
  double radius = 0;      // disk radius or bar half-length
  double half_width = 0;  // bars only
  double angle = 0;
  bool small = false;
  std::array<float, 3> color{};

  bool contains(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    if (class_id == 0) return dx * dx + dy * dy <= radius * radius;
    const double c = std::cos(angle), s = std::sin(angle);
    const double u = c * dx + s * dy;
    const double v = -s * dx + c * dy;
    return std::abs(u) <= radius && std::abs(v) <= half_width;
  }
};

void check_interval(const Interval& i, const char* what) {
  if (!(i.min > 0.0) || !(i.max >= i.min) || !std::isfinite(i.max)) {
    throw ConfigError(std::string(what) + " must satisfy 0 < min <= max");
  }
}

float quantize(double v) {
  return static_cast<float>(std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0);
}

std::array<float, 3> random_color(SceneRng& rng) {
  return {static_cast<float>(rng.uniform(0.1, 0.9)), static_cast<float>(rng.uniform(0.1, 0.9)),
          static_cast<float>(rng.uniform(0.1, 0.9))};
}

float color_distance(const std::array<float, 3>& a, const std::array<float, 3>& b) {
  float d = 0.0f;
  for (int c = 0; c < 3; ++c) d = std::max(d, std::abs(a[c] - b[c]));
  return d;
}

// Paints shapes in z-order; returns per-pixel shape index (-1 = background).
std::vector<int> paint(const std::vector<Shape>& shapes, GridShape shape) {
  std::vector<int> owner(shape.pixels(), -1);
  for (std::size_t k = 0; k < shapes.size(); ++k) {
    const Shape& s = shapes[k];
    const double reach = std::max(s.radius, s.half_width) + 1.0;
    const int r0 = std::max(0, static_cast<int>(std::floor(s.cy - reach)));
    const int r1 = std::min(shape.height - 1, static_cast<int>(std::ceil(s.cy + reach)));
    const int c0 = std::max(0, static_cast<int>(std::floor(s.cx - reach)));
    const int c1 = std::min(shape.width - 1, static_cast<int>(std::ceil(s.cx + reach)));
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        if (s.contains(c, r)) owner[static_cast<std::size_t>(r) * shape.width + c] = static_cast<int>(k);
      }
    }
  }
  return owner;
}

void fnv(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
}

}  // namespace

const std::vector<std::string>& SceneSpec::class_names() {
  static const std::vector<std::string> names{"disk", "bar"};
  return names;
}

void SceneSpec::validate() const {
  shape.validate();
  if (num_classes < 1 || num_classes > 2) throw ConfigError("num_classes must be 1 or 2");
  if (min_instances < 0 || max_instances < min_instances) {
    throw ConfigError("instance range must satisfy 0 <= min <= max");
  }
  if (max_instances < 1) throw ConfigError("instance range admits no instance");
  check_interval(small_radius, "small_radius");
  check_interval(large_radius, "large_radius");
  if (num_classes > 1) {
    check_interval(bar_elongation, "bar_elongation");
    if (bar_elongation.min < 1.0) throw ConfigError("bar_elongation must be >= 1");
  }
  if (!(small_fraction >= 0.0 && small_fraction <= 1.0)) throw ConfigError("small_fraction must be in [0, 1]");
  if (!(adjacent_small_prob >= 0.0 && adjacent_small_prob <= 1.0)) {
    throw ConfigError("adjacent_small_prob must be in [0, 1]");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw ConfigError("noise_sigma must be >= 0");
  if (min_visible_pixels < 1) throw ConfigError("min_visible_pixels must be >= 1");
  const double span = std::min(shape.height, shape.width);
  const double smallest = std::min(small_fraction > 0.0 ? small_radius.min : large_radius.min,
                                   small_fraction < 1.0 ? large_radius.min : small_radius.min);
  if (2.0 * smallest > span) throw ConfigError("no instance fits the grid");
}

InstanceScene generate(const SceneSpec& spec, std::uint64_t index) {
  spec.validate();
  SceneRng rng(spec.seed, index);
  const GridShape shape = spec.shape;

  InstanceScene scene;
  scene.background = random_color(rng);

  const int count = rng.integer(spec.min_instances, spec.max_instances);
  std::vector<Shape> shapes;
  for (int k = 0; k < count; ++k) {
    Shape s;
    s.class_id = spec.num_classes > 1 ? rng.integer(0, spec.num_classes - 1) : 0;
    s.small = rng.uniform() < spec.small_fraction;
    s.radius = rng.uniform(s.small ? spec.small_radius : spec.large_radius);
    if (s.class_id == 1) {
      const double elongation = rng.uniform(spec.bar_elongation);
      s.half_width = std::max(0.75, s.radius / elongation);
      s.angle = rng.uniform(0.0, std::numbers::pi);
    }
    std::vector<const Shape*> small_peers;
    for (const Shape& o : shapes) {
      if (o.small) small_peers.push_back(&o);
    }
    const bool adjacent = s.small && !small_peers.empty() && rng.uniform() < spec.adjacent_small_prob;
    if (adjacent) {
      const Shape& peer = *small_peers[static_cast<std::size_t>(rng.integer(0, static_cast<int>(small_peers.size()) - 1))];
      const double dist = peer.radius + s.radius + rng.uniform(0.5, 2.5);
      const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
      s.cx = std::clamp(peer.cx + dist * std::cos(theta), 0.0, shape.width - 1.0);
      s.cy = std::clamp(peer.cy + dist * std::sin(theta), 0.0, shape.height - 1.0);
    } else {
      s.cx = rng.uniform(0.0, shape.width - 1.0);
      s.cy = rng.uniform(0.0, shape.height - 1.0);
    }
    do {
      s.color = random_color(rng);
    } while (color_distance(s.color, scene.background) < 0.25f);
    shapes.push_back(s);
  }

  // Drop instances occluded below the visibility threshold and repaint until stable.
  std::vector<int> owner;
  for (;;) {
    owner = paint(shapes, shape);
    std::vector<int> visible(shapes.size(), 0);
    for (int o : owner) {
      if (o >= 0) ++visible[static_cast<std::size_t>(o)];
    }
    std::vector<Shape> kept;
    for (std::size_t k = 0; k < shapes.size(); ++k) {
      if (visible[k] >= spec.min_visible_pixels) kept.push_back(shapes[k]);
    }
    if (kept.size() == shapes.size()) break;
    shapes = std::move(kept);
  }

  std::vector<std::int32_t> labels(shape.pixels(), 0);
  std::vector<int> classes;
  for (std::size_t i = 0; i < owner.size(); ++i) labels[i] = owner[i] + 1;
  for (const Shape& s : shapes) {
    classes.push_back(s.class_id);
    scene.colors.push_back(s.color);
    scene.radius.push_back(s.radius);
  }
  scene.labels = InstanceLabelMap(shape, std::move(labels), std::move(classes));

  scene.image = Field<float>(3, shape);
  for (int r = 0; r < shape.height; ++r) {
    for (int c = 0; c < shape.width; ++c) {
      const int o = owner[static_cast<std::size_t>(r) * shape.width + c];
      const auto& color = o >= 0 ? shapes[static_cast<std::size_t>(o)].color : scene.background;
      for (int ch = 0; ch < 3; ++ch) {
        scene.image(ch, r, c) = quantize(color[ch] + spec.noise_sigma * rng.normal());
      }
    }
  }
  return scene;
}

std::uint64_t scene_checksum(const InstanceScene& scene) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const GridShape shape = scene.labels.shape();
  const std::int32_t dims[3] = {scene.image.channels(), shape.height, shape.width};
  fnv(h, dims, sizeof(dims));
  for (float v : scene.image.data()) {
    const auto level = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
    fnv(h, &level, 1);
  }
  for (std::int32_t id : scene.labels.labels()) {
    unsigned char b[4] = {static_cast<unsigned char>(id), static_cast<unsigned char>(id >> 8),
                          static_cast<unsigned char>(id >> 16), static_cast<unsigned char>(id >> 24)};
    fnv(h, b, 4);
  }
  for (int cls : scene.labels.classes()) {
    const auto b = static_cast<unsigned char>(cls);
    fnv(h, &b, 1);
  }
  return h;
}

std::string checksum_hex(std::uint64_t checksum) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << checksum;
  return out.str();
}

std::string scene_name(std::uint64_t index) {
  std::ostringstream out;
  out << "scene_" << std::setw(6) << std::setfill('0') << index;
  return out.str();
}

void to_json(nlohmann::json& j, const SceneSpec& s) {
  j = nlohmann::json{{"height", s.shape.height},
                     {"width", s.shape.width},
                     {"num_classes", s.num_classes},
                     {"min_instances", s.min_instances},
                     {"max_instances", s.max_instances},
                     {"small_fraction", s.small_fraction},
                     {"small_radius", {s.small_radius.min, s.small_radius.max}},
                     {"large_radius", {s.large_radius.min, s.large_radius.max}},
                     {"bar_elongation", {s.bar_elongation.min, s.bar_elongation.max}},
                     {"adjacent_small_prob", s.adjacent_small_prob},
                     {"noise_sigma", s.noise_sigma},
                     {"min_visible_pixels", s.min_visible_pixels},
                     {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, SceneSpec& s) {
  const SceneSpec d;
  auto interval = [&](const char* key, Interval def) {
    if (!j.contains(key)) return def;
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != 2) throw ConfigError(std::string(key) + " must be [min, max]");
    return Interval{a[0].get<double>(), a[1].get<double>()};
  };
  try {
    s.shape.height = j.value("height", d.shape.height);
    s.shape.width = j.value("width", d.shape.width);
    s.num_classes = j.value("num_classes", d.num_classes);
    s.min_instances = j.value("min_instances", d.min_instances);
    s.max_instances = j.value("max_instances", d.max_instances);
    s.small_fraction = j.value("small_fraction", d.small_fraction);
    s.small_radius = interval("small_radius", d.small_radius);
    s.large_radius = interval("large_radius", d.large_radius);
    s.bar_elongation = interval("bar_elongation", d.bar_elongation);
    s.adjacent_small_prob = j.value("adjacent_small_prob", d.adjacent_small_prob);
    s.noise_sigma = j.value("noise_sigma", d.noise_sigma);
    s.min_visible_pixels = j.value("min_visible_pixels", d.min_visible_pixels);
    s.seed = j.value("seed", d.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad scene spec: ") + e.what());
  }
  s.validate();
}

namespace {

int val_count(int n, double val_fraction) {
  if (n < 1) throw ConfigError("dataset needs at least one scene");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must be in [0, 1)");
  return static_cast<int>(std::lround(n * val_fraction));
}

}  // namespace

nlohmann::json dataset_manifest(const SceneSpec& spec, int n, double val_fraction) {
  spec.validate();
  const int n_val = val_count(n, val_fraction);
  nlohmann::json scenes = nlohmann::json::array();
  for (int i = 0; i < n; ++i) {
    const auto index = static_cast<std::uint64_t>(i);
    scenes.push_back({{"index", index},
                      {"name", scene_name(index)},
                      {"split", i >= n - n_val ? "val" : "train"},
                      {"checksum", checksum_hex(scene_checksum(generate(spec, index)))}});
  }
  return {{"format", "embseg.dataset"},
          {"version", 1},
          {"spec", spec},
          {"classes", SceneSpec::class_names()},
          {"val_fraction", val_fraction},
          {"scenes", scenes}};
}

Dataset generate_dataset(const SceneSpec& spec, int n, double val_fraction) {
  spec.validate();
  const int n_val = val_count(n, val_fraction);
  Dataset ds;
  ds.spec = spec;
  for (int i = 0; i < n; ++i) {
    const auto index = static_cast<std::uint64_t>(i);
    if (i >= n - n_val) {
      ds.val.push_back(generate(spec, index));
      ds.val_names.push_back(scene_name(index));
    } else {
      ds.train.push_back(generate(spec, index));
      ds.train_names.push_back(scene_name(index));
    }
  }
  return ds;
}

void write_dataset(const std::filesystem::path& dir, const SceneSpec& spec, int n, double val_fraction) {
  const nlohmann::json manifest = dataset_manifest(spec, n, val_fraction);
  const auto scenes_dir = dir / "scenes";
  std::filesystem::create_directories(scenes_dir);
  for (const auto& entry : manifest.at("scenes")) {
    const auto index = entry.at("index").get<std::uint64_t>();
    const std::string name = entry.at("name");
    const InstanceScene scene = generate(spec, index);
    write_png(scenes_dir / (name + ".png"), to_png8(scene.image));
    PixelField field(scene.labels.shape());
    field.set("labels", Field<std::int32_t>(1, scene.labels.shape(), scene.labels.labels()));
    field.attributes["class_of"] = scene.labels.classes();
    field.attributes["radius"] = scene.radius;
    field.save(scenes_dir / name);
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) throw DataError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw DataError("no dataset manifest in " + dir.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("unreadable dataset manifest: ") + e.what());
  }
  if (manifest.value("format", "") != "embseg.dataset") throw DataError("not a dataset manifest");
  Dataset ds;
  ds.spec = manifest.at("spec").get<SceneSpec>();
  for (const auto& entry : manifest.at("scenes")) {
    const std::string name = entry.at("name");
    const auto scene_dir = dir / "scenes" / name;
    InstanceScene scene;
    scene.image = from_png(read_png(dir / "scenes" / (name + ".png")));
    const PixelField field = PixelField::load(scene_dir);
    if (scene.image.shape() != field.shape() || scene.image.channels() != 3) {
      throw DataError("scene " + name + " image and labels disagree in shape");
    }
    scene.labels = InstanceLabelMap(field.shape(), field.ints("labels").data(),
                                    field.attributes.at("class_of").get<std::vector<int>>());
    if (field.attributes.contains("radius")) scene.radius = field.attributes["radius"].get<std::vector<double>>();
    if (checksum_hex(scene_checksum(scene)) != entry.at("checksum").get<std::string>()) {
      throw DataError("checksum mismatch for " + name);
    }
    if (entry.at("split") == "val") {
      ds.val.push_back(std::move(scene));
      ds.val_names.push_back(name);
    } else {
      ds.train.push_back(std::move(scene));
      ds.train_names.push_back(name);
    }
  }
  return ds;
}

bool verify_manifest(const nlohmann::json& manifest) {
  const auto spec = manifest.at("spec").get<SceneSpec>();
  for (const auto& entry : manifest.at("scenes")) {
    const auto scene = generate(spec, entry.at("index").get<std::uint64_t>());
    if (checksum_hex(scene_checksum(scene)) != entry.at("checksum").get<std::string>()) return false;
  }
  return true;
}

}  // namespace embseg

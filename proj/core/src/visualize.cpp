#include "embseg/visualize.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "embseg/errors.hpp"
#include "embseg/geometry.hpp"

namespace embseg {
namespace {

Field<float> ramp(GridShape shape, const std::vector<double>& t) {
  Field<float> out(3, shape);
  for (std::size_t i = 0; i < t.size(); ++i) {
    float rgb[3];
    hsv_to_rgb(240.0 * std::clamp(t[i], 0.0, 1.0), 1.0, 1.0, rgb);
    for (int c = 0; c < 3; ++c) out.channel(c)[i] = rgb[c];
  }
  return out;
}

std::vector<double> mean_sigma(const ModelOutput& output) {
  const std::size_t n = output.shape().pixels();
  std::vector<double> s(n, 0.0);
  const int ch = output.sigma_channels();
  for (int c = 0; c < ch; ++c) {
    for (std::size_t i = 0; i < n; ++i) s[i] += output.sigmas.channel(c)[i] / ch;
  }
  return s;
}

}  // namespace

void hsv_to_rgb(double h, double s, double v, float rgb[3]) {
  h = std::fmod(h, 360.0);
  if (h < 0) h += 360.0;
  const double c = v * s;
  const double x = c * (1.0 - std::abs(std::fmod(h / 60.0, 2.0) - 1.0));
  const double m = v - c;
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(h / 60.0)) {
    case 0: r = c, g = x; break;
    case 1: r = x, g = c; break;
    case 2: g = c, b = x; break;
    case 3: g = x, b = c; break;
    case 4: r = x, b = c; break;
    default: r = c, b = x; break;
  }
  rgb[0] = static_cast<float>(r + m);
  rgb[1] = static_cast<float>(g + m);
  rgb[2] = static_cast<float>(b + m);
}

Field<float> offset_color_map(const ModelOutput& output) {
  const GridShape shape = output.shape();
  const std::size_t n = shape.pixels();
  const auto ox = output.offsets.channel(0);
  const auto oy = output.offsets.channel(1);
  double peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) peak = std::max(peak, std::hypot(double(ox[i]), double(oy[i])));
  Field<float> out(3, shape);
  for (std::size_t i = 0; i < n; ++i) {
    const double angle = std::atan2(double(oy[i]), double(ox[i])) * 180.0 / std::numbers::pi;
    const double sat = peak > 0.0 ? std::hypot(double(ox[i]), double(oy[i])) / peak : 0.0;
    float rgb[3];
    hsv_to_rgb(angle, sat, 1.0, rgb);
    for (int c = 0; c < 3; ++c) out.channel(c)[i] = rgb[c];
  }
  return out;
}

Field<float> sigma_heat_map(const ModelOutput& output) {
  auto s = mean_sigma(output);
  const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
  const double a = *lo, b = *hi;
  for (double& v : s) v = b > a ? (v - a) / (b - a) : 0.0;
  return ramp(output.shape(), s);
}

Field<float> margin_heat_map(const ModelOutput& output, double max_margin_px) {
  if (!(max_margin_px > 0.0)) throw ConfigError("max_margin_px must be positive");
  auto s = mean_sigma(output);
  const int height = output.shape().height;
  for (double& v : s) v = normalized_to_pixels(margin_of(v), height) / max_margin_px;
  return ramp(output.shape(), s);
}

Field<float> seed_map(const ModelOutput& output, int class_id) {
  if (class_id < 0 || class_id >= output.num_classes()) throw ConfigError("seed_map: class out of range");
  Field<float> out(1, output.shape());
  const auto src = output.seeds.channel(class_id);
  std::copy(src.begin(), src.end(), out.data().begin());
  return out;
}

}  // namespace embseg

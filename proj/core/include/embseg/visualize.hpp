#pragma once

// Static renderings of network fields as RGB/gray images in [0, 1].

#include "embseg/grid.hpp"
#include "embseg/heads.hpp"

namespace embseg {

/// Hue encodes the offset angle, saturation its magnitude relative to the largest one.
Field<float> offset_color_map(const ModelOutput& output);

/// Per-pixel mean sigma, normalized to the field's range; low is red, high is blue.
Field<float> sigma_heat_map(const ModelOutput& output);

/// Per-pixel margin in pixels on a fixed [0, max_margin_px] scale; low is red, high is blue.
Field<float> margin_heat_map(const ModelOutput& output, double max_margin_px = 32.0);

/// Seed map of one class as gray levels.
Field<float> seed_map(const ModelOutput& output, int class_id);

/// h in degrees, s and v in [0, 1].
void hsv_to_rgb(double h, double s, double v, float rgb[3]);

}  // namespace embseg

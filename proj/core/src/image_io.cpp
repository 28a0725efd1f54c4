#include "embseg/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <csetjmp>
#include <cmath>
#include <cstdio>
#include <memory>
#include <string>

#include "embseg/errors.hpp"

namespace embseg {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// libpng reports errors by longjmp to the setjmp point of the calling
// function; the message is kept here and turned into an exception there.
thread_local std::string png_error_message;

void png_fail(png_structp png, png_const_charp msg) {
  png_error_message = msg ? msg : "unknown error";
  png_longjmp(png, 1);
}

void png_warn(png_structp, png_const_charp) {}

}  // namespace

void write_png(const std::filesystem::path& path, const PngImage& image) {
  if (image.channels != 1 && image.channels != 3) throw ConfigError("write_png: 1 or 3 channels supported");
  if (image.bit_depth != 8 && image.bit_depth != 16) throw ConfigError("write_png: 8 or 16 bits supported");
  const std::size_t row_samples = static_cast<std::size_t>(image.width) * image.channels;
  if (image.samples.size() != row_samples * image.height) throw ConfigError("write_png: sample count mismatch");

  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw DataError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};

  const std::size_t bytes_per_sample = image.bit_depth / 8;
  std::vector<png_byte> row(row_samples * bytes_per_sample);
  if (setjmp(png_jmpbuf(png))) throw DataError("png write failed: " + png_error_message);

  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height),
               image.bit_depth, image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < image.height; ++r) {
    const std::uint16_t* src = image.samples.data() + static_cast<std::size_t>(r) * row_samples;
    for (std::size_t i = 0; i < row_samples; ++i) {
      if (bytes_per_sample == 1) {
        row[i] = static_cast<png_byte>(src[i]);
      } else {
        row[2 * i] = static_cast<png_byte>(src[i] >> 8);  // PNG is big-endian
        row[2 * i + 1] = static_cast<png_byte>(src[i] & 0xff);
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
}

PngImage read_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw DataError("cannot open " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw DataError(path.string() + " is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};

  PngImage out;
  std::vector<png_byte> row;
  if (setjmp(png_jmpbuf(png))) throw DataError("png read failed for " + path.string() + ": " + png_error_message);

  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  depth = png_get_bit_depth(png, info);
  out.bit_depth = depth;
  if (out.channels != 1 && out.channels != 3) throw DataError("unsupported PNG channel layout in " + path.string());

  const std::size_t rowbytes = png_get_rowbytes(png, info);
  row.resize(rowbytes);
  const std::size_t row_samples = static_cast<std::size_t>(out.width) * out.channels;
  out.samples.resize(row_samples * out.height);
  for (int r = 0; r < out.height; ++r) {
    png_read_row(png, row.data(), nullptr);
    std::uint16_t* dst = out.samples.data() + static_cast<std::size_t>(r) * row_samples;
    for (std::size_t i = 0; i < row_samples; ++i) {
      dst[i] = depth == 16 ? static_cast<std::uint16_t>((row[2 * i] << 8) | row[2 * i + 1]) : row[i];
    }
  }
  png_read_end(png, nullptr);
  return out;
}

PngImage to_png8(const Field<float>& image) {
  if (image.channels() != 1 && image.channels() != 3) throw ConfigError("to_png8: 1 or 3 channels supported");
  PngImage out{image.width(), image.height(), image.channels(), 8, {}};
  out.samples.resize(image.size());
  for (int r = 0; r < image.height(); ++r) {
    for (int c = 0; c < image.width(); ++c) {
      for (int ch = 0; ch < image.channels(); ++ch) {
        const float v = std::clamp(image(ch, r, c), 0.0f, 1.0f);
        out.samples[(static_cast<std::size_t>(r) * image.width() + c) * image.channels() + ch] =
            static_cast<std::uint16_t>(std::lround(v * 255.0f));
      }
    }
  }
  return out;
}

Field<float> from_png(const PngImage& png) {
  Field<float> out(png.channels, GridShape{png.height, png.width});
  const float scale = png.bit_depth == 16 ? 65535.0f : 255.0f;
  for (int r = 0; r < png.height; ++r) {
    for (int c = 0; c < png.width; ++c) {
      for (int ch = 0; ch < png.channels; ++ch) {
        out(ch, r, c) = png.samples[(static_cast<std::size_t>(r) * png.width + c) * png.channels + ch] / scale;
      }
    }
  }
  return out;
}

PngImage label_png16(GridShape shape, const std::vector<std::int32_t>& labels) {
  if (labels.size() != shape.pixels()) throw ConfigError("label_png16: size mismatch");
  PngImage out{shape.width, shape.height, 1, 16, {}};
  out.samples.reserve(labels.size());
  for (auto v : labels) {
    if (v < 0 || v > 65535) throw ConfigError("label_png16: id out of 16-bit range");
    out.samples.push_back(static_cast<std::uint16_t>(v));
  }
  return out;
}

std::vector<std::int32_t> labels_from_png16(const PngImage& png) {
  if (png.channels != 1) throw DataError("label image must be single-channel");
  return {png.samples.begin(), png.samples.end()};
}

}  // namespace embseg

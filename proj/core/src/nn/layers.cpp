#include "embseg/nn/layers.hpp"

#include <Eigen/Core>
#include <cmath>

namespace embseg::nn {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

Parameter make_param(std::string name, std::size_t size) {
  return {std::move(name), std::vector<float>(size, 0.0f), std::vector<float>(size, 0.0f)};
}

void he_normal(Parameter& p, int fan_in, float gain, std::mt19937_64& rng) {
  std::normal_distribution<float> dist(0.0f, gain * std::sqrt(2.0f / static_cast<float>(fan_in)));
  for (auto& v : p.value) v = dist(rng);
}

}  // namespace

void im2col(const float* x, int channels, int height, int width, const ConvGeometry& g, float* col) {
  const int ho = g.conv_out(height);
  const int wo = g.conv_out(width);
  const int k = g.kernel;
  for (int c = 0; c < channels; ++c) {
    const float* xc = x + static_cast<std::size_t>(c) * height * width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        float* row = col + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * g.stride - g.padding + ky * g.dilation;
          float* out = row + static_cast<std::size_t>(oy) * wo;
          if (iy < 0 || iy >= height) {
            std::fill(out, out + wo, 0.0f);
            continue;
          }
          const float* src = xc + static_cast<std::size_t>(iy) * width;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * g.stride - g.padding + kx * g.dilation;
            out[ox] = (ix >= 0 && ix < width) ? src[ix] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im(const float* col, int channels, int height, int width, const ConvGeometry& g, float* x) {
  const int ho = g.conv_out(height);
  const int wo = g.conv_out(width);
  const int k = g.kernel;
  for (int c = 0; c < channels; ++c) {
    float* xc = x + static_cast<std::size_t>(c) * height * width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const float* row = col + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * g.stride - g.padding + ky * g.dilation;
          if (iy < 0 || iy >= height) continue;
          float* dst = xc + static_cast<std::size_t>(iy) * width;
          const float* in = row + static_cast<std::size_t>(oy) * wo;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * g.stride - g.padding + kx * g.dilation;
            if (ix >= 0 && ix < width) dst[ix] += in[ox];
          }
        }
      }
    }
  }
}

Conv2d::Conv2d(std::string name, int in_channels, int out_channels, ConvGeometry geometry)
    : name_(std::move(name)), in_(in_channels), out_(out_channels), g_(geometry) {
  weight_ = make_param(name_ + ".weight", static_cast<std::size_t>(out_) * in_ * g_.kernel * g_.kernel);
  bias_ = make_param(name_ + ".bias", static_cast<std::size_t>(out_));
}

void Conv2d::init_he(std::mt19937_64& rng, float gain) {
  he_normal(weight_, in_ * g_.kernel * g_.kernel, gain, rng);
  std::fill(bias_.value.begin(), bias_.value.end(), 0.0f);
}

Field<float> Conv2d::forward(const Field<float>& x, ConvCache* cache) const {
  if (x.channels() != in_) throw ConfigError(name_ + ": expected " + std::to_string(in_) + " input channels");
  const int ho = g_.conv_out(x.height());
  const int wo = g_.conv_out(x.width());
  const int kk = in_ * g_.kernel * g_.kernel;
  const int p = ho * wo;
  Field<float> y(out_, GridShape{ho, wo});

  const bool pointwise = g_.kernel == 1 && g_.stride == 1 && g_.padding == 0;
  std::vector<float> col_local;
  const float* col_ptr = x.data().data();
  if (!pointwise) {
    std::vector<float>& col = cache ? cache->col : col_local;
    col.resize(static_cast<std::size_t>(kk) * p);
    im2col(x.data().data(), in_, x.height(), x.width(), g_, col.data());
    col_ptr = col.data();
  }
  ConstMapMat w(weight_.value.data(), out_, kk);
  ConstMapMat c(col_ptr, kk, p);
  MapMat out(y.data().data(), out_, p);
  out.noalias() = w * c;
  for (int o = 0; o < out_; ++o) out.row(o).array() += bias_.value[static_cast<std::size_t>(o)];
  if (cache) cache->input = x;
  return y;
}

Field<float> Conv2d::backward(const Field<float>& dy, const ConvCache& cache) {
  const auto& x = cache.input;
  const int kk = in_ * g_.kernel * g_.kernel;
  const int p = dy.height() * dy.width();
  const bool pointwise = g_.kernel == 1 && g_.stride == 1 && g_.padding == 0;
  const float* col_ptr = pointwise ? x.data().data() : cache.col.data();

  ConstMapMat d(dy.data().data(), out_, p);
  ConstMapMat c(col_ptr, kk, p);
  MapMat dw(weight_.grad.data(), out_, kk);
  dw.noalias() += d * c.transpose();
  // Sequential sums: vectorized reductions round differently depending on buffer alignment.
  for (int o = 0; o < out_; ++o) {
    const float* row = dy.data().data() + static_cast<std::size_t>(o) * p;
    float s = 0.0f;
    for (int i = 0; i < p; ++i) s += row[i];
    bias_.grad[static_cast<std::size_t>(o)] += s;
  }

  ConstMapMat w(weight_.value.data(), out_, kk);
  Field<float> dx(in_, x.shape());
  if (pointwise) {
    MapMat(dx.data().data(), in_, p).noalias() = w.transpose() * d;
  } else {
    RowMat dcol = w.transpose() * d;
    col2im(dcol.data(), in_, x.height(), x.width(), g_, dx.data().data());
  }
  return dx;
}

ConvTranspose2d::ConvTranspose2d(std::string name, int in_channels, int out_channels, ConvGeometry geometry,
                                 int output_padding)
    : name_(std::move(name)), in_(in_channels), out_(out_channels), g_(geometry), output_padding_(output_padding) {
  weight_ = make_param(name_ + ".weight", static_cast<std::size_t>(in_) * out_ * g_.kernel * g_.kernel);
  bias_ = make_param(name_ + ".bias", static_cast<std::size_t>(out_));
}

void ConvTranspose2d::init_he(std::mt19937_64& rng, float gain) {
  // Each output pixel receives about in * k^2 / stride^2 contributions.
  const int fan = std::max(1, in_ * g_.kernel * g_.kernel / (g_.stride * g_.stride));
  he_normal(weight_, fan, gain, rng);
  std::fill(bias_.value.begin(), bias_.value.end(), 0.0f);
}

Field<float> ConvTranspose2d::forward(const Field<float>& x, ConvCache* cache) const {
  if (x.channels() != in_) throw ConfigError(name_ + ": expected " + std::to_string(in_) + " input channels");
  const int ho = (x.height() - 1) * g_.stride - 2 * g_.padding + g_.dilation * (g_.kernel - 1) + output_padding_ + 1;
  const int wo = (x.width() - 1) * g_.stride - 2 * g_.padding + g_.dilation * (g_.kernel - 1) + output_padding_ + 1;
  const int kk = out_ * g_.kernel * g_.kernel;
  const int p = x.height() * x.width();
  ConstMapMat w(weight_.value.data(), in_, kk);
  ConstMapMat xin(x.data().data(), in_, p);
  RowMat col = w.transpose() * xin;
  Field<float> y(out_, GridShape{ho, wo});
  col2im(col.data(), out_, ho, wo, g_, y.data().data());
  const std::size_t plane = static_cast<std::size_t>(ho) * wo;
  for (int o = 0; o < out_; ++o) {
    const float b = bias_.value[static_cast<std::size_t>(o)];
    float* yo = y.data().data() + o * plane;
    for (std::size_t i = 0; i < plane; ++i) yo[i] += b;
  }
  if (cache) cache->input = x;
  return y;
}

Field<float> ConvTranspose2d::backward(const Field<float>& dy, const ConvCache& cache) {
  const auto& x = cache.input;
  const int kk = out_ * g_.kernel * g_.kernel;
  const int p = x.height() * x.width();
  std::vector<float> col(static_cast<std::size_t>(kk) * p);
  im2col(dy.data().data(), out_, dy.height(), dy.width(), g_, col.data());

  ConstMapMat c(col.data(), kk, p);
  ConstMapMat xin(x.data().data(), in_, p);
  MapMat dw(weight_.grad.data(), in_, kk);
  dw.noalias() += xin * c.transpose();
  const std::size_t plane = dy.shape().pixels();
  for (int o = 0; o < out_; ++o) {
    const float* d = dy.data().data() + o * plane;
    float s = 0.0f;
    for (std::size_t i = 0; i < plane; ++i) s += d[i];
    bias_.grad[static_cast<std::size_t>(o)] += s;
  }
  ConstMapMat w(weight_.value.data(), in_, kk);
  Field<float> dx(in_, x.shape());
  MapMat(dx.data().data(), in_, p).noalias() = w * c;
  return dx;
}

std::vector<std::uint8_t> relu_inplace(Field<float>& x) {
  std::vector<std::uint8_t> mask(x.size());
  auto& d = x.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    mask[i] = d[i] > 0.0f ? 1 : 0;
    if (!mask[i] && !std::isnan(d[i])) d[i] = 0.0f;
  }
  return mask;
}

void relu_backward_inplace(Field<float>& dy, const std::vector<std::uint8_t>& mask) {
  auto& d = dy.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!mask[i]) d[i] = 0.0f;
  }
}

void add_inplace(Field<float>& a, const Field<float>& b) {
  if (a.size() != b.size()) throw ConfigError("add_inplace: size mismatch");
  auto& d = a.data();
  const auto& s = b.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

}  // namespace embseg::nn

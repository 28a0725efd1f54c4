#pragma once

// Minimal dense-prediction building blocks with explicit backward passes.
// Activations are Field<float> tensors of shape (C, H, W); one image at a time.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "embseg/grid.hpp"

namespace embseg::nn {

/// A trainable array with its accumulated gradient.
struct Parameter {
  std::string name;
  std::vector<float> value;
  std::vector<float> grad;

  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0f); }
};

struct ConvGeometry {
  int kernel = 3;
  int stride = 1;
  int padding = 1;
  int dilation = 1;

  /// Output extent of a forward convolution over `in` pixels.
  int conv_out(int in) const { return (in + 2 * padding - dilation * (kernel - 1) - 1) / stride + 1; }
};

/// (C*k*k, Ho*Wo) patch matrix of `x`.
void im2col(const float* x, int channels, int height, int width, const ConvGeometry& g, float* col);
/// Scatter-adds a patch matrix back onto a (C, H, W) image (adjoint of im2col).
void col2im(const float* col, int channels, int height, int width, const ConvGeometry& g, float* x);

/// What a layer keeps from its forward pass for the backward pass.
struct ConvCache {
  Field<float> input;
  std::vector<float> col;
};

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::string name, int in_channels, int out_channels, ConvGeometry geometry);

  Field<float> forward(const Field<float>& x, ConvCache* cache) const;
  /// Accumulates parameter gradients and returns d loss / d input.
  Field<float> backward(const Field<float>& dy, const ConvCache& cache);

  void init_he(std::mt19937_64& rng, float gain = 1.0f);
  std::vector<Parameter*> parameters() { return {&weight_, &bias_}; }
  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }
  int in_channels() const { return in_; }
  int out_channels() const { return out_; }

 private:
  std::string name_;
  int in_ = 0;
  int out_ = 0;
  ConvGeometry g_;
  Parameter weight_;  // (out, in * k * k)
  Parameter bias_;    // (out)
};

/// Transposed convolution (adjoint of Conv2d's data path), used for upsampling.
class ConvTranspose2d {
 public:
  ConvTranspose2d() = default;
  ConvTranspose2d(std::string name, int in_channels, int out_channels, ConvGeometry geometry, int output_padding);

  Field<float> forward(const Field<float>& x, ConvCache* cache) const;
  Field<float> backward(const Field<float>& dy, const ConvCache& cache);

  void init_he(std::mt19937_64& rng, float gain = 1.0f);
  std::vector<Parameter*> parameters() { return {&weight_, &bias_}; }

 private:
  std::string name_;
  int in_ = 0;
  int out_ = 0;
  ConvGeometry g_;
  int output_padding_ = 0;
  Parameter weight_;  // (in, out * k * k)
  Parameter bias_;    // (out)
};

/// In-place ReLU; returns the mask needed for backward.
std::vector<std::uint8_t> relu_inplace(Field<float>& x);
void relu_backward_inplace(Field<float>& dy, const std::vector<std::uint8_t>& mask);

void add_inplace(Field<float>& a, const Field<float>& b);

}  // namespace embseg::nn

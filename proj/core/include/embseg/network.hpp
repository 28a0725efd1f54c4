#pragma once

// Two-branch dense-prediction network: a shared encoder (three stride-2
// stages) and two decoders, one emitting offsets + raw sigma, the other one
// seed logit per semantic class. Outputs are at input resolution.

#include <cstdint>
#include <memory>
#include <vector>

#include "embseg/heads.hpp"
#include "embseg/nn/layers.hpp"

namespace embseg {

struct ModelConfig {
  int in_channels = 3;
  int num_classes = 2;
  int sigma_channels = 1;
  /// Channel width of the first stage; stages use width, 2*width, 4*width.
  int width = 16;
  /// Fixed by the architecture: three stride-2 stages.
  int downsampling = 8;
  std::uint64_t init_seed = 1;

  void validate() const;
};

class SpatialEmbeddingNet {
 public:
  /// Everything the backward pass needs from one forward pass.
  struct ForwardPass;

  explicit SpatialEmbeddingNet(ModelConfig config);
  ~SpatialEmbeddingNet();
  SpatialEmbeddingNet(SpatialEmbeddingNet&&) noexcept;
  SpatialEmbeddingNet& operator=(SpatialEmbeddingNet&&) noexcept;
  SpatialEmbeddingNet(const SpatialEmbeddingNet&);
  SpatialEmbeddingNet& operator=(const SpatialEmbeddingNet&);

  const ModelConfig& config() const noexcept { return config_; }

  /// Raw heads for `image` (C, H, W); H and W must be divisible by 8.
  RawHeads<float> forward(const Field<float>& image, ForwardPass* pass = nullptr) const;
  /// Activated output (no caching).
  ModelOutput predict(const Field<float>& image) const;
  /// Accumulates parameter gradients given d loss / d raw heads.
  void backward(const ForwardPass& pass, const RawHeads<float>& grad);

  void zero_grad();
  std::vector<nn::Parameter*> parameters();
  std::vector<const nn::Parameter*> parameters() const;
  std::size_t num_parameters() const;

  /// Sets the sigma head so the initial sigma corresponds to `target_margin_px`
  /// on a grid of height `grid_height`, and damps the offset head so
  /// embeddings start close to their pixel coordinates. Returns the raw bias.
  double init_sigma_bias(double target_margin_px, int grid_height);

 private:
  struct Layers;
  ModelConfig config_;
  std::unique_ptr<Layers> layers_;
};

struct SpatialEmbeddingNet::ForwardPass {
  struct Residual {
    nn::ConvCache conv;
    std::vector<std::uint8_t> relu;
  };
  struct Plain {
    nn::ConvCache conv;
    std::vector<std::uint8_t> relu;
  };
  struct Decoder {
    Plain up0;
    Residual dec0;
    Plain up1;
    Residual dec1;
    Plain up2;
    Plain stem;
    nn::ConvCache head;
  };
  Plain enc0;
  Residual enc1;
  Plain enc2;
  Residual enc3a;
  Residual enc3b;
  Plain enc4;
  Residual enc5a;
  Residual enc5b;
  Residual enc5c;
  Decoder geo;
  Decoder seed;
};

}  // namespace embseg

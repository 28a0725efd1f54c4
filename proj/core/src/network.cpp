#include "embseg/network.hpp"

#include <random>

#include "embseg/geometry.hpp"

namespace embseg {

using nn::Conv2d;
using nn::ConvCache;
using nn::ConvGeometry;
using nn::ConvTranspose2d;

void ModelConfig::validate() const {
  if (in_channels < 1) throw ConfigError("model: in_channels must be positive");
  if (num_classes < 1) throw ConfigError("model: num_classes must be positive");
  if (sigma_channels != 1 && sigma_channels != 2) throw ConfigError("model: sigma_channels must be 1 or 2");
  if (width < 2 || width % 2 != 0) throw ConfigError("model: width must be an even number >= 2");
  if (downsampling != 8) throw ConfigError("model: the architecture downsamples by exactly 8");
}

namespace detail {
struct DecoderLayers {
  ConvTranspose2d up0;
  Conv2d dec0;
  ConvTranspose2d up1;
  Conv2d dec1;
  ConvTranspose2d up2;
  Conv2d stem;
  Conv2d head;
};
}  // namespace detail

struct SpatialEmbeddingNet::Layers {
  using Decoder = detail::DecoderLayers;
  Conv2d enc0, enc1, enc2, enc3a, enc3b, enc4, enc5a, enc5b, enc5c;
  Decoder geo;
  Decoder seed;
};

namespace {

constexpr ConvGeometry k3{3, 1, 1, 1};
constexpr ConvGeometry k3s2{3, 2, 1, 1};
constexpr ConvGeometry k1{1, 1, 0, 1};
ConvGeometry dilated(int d) { return {3, 1, d, d}; }

using Pass = SpatialEmbeddingNet::ForwardPass;

Field<float> plain_forward(const Conv2d& conv, const Field<float>& x, Pass::Plain* c) {
  auto y = conv.forward(x, c ? &c->conv : nullptr);
  auto mask = nn::relu_inplace(y);
  if (c) c->relu = std::move(mask);
  return y;
}

Field<float> up_forward(const ConvTranspose2d& conv, const Field<float>& x, Pass::Plain* c) {
  auto y = conv.forward(x, c ? &c->conv : nullptr);
  auto mask = nn::relu_inplace(y);
  if (c) c->relu = std::move(mask);
  return y;
}

// y = x + relu(conv(x))
Field<float> residual_forward(const Conv2d& conv, const Field<float>& x, Pass::Residual* c) {
  auto branch = conv.forward(x, c ? &c->conv : nullptr);
  auto mask = nn::relu_inplace(branch);
  if (c) c->relu = std::move(mask);
  nn::add_inplace(branch, x);
  return branch;
}

Field<float> plain_backward(Conv2d& conv, Field<float> dy, const Pass::Plain& c) {
  nn::relu_backward_inplace(dy, c.relu);
  return conv.backward(dy, c.conv);
}

Field<float> up_backward(ConvTranspose2d& conv, Field<float> dy, const Pass::Plain& c) {
  nn::relu_backward_inplace(dy, c.relu);
  return conv.backward(dy, c.conv);
}

Field<float> residual_backward(Conv2d& conv, const Field<float>& dy, const Pass::Residual& c) {
  Field<float> branch = dy;
  nn::relu_backward_inplace(branch, c.relu);
  auto dx = conv.backward(branch, c.conv);
  nn::add_inplace(dx, dy);
  return dx;
}

detail::DecoderLayers make_decoder(const std::string& prefix, int w, int out_channels, int in_channels) {
  const int c0 = w / 2;
  return {ConvTranspose2d(prefix + ".up0", 4 * w, 2 * w, k3s2, 1),
          Conv2d(prefix + ".dec0", 2 * w, 2 * w, k3),
          ConvTranspose2d(prefix + ".up1", 2 * w, w, k3s2, 1),
          Conv2d(prefix + ".dec1", w, w, k3),
          ConvTranspose2d(prefix + ".up2", w, c0, k3s2, 1),
          Conv2d(prefix + ".stem", in_channels, c0, k3),
          Conv2d(prefix + ".head", c0, out_channels, k1)};
}

struct DecoderGrads {
  Field<float> bottleneck;
  Field<float> skip_quarter;
  Field<float> skip_half;
};

Field<float> decoder_forward(const detail::DecoderLayers& d, const Field<float>& bottleneck,
                             const Field<float>& skip_quarter, const Field<float>& skip_half,
                             const Field<float>& image, Pass::Decoder* c) {
  auto u0 = up_forward(d.up0, bottleneck, c ? &c->up0 : nullptr);
  nn::add_inplace(u0, skip_quarter);
  auto r0 = residual_forward(d.dec0, u0, c ? &c->dec0 : nullptr);
  auto u1 = up_forward(d.up1, r0, c ? &c->up1 : nullptr);
  nn::add_inplace(u1, skip_half);
  auto r1 = residual_forward(d.dec1, u1, c ? &c->dec1 : nullptr);
  auto u2 = up_forward(d.up2, r1, c ? &c->up2 : nullptr);
  nn::add_inplace(u2, plain_forward(d.stem, image, c ? &c->stem : nullptr));
  return d.head.forward(u2, c ? &c->head : nullptr);
}

DecoderGrads decoder_backward(detail::DecoderLayers& d, const Field<float>& dout,
                              const Pass::Decoder& c) {
  auto du2 = d.head.backward(dout, c.head);
  plain_backward(d.stem, du2, c.stem);
  auto dr1 = up_backward(d.up2, std::move(du2), c.up2);
  auto du1 = residual_backward(d.dec1, dr1, c.dec1);
  auto dr0 = up_backward(d.up1, du1, c.up1);
  auto du0 = residual_backward(d.dec0, dr0, c.dec0);
  auto db = up_backward(d.up0, du0, c.up0);
  return {std::move(db), std::move(du0), std::move(du1)};
}

std::vector<nn::Parameter*> decoder_params(detail::DecoderLayers& d) {
  std::vector<nn::Parameter*> out;
  for (auto* p : d.up0.parameters()) out.push_back(p);
  for (auto* p : d.dec0.parameters()) out.push_back(p);
  for (auto* p : d.up1.parameters()) out.push_back(p);
  for (auto* p : d.dec1.parameters()) out.push_back(p);
  for (auto* p : d.up2.parameters()) out.push_back(p);
  for (auto* p : d.stem.parameters()) out.push_back(p);
  for (auto* p : d.head.parameters()) out.push_back(p);
  return out;
}

}  // namespace

SpatialEmbeddingNet::SpatialEmbeddingNet(ModelConfig config) : config_(config) {
  config_.validate();
  const int w = config_.width;
  const int in = config_.in_channels;
  layers_ = std::make_unique<Layers>(Layers{
      Conv2d("enc0", in, w, k3s2),
      Conv2d("enc1", w, w, k3),
      Conv2d("enc2", w, 2 * w, k3s2),
      Conv2d("enc3a", 2 * w, 2 * w, k3),
      Conv2d("enc3b", 2 * w, 2 * w, k3),
      Conv2d("enc4", 2 * w, 4 * w, k3s2),
      Conv2d("enc5a", 4 * w, 4 * w, dilated(1)),
      Conv2d("enc5b", 4 * w, 4 * w, dilated(2)),
      Conv2d("enc5c", 4 * w, 4 * w, dilated(4)),
      make_decoder("geo", w, 2 + config_.sigma_channels, in),
      make_decoder("seed", w, config_.num_classes, in),
  });

  std::mt19937_64 rng(config_.init_seed);
  auto& L = *layers_;
  L.enc0.init_he(rng);
  L.enc1.init_he(rng, 0.5f);
  L.enc2.init_he(rng);
  L.enc3a.init_he(rng, 0.5f);
  L.enc3b.init_he(rng, 0.5f);
  L.enc4.init_he(rng);
  L.enc5a.init_he(rng, 0.5f);
  L.enc5b.init_he(rng, 0.5f);
  L.enc5c.init_he(rng, 0.5f);
  for (auto* d : {&L.geo, &L.seed}) {
    d->up0.init_he(rng);
    d->dec0.init_he(rng, 0.5f);
    d->up1.init_he(rng);
    d->dec1.init_he(rng, 0.5f);
    d->up2.init_he(rng);
    d->stem.init_he(rng);
    d->head.init_he(rng, 0.1f);
  }
}

SpatialEmbeddingNet::~SpatialEmbeddingNet() = default;
SpatialEmbeddingNet::SpatialEmbeddingNet(SpatialEmbeddingNet&&) noexcept = default;
SpatialEmbeddingNet& SpatialEmbeddingNet::operator=(SpatialEmbeddingNet&&) noexcept = default;
SpatialEmbeddingNet::SpatialEmbeddingNet(const SpatialEmbeddingNet& other)
    : config_(other.config_), layers_(std::make_unique<Layers>(*other.layers_)) {}
SpatialEmbeddingNet& SpatialEmbeddingNet::operator=(const SpatialEmbeddingNet& other) {
  if (this != &other) {
    config_ = other.config_;
    layers_ = std::make_unique<Layers>(*other.layers_);
  }
  return *this;
}

RawHeads<float> SpatialEmbeddingNet::forward(const Field<float>& image, ForwardPass* pass) const {
  if (image.channels() != config_.in_channels) {
    throw ConfigError("forward: expected " + std::to_string(config_.in_channels) + " image channels, got " +
                      std::to_string(image.channels()));
  }
  if (image.height() % config_.downsampling != 0 || image.width() % config_.downsampling != 0) {
    throw ConfigError("forward: image height and width must be divisible by " + std::to_string(config_.downsampling));
  }
  const auto& L = *layers_;
  ForwardPass* p = pass;
  auto e0 = plain_forward(L.enc0, image, p ? &p->enc0 : nullptr);
  auto e1 = residual_forward(L.enc1, e0, p ? &p->enc1 : nullptr);
  auto e2 = plain_forward(L.enc2, e1, p ? &p->enc2 : nullptr);
  auto e3 = residual_forward(L.enc3a, e2, p ? &p->enc3a : nullptr);
  e3 = residual_forward(L.enc3b, e3, p ? &p->enc3b : nullptr);
  auto e4 = plain_forward(L.enc4, e3, p ? &p->enc4 : nullptr);
  auto b = residual_forward(L.enc5a, e4, p ? &p->enc5a : nullptr);
  b = residual_forward(L.enc5b, b, p ? &p->enc5b : nullptr);
  b = residual_forward(L.enc5c, b, p ? &p->enc5c : nullptr);

  auto geo = decoder_forward(L.geo, b, e3, e1, image, p ? &p->geo : nullptr);
  auto seed = decoder_forward(L.seed, b, e3, e1, image, p ? &p->seed : nullptr);

  const GridShape shape = image.shape();
  const std::size_t n = shape.pixels();
  RawHeads<float> heads = RawHeads<float>::zeros(shape, config_.sigma_channels, config_.num_classes);
  std::copy_n(geo.data().begin(), 2 * n, heads.offset.data().begin());
  std::copy_n(geo.data().begin() + static_cast<std::ptrdiff_t>(2 * n), config_.sigma_channels * n,
              heads.sigma.data().begin());
  heads.seed.data() = std::move(seed.data());
  return heads;
}

ModelOutput SpatialEmbeddingNet::predict(const Field<float>& image) const {
  return ModelOutput::from_raw(forward(image, nullptr));
}

void SpatialEmbeddingNet::backward(const ForwardPass& pass, const RawHeads<float>& grad) {
  auto& L = *layers_;
  const GridShape shape = grad.shape();
  const std::size_t n = shape.pixels();
  Field<float> dgeo(2 + config_.sigma_channels, shape);
  std::copy(grad.offset.data().begin(), grad.offset.data().end(), dgeo.data().begin());
  std::copy(grad.sigma.data().begin(), grad.sigma.data().end(),
            dgeo.data().begin() + static_cast<std::ptrdiff_t>(2 * n));

  auto g = decoder_backward(L.geo, dgeo, pass.geo);
  auto s = decoder_backward(L.seed, grad.seed, pass.seed);
  nn::add_inplace(g.bottleneck, s.bottleneck);
  nn::add_inplace(g.skip_quarter, s.skip_quarter);
  nn::add_inplace(g.skip_half, s.skip_half);

  auto d = residual_backward(L.enc5c, g.bottleneck, pass.enc5c);
  d = residual_backward(L.enc5b, d, pass.enc5b);
  d = residual_backward(L.enc5a, d, pass.enc5a);
  d = plain_backward(L.enc4, std::move(d), pass.enc4);
  nn::add_inplace(d, g.skip_quarter);
  d = residual_backward(L.enc3b, d, pass.enc3b);
  d = residual_backward(L.enc3a, d, pass.enc3a);
  d = plain_backward(L.enc2, std::move(d), pass.enc2);
  nn::add_inplace(d, g.skip_half);
  d = residual_backward(L.enc1, d, pass.enc1);
  plain_backward(L.enc0, std::move(d), pass.enc0);
}

void SpatialEmbeddingNet::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

std::vector<nn::Parameter*> SpatialEmbeddingNet::parameters() {
  auto& L = *layers_;
  std::vector<nn::Parameter*> out;
  for (auto* c : {&L.enc0, &L.enc1, &L.enc2, &L.enc3a, &L.enc3b, &L.enc4, &L.enc5a, &L.enc5b, &L.enc5c}) {
    for (auto* p : c->parameters()) out.push_back(p);
  }
  for (auto* p : decoder_params(L.geo)) out.push_back(p);
  for (auto* p : decoder_params(L.seed)) out.push_back(p);
  return out;
}

std::vector<const nn::Parameter*> SpatialEmbeddingNet::parameters() const {
  auto ps = const_cast<SpatialEmbeddingNet*>(this)->parameters();
  return {ps.begin(), ps.end()};
}

std::size_t SpatialEmbeddingNet::num_parameters() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += p->value.size();
  return n;
}

double SpatialEmbeddingNet::init_sigma_bias(double target_margin_px, int grid_height) {
  const double raw = raw_from_sigma(sigma_from_margin(pixels_to_normalized(target_margin_px, grid_height)));
  auto& head = layers_->geo.head;
  const int in = head.in_channels();
  auto& w = head.weight().value;
  for (int o = 0; o < 2 + config_.sigma_channels; ++o) {
    for (int i = 0; i < in; ++i) {
      auto& v = w[static_cast<std::size_t>(o) * in + i];
      v = o < 2 ? v * 0.1f : 0.0f;
    }
    head.bias().value[static_cast<std::size_t>(o)] = o < 2 ? 0.0f : static_cast<float>(raw);
  }
  return raw;
}

}  // namespace embseg

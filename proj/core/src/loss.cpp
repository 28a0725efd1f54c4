#include "embseg/loss.hpp"

#include <cmath>

#include "embseg/lovasz.hpp"

namespace embseg {

std::string to_string(SigmaMode mode) {
  switch (mode) {
    case SigmaMode::fixed: return "fixed";
    case SigmaMode::circular: return "circular";
    case SigmaMode::elliptical: return "elliptical";
  }
  return "?";
}

std::string to_string(CenterMode mode) { return mode == CenterMode::centroid ? "centroid" : "learnable"; }

SigmaMode parse_sigma_mode(const std::string& s) {
  if (s == "fixed") return SigmaMode::fixed;
  if (s == "circular") return SigmaMode::circular;
  if (s == "elliptical") return SigmaMode::elliptical;
  throw ConfigError("unknown sigma mode '" + s + "' (expected fixed, circular or elliptical)");
}

CenterMode parse_center_mode(const std::string& s) {
  if (s == "centroid") return CenterMode::centroid;
  if (s == "learnable") return CenterMode::learnable;
  throw ConfigError("unknown center mode '" + s + "' (expected centroid or learnable)");
}

double LossConfig::fixed_sigma(int grid_height) const {
  return sigma_from_margin(pixels_to_normalized(fixed_sigma_margin, grid_height));
}

void LossConfig::validate() const {
  auto ok = [](double w) { return std::isfinite(w) && w >= 0.0; };
  if (!ok(weights.instance) || !ok(weights.seed) || !ok(weights.smooth)) {
    throw ConfigError("loss weights must be finite and non-negative");
  }
  if (sigma_mode == SigmaMode::fixed && !(fixed_sigma_margin > 0.0 && std::isfinite(fixed_sigma_margin))) {
    throw ConfigError("fixed_sigma_margin must be a positive number of pixels");
  }
}

Point2<double> centroid(std::span<const std::size_t> members, const Field<double>& coords) {
  if (members.empty()) throw ConfigError("centroid: empty instance");
  double sx = 0.0;
  double sy = 0.0;
  for (auto i : members) {
    sx += coords.channel(0)[i];
    sy += coords.channel(1)[i];
  }
  const auto n = static_cast<double>(members.size());
  return {sx / n, sy / n};
}

template <typename T>
Point2<T> learnable_center(std::span<const Point2<T>> member_embeddings) {
  if (member_embeddings.empty()) throw ConfigError("learnable_center: empty instance");
  T sx = 0;
  T sy = 0;
  for (const auto& e : member_embeddings) {
    sx += e.x;
    sy += e.y;
  }
  const auto n = static_cast<T>(member_embeddings.size());
  return {sx / n, sy / n};
}

template <typename T>
T sigma_k(std::span<const T> member_sigmas) {
  if (member_sigmas.empty()) throw ConfigError("sigma_k: empty instance");
  T s = 0;
  for (auto v : member_sigmas) s += v;
  return s / static_cast<T>(member_sigmas.size());
}

namespace {

std::uint64_t fnv1a(std::uint64_t h, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) {
    h ^= (v >> (8 * b)) & 0xffu;
    h *= 1099511628211ull;
  }
  return h;
}

struct TermSwitch {
  bool instance = true;
  bool seed = true;
  bool smooth = true;
};

template <typename T>
LossResult<T> evaluate(const RawHeads<T>& heads, const InstanceLabelMap& labels, const LossConfig& config,
                       bool with_grad, TermSwitch terms, std::span<const double> frozen_seed_target = {}) {
  heads.validate();
  config.validate();
  const GridShape shape = heads.shape();
  if (labels.shape() != shape) throw ConfigError("loss: label map and heads differ in shape");
  if (heads.sigma_channels() != config.sigma_channels()) {
    throw ConfigError("loss: sigma head has " + std::to_string(heads.sigma_channels()) +
                      " channels, configuration needs " + std::to_string(config.sigma_channels()));
  }
  if (!frozen_seed_target.empty() && frozen_seed_target.size() != shape.pixels()) {
    throw ConfigError("loss: frozen seed target does not match the grid");
  }
  for (int c : labels.classes()) {
    if (c >= heads.num_classes()) throw ConfigError("loss: seed channel missing for class " + std::to_string(c));
  }

  const std::size_t n = shape.pixels();
  const int s_ch = heads.sigma_channels();
  const int num_instances = labels.num_instances();
  const auto coords = build_coordinate_map<T>(shape);
  const auto coords64 = build_coordinate_map<double>(shape);

  // Activations.
  std::vector<T> off(2 * n);
  std::vector<T> emb(2 * n);
  for (std::size_t i = 0; i < 2 * n; ++i) {
    off[i] = std::tanh(heads.offset.data()[i]);
    emb[i] = coords.data()[i] + off[i];
  }
  std::vector<T> sig(static_cast<std::size_t>(s_ch) * n);
  for (std::size_t i = 0; i < sig.size(); ++i) sig[i] = sigma_from_raw(heads.sigma.data()[i]);
  std::vector<T> seed(static_cast<std::size_t>(heads.num_classes()) * n);
  for (std::size_t i = 0; i < seed.size(); ++i) seed[i] = sigmoid(heads.seed.data()[i]);

  const T* ex = emb.data();
  const T* ey = emb.data() + n;

  // Gradients w.r.t. activated quantities.
  std::vector<T> d_emb(with_grad ? 2 * n : 0, T(0));
  std::vector<T> d_sig(with_grad ? sig.size() : 0, T(0));
  std::vector<T> d_seed(with_grad ? seed.size() : 0, T(0));

  const auto& w = config.weights;
  LossResult<T> result;
  LossReport& report = result.report;
  report.sort_signature = 1469598103934665603ull;

  // phi of every foreground pixel under its own instance (seed target).
  std::vector<T> own_phi(n, T(0));

  std::vector<T> phi(n);
  std::vector<T> scores(n);
  std::vector<std::uint8_t> truth(n);
  const T inst_scale = num_instances > 0 ? T(w.instance) / static_cast<T>(num_instances) : T(0);

  for (int k = 1; k <= num_instances; ++k) {
    const auto& members = labels.members()[static_cast<std::size_t>(k - 1)];
    const auto nk = static_cast<T>(members.size());

    Point2<T> center;
    if (config.center_mode == CenterMode::centroid) {
      const auto c = centroid(members, coords64);
      center = {static_cast<T>(c.x), static_cast<T>(c.y)};
    } else {
      T sx = 0;
      T sy = 0;
      for (auto i : members) {
        sx += ex[i];
        sy += ey[i];
      }
      center = {sx / nk, sy / nk};
    }

    Sigma<T> sk;
    if (config.sigma_mode == SigmaMode::fixed) {
      sk = Sigma<T>::circular(static_cast<T>(config.fixed_sigma(shape.height)));
    } else {
      T acc[2] = {0, 0};
      for (int ch = 0; ch < s_ch; ++ch) {
        for (auto i : members) acc[ch] += sig[static_cast<std::size_t>(ch) * n + i];
        acc[ch] /= nk;
      }
      sk = s_ch == 2 ? Sigma<T>::axes(acc[0], acc[1]) : Sigma<T>::circular(acc[0]);
    }

    std::fill(truth.begin(), truth.end(), std::uint8_t{0});
    for (auto i : members) truth[i] = 1;

    const T ax = T(1) / (T(2) * sk.x * sk.x);
    const T ay = T(1) / (T(2) * sk.y * sk.y);
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const T dx = ex[i] - center.x;
      const T dy = ey[i] - center.y;
      phi[i] = std::exp(-dx * dx * ax - dy * dy * ay);
      scores[i] = T(2) * phi[i] - T(1);
      const bool pred = phi[i] > T(0.5);
      inter += (pred && truth[i]) ? 1 : 0;
      uni += (pred || truth[i]) ? 1 : 0;
    }
    for (auto i : members) own_phi[i] = phi[i];

    const auto lov = lovasz_hinge_with_grad<T>(scores, truth);
    for (auto idx : lov.order) report.sort_signature = fnv1a(report.sort_signature, idx);
    report.sort_signature = fnv1a(report.sort_signature, 0xfeedull);
    report.instance += static_cast<double>(lov.loss);

    InstanceDiagnostics diag;
    diag.id = k;
    diag.class_id = labels.class_of(k);
    diag.pixels = members.size();
    diag.center = {static_cast<double>(center.x), static_cast<double>(center.y)};
    diag.sigma = {static_cast<double>(sk.x), static_cast<double>(sk.y), sk.elliptical};
    diag.margin = {margin_of(diag.sigma.x), margin_of(diag.sigma.y)};
    diag.iou = uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
    diag.lovasz = static_cast<double>(lov.loss);
    report.per_instance.push_back(diag);

    if (!with_grad || !terms.instance || inst_scale == T(0)) continue;

    // Backprop through score = 2 phi - 1 and the Gaussian.
    T d_cx = 0;
    T d_cy = 0;
    T d_sx = 0;
    T d_sy = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const T g = lov.grad[i];
      if (g == T(0)) continue;
      const T dphi = T(2) * g * inst_scale;
      const T dx = ex[i] - center.x;
      const T dy = ey[i] - center.y;
      const T gx = -dphi * phi[i] * dx * T(2) * ax;
      const T gy = -dphi * phi[i] * dy * T(2) * ay;
      d_emb[i] += gx;
      d_emb[n + i] += gy;
      d_cx -= gx;
      d_cy -= gy;
      // d phi / d sigma_a = phi * d_a^2 / sigma_a^3
      d_sx += dphi * phi[i] * dx * dx / (sk.x * sk.x * sk.x);
      d_sy += dphi * phi[i] * dy * dy / (sk.y * sk.y * sk.y);
    }
    if (config.center_mode == CenterMode::learnable) {
      for (auto i : members) {
        d_emb[i] += d_cx / nk;
        d_emb[n + i] += d_cy / nk;
      }
    }
    if (config.sigma_mode != SigmaMode::fixed) {
      if (s_ch == 1) {
        const T ds = (d_sx + d_sy) / nk;
        for (auto i : members) d_sig[i] += ds;
      } else {
        for (auto i : members) {
          d_sig[i] += d_sx / nk;
          d_sig[n + i] += d_sy / nk;
        }
      }
    }
  }
  if (num_instances > 0) report.instance /= num_instances;
  if (!frozen_seed_target.empty()) {
    for (std::size_t i = 0; i < n; ++i) own_phi[i] = static_cast<T>(frozen_seed_target[i]);
  }
  report.seed_target.assign(own_phi.begin(), own_phi.end());

  // Seed regression; phi is a constant target.
  {
    double acc = 0.0;
    const auto& lab = labels.labels();
    for (int c = 0; c < heads.num_classes(); ++c) {
      const T* s = seed.data() + static_cast<std::size_t>(c) * n;
      for (std::size_t i = 0; i < n; ++i) {
        const int id = lab[i];
        const T target = (id > 0 && labels.class_of(id) == c) ? own_phi[i] : T(0);
        const T diff = s[i] - target;
        acc += static_cast<double>(diff * diff);
        if (with_grad && terms.seed) {
          d_seed[static_cast<std::size_t>(c) * n + i] = T(w.seed) * T(2) * diff / static_cast<T>(n);
        }
      }
    }
    report.seed = acc / static_cast<double>(n);
  }

  // Smoothness; sigma_k is a constant.
  {
    double acc = 0.0;
    for (int k = 1; k <= num_instances; ++k) {
      const auto& members = labels.members()[static_cast<std::size_t>(k - 1)];
      const auto denom = static_cast<T>(members.size()) * static_cast<T>(s_ch);
      for (int ch = 0; ch < s_ch; ++ch) {
        const T* sc = sig.data() + static_cast<std::size_t>(ch) * n;
        T mean = 0;
        for (auto i : members) mean += sc[i];
        mean /= static_cast<T>(members.size());
        T part = 0;
        for (auto i : members) {
          const T d = sc[i] - mean;
          part += d * d;
          if (with_grad && terms.smooth) {
            d_sig[static_cast<std::size_t>(ch) * n + i] += T(w.smooth) * T(2) * d / denom;
          }
        }
        acc += static_cast<double>(part / denom);
      }
    }
    report.smooth = acc;
  }

  report.total = (terms.instance ? w.instance * report.instance : 0.0) + (terms.seed ? w.seed * report.seed : 0.0) +
                 (terms.smooth ? w.smooth * report.smooth : 0.0);

  if (with_grad) {
    result.grad = RawHeads<T>::zeros(shape, s_ch, heads.num_classes());
    for (std::size_t i = 0; i < 2 * n; ++i) {
      result.grad.offset.data()[i] = d_emb[i] * (T(1) - off[i] * off[i]);
    }
    for (std::size_t i = 0; i < sig.size(); ++i) {
      result.grad.sigma.data()[i] = d_sig[i] * sigma_from_raw_derivative(heads.sigma.data()[i]);
    }
    for (std::size_t i = 0; i < seed.size(); ++i) {
      result.grad.seed.data()[i] = d_seed[i] * seed[i] * (T(1) - seed[i]);
    }
  }
  return result;
}

}  // namespace

template <typename T>
LossResult<T> total_loss(const RawHeads<T>& heads, const InstanceLabelMap& labels, const LossConfig& config,
                         bool with_grad) {
  return evaluate(heads, labels, config, with_grad, TermSwitch{});
}

template <typename T>
LossResult<T> total_loss_frozen(const RawHeads<T>& heads, const InstanceLabelMap& labels, const LossConfig& config,
                                std::span<const double> seed_target, bool with_grad) {
  return evaluate(heads, labels, config, with_grad, TermSwitch{}, seed_target);
}

template <typename T>
LossReport instance_mask_loss(const RawHeads<T>& heads, const InstanceLabelMap& labels, const LossConfig& config) {
  return evaluate(heads, labels, config, false, TermSwitch{true, false, false}).report;
}

template <typename T>
double seed_loss(const RawHeads<T>& heads, const InstanceLabelMap& labels, const LossConfig& config) {
  return evaluate(heads, labels, config, false, TermSwitch{false, true, false}).report.seed;
}

double smoothness_loss(const Field<double>& sigmas, const InstanceLabelMap& labels) {
  if (sigmas.shape() != labels.shape()) throw ConfigError("smoothness_loss: shape mismatch");
  double acc = 0.0;
  for (const auto& members : labels.members()) {
    const double denom = static_cast<double>(members.size()) * sigmas.channels();
    for (int ch = 0; ch < sigmas.channels(); ++ch) {
      const auto sc = sigmas.channel(ch);
      double mean = 0.0;
      for (auto i : members) mean += sc[i];
      mean /= static_cast<double>(members.size());
      for (auto i : members) acc += (sc[i] - mean) * (sc[i] - mean) / denom;
    }
  }
  return acc;
}

double regression_baseline_loss(const Field<double>& offsets, const InstanceLabelMap& labels,
                                const Field<double>& coords) {
  if (offsets.shape() != labels.shape() || coords.shape() != labels.shape()) {
    throw ConfigError("regression_baseline_loss: shape mismatch");
  }
  double acc = 0.0;
  for (const auto& members : labels.members()) {
    const auto c = centroid(members, coords);
    for (auto i : members) {
      const double tx = c.x - coords.channel(0)[i];
      const double ty = c.y - coords.channel(1)[i];
      acc += std::hypot(offsets.channel(0)[i] - tx, offsets.channel(1)[i] - ty);
    }
  }
  return acc;
}

double hinge_baseline_loss(const Field<double>& embeddings, const InstanceLabelMap& labels, double delta) {
  if (!(delta > 0.0)) throw ConfigError("hinge_baseline_loss: delta must be positive");
  if (embeddings.shape() != labels.shape()) throw ConfigError("hinge_baseline_loss: shape mismatch");
  const auto coords = build_coordinate_map<double>(labels.shape());
  double acc = 0.0;
  for (const auto& members : labels.members()) {
    const auto c = centroid(members, coords);
    for (auto i : members) {
      const double d = std::hypot(embeddings.channel(0)[i] - c.x, embeddings.channel(1)[i] - c.y);
      acc += std::max(d - delta, 0.0);
    }
  }
  return acc;
}

template Point2<float> learnable_center(std::span<const Point2<float>>);
template Point2<double> learnable_center(std::span<const Point2<double>>);
template float sigma_k(std::span<const float>);
template double sigma_k(std::span<const double>);
template LossResult<float> total_loss(const RawHeads<float>&, const InstanceLabelMap&, const LossConfig&, bool);
template LossResult<double> total_loss(const RawHeads<double>&, const InstanceLabelMap&, const LossConfig&, bool);
template LossResult<float> total_loss_frozen(const RawHeads<float>&, const InstanceLabelMap&, const LossConfig&,
                                             std::span<const double>, bool);
template LossResult<double> total_loss_frozen(const RawHeads<double>&, const InstanceLabelMap&, const LossConfig&,
                                              std::span<const double>, bool);
template LossReport instance_mask_loss(const RawHeads<float>&, const InstanceLabelMap&, const LossConfig&);
template LossReport instance_mask_loss(const RawHeads<double>&, const InstanceLabelMap&, const LossConfig&);
template double seed_loss(const RawHeads<float>&, const InstanceLabelMap&, const LossConfig&);
template double seed_loss(const RawHeads<double>&, const InstanceLabelMap&, const LossConfig&);

}  // namespace embseg

#include "embseg/optimizer.hpp"

#include <cmath>

#include "embseg/errors.hpp"

namespace embseg {

double poly_learning_rate(double initial, int epoch, int max_epochs, double power) {
  if (max_epochs <= 0 || epoch >= max_epochs) return 0.0;
  if (epoch <= 0) return initial;
  return initial * std::pow(1.0 - static_cast<double>(epoch) / max_epochs, power);
}

Adam::Adam(std::vector<nn::Parameter*> params, AdamConfig config) : params_(std::move(params)), config_(config) {
  if (!(config.beta1 >= 0.0 && config.beta1 < 1.0 && config.beta2 >= 0.0 && config.beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(config.epsilon > 0.0)) throw ConfigError("adam epsilon must be positive");
  for (const auto* p : params_) {
    m_.emplace_back(p->value.size(), 0.0f);
    v_.emplace_back(p->value.size(), 0.0f);
  }
}

void Adam::step(double learning_rate) {
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const auto step = static_cast<float>(learning_rate / c1);
  const auto inv_c2 = static_cast<float>(1.0 / c2);
  const auto eps = static_cast<float>(config_.epsilon);
  const auto fb1 = static_cast<float>(b1), fb2 = static_cast<float>(b2);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = *params_[k];
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const float g = p.grad[i];
      m[i] = fb1 * m[i] + (1.0f - fb1) * g;
      v[i] = fb2 * v[i] + (1.0f - fb2) * g * g;
      p.value[i] -= step * m[i] / (std::sqrt(v[i] * inv_c2) + eps);
    }
  }
}

void Adam::save_state(Checkpoint& ckpt) const {
  for (std::size_t k = 0; k < params_.size(); ++k) {
    ckpt.arrays.emplace_back("adam.m/" + params_[k]->name, m_[k]);
    ckpt.arrays.emplace_back("adam.v/" + params_[k]->name, v_[k]);
  }
  ckpt.meta["adam_steps"] = t_;
}

void Adam::load_state(const Checkpoint& ckpt) {
  for (std::size_t k = 0; k < params_.size(); ++k) {
    const auto* m = ckpt.find("adam.m/" + params_[k]->name);
    const auto* v = ckpt.find("adam.v/" + params_[k]->name);
    if (!m || !v) throw DataError("checkpoint lacks optimizer state for '" + params_[k]->name + "'");
    if (m->size() != m_[k].size() || v->size() != v_[k].size()) {
      throw DataError("optimizer state for '" + params_[k]->name + "' has the wrong size");
    }
    m_[k] = *m;
    v_[k] = *v;
  }
  t_ = ckpt.meta.value("adam_steps", std::int64_t{0});
}

}  // namespace embseg

#pragma once

#include <cstdint>
#include <vector>

#include "embseg/checkpoint.hpp"
#include "embseg/nn/layers.hpp"

namespace embseg {

/// (1 - epoch / max_epochs)^power * initial; 0 at and beyond max_epochs.
double poly_learning_rate(double initial, int epoch, int max_epochs, double power = 0.9);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam(std::vector<nn::Parameter*> params, AdamConfig config = {});

  void step(double learning_rate);
  std::int64_t steps() const noexcept { return t_; }

  /// Appends "adam.m/<name>" and "adam.v/<name>" arrays and the step count.
  void save_state(Checkpoint& ckpt) const;
  void load_state(const Checkpoint& ckpt);

 private:
  std::vector<nn::Parameter*> params_;
  AdamConfig config_;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
  std::int64_t t_ = 0;
};

}  // namespace embseg

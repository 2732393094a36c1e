#pragma once

#include "reid/nn/tensor.hpp"

#include <vector>

namespace reid::nn {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0; ///< L2 coefficient applied to params with decay=true
};

/// Adam over a fixed parameter list. Non-trainable params are skipped.
class Adam {
public:
  Adam(NamedParams params, AdamConfig cfg);
  void step();
  void zero_grad();
  long steps() const { return t_; }
  const AdamConfig &config() const { return cfg_; }

private:
  NamedParams params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  long t_ = 0;
};

/// Sum of 0.5 * ||w||^2 over params with decay=true.
double l2_penalty(const NamedParams &params);

} // namespace reid::nn

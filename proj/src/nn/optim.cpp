#include "reid/nn/optim.hpp"

#include <cmath>

namespace reid::nn {

Adam::Adam(NamedParams params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  if (!(cfg_.beta1 > 0 && cfg_.beta1 < 1 && cfg_.beta2 > 0 && cfg_.beta2 < 1))
    throw ConfigError("Adam: betas must lie in (0,1)");
  if (!(cfg_.lr > 0))
    throw ConfigError("Adam: learning rate must be positive");
  for (auto &[name, p] : params_) {
    m_.emplace_back(p->size(), 0.0);
    v_.emplace_back(p->size(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Param &p = *params_[k].second;
    if (!p.trainable)
      continue;
    auto &m = m_[k];
    auto &v = v_[k];
    const double wd = p.decay ? cfg_.weight_decay : 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = p.grad[i] + wd * p.value[i];
      m[i] = cfg_.beta1 * m[i] + (1 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1 - cfg_.beta2) * g * g;
      p.value[i] -= cfg_.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (auto &[name, p] : params_)
    p->zero_grad();
}

double l2_penalty(const NamedParams &params) {
  double s = 0;
  for (auto &[name, p] : params)
    if (p->decay && p->trainable)
      for (double v : p->value)
        s += 0.5 * v * v;
  return s;
}

} // namespace reid::nn

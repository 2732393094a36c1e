#pragma once

#include "reid/nn/tensor.hpp"

#include <memory>
#include <string>
#include <vector>

namespace reid::nn {

/// Per-call execution context: training mode enables dropout and batch
/// statistics; `rng` drives dropout masks.
struct Pass {
  bool training = false;
  Rng *rng = nullptr;
};

/// A differentiable layer. forward() caches what backward() needs; backward()
/// accumulates parameter gradients and returns the input gradient.
class Layer {
public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor &x, const Pass &pass) = 0;
  virtual Tensor backward(const Tensor &grad_out) = 0;
  virtual void collect(const std::string &prefix, NamedParams &out) { (void)prefix; (void)out; }
  virtual void init(Rng &rng) { (void)rng; }
  virtual std::unique_ptr<Layer> clone() const = 0;
};

class Dense : public Layer {
public:
  Dense(int in, int out, double init_slope = 0.2);
  Tensor forward(const Tensor &x, const Pass &pass) override;
  Tensor backward(const Tensor &grad_out) override;
  void collect(const std::string &prefix, NamedParams &out) override;
  void init(Rng &rng) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }

  int in_features() const { return in_; }
  int out_features() const { return out_; }
  Param weight, bias;

private:
  int in_, out_;
  double slope_;
  Tensor input_;
};

class Conv2d : public Layer {
public:
  Conv2d(int cin, int cout, int kernel, int stride = 1, int pad = -1, double init_slope = 0.2);
  Tensor forward(const Tensor &x, const Pass &pass) override;
  Tensor backward(const Tensor &grad_out) override;
  void collect(const std::string &prefix, NamedParams &out) override;
  void init(Rng &rng) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2d>(*this); }

  Param weight, bias;

private:
  int cin_, cout_, k_, stride_, pad_;
  double slope_;
  int in_h_ = 0, in_w_ = 0, out_h_ = 0, out_w_ = 0, batch_ = 0;
  std::vector<double> cols_; // im2col buffer for the whole batch
};

class LeakyReLU : public Layer {
public:
  explicit LeakyReLU(double slope = 0.2) : slope_(slope) {}
  Tensor forward(const Tensor &x, const Pass &pass) override;
  Tensor backward(const Tensor &grad_out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<LeakyReLU>(*this); }

private:
  double slope_;
  Tensor input_;
};

class Sigmoid : public Layer {
public:
  Tensor forward(const Tensor &x, const Pass &pass) override;
  Tensor backward(const Tensor &grad_out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Sigmoid>(*this); }

private:
  Tensor output_;
};

/// Nearest-neighbour 2x upsampling.
class Upsample2x : public Layer {
public:
  Tensor forward(const Tensor &x, const Pass &pass) override;
  Tensor backward(const Tensor &grad_out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Upsample2x>(*this); }
};

class GlobalAvgPool : public Layer {
public:
  Tensor forward(const Tensor &x, const Pass &pass) override;
  Tensor backward(const Tensor &grad_out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<GlobalAvgPool>(*this); }

private:
  int h_ = 0, w_ = 0;
};

/// Reinterpret each sample as (c, h, w); the element count must match.
class Reshape : public Layer {
public:
  Reshape(int c, int h, int w) : c_(c), h_(h), w_(w) {}
  Tensor forward(const Tensor &x, const Pass &pass) override;
  Tensor backward(const Tensor &grad_out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Reshape>(*this); }

private:
  int c_, h_, w_;
  Tensor shape_of_input_;
};

/// Per-channel batch normalization over (N, H, W).
class BatchNorm : public Layer {
public:
  explicit BatchNorm(int channels, double momentum = 0.1, double eps = 1e-5);
  Tensor forward(const Tensor &x, const Pass &pass) override;
  Tensor backward(const Tensor &grad_out) override;
  void collect(const std::string &prefix, NamedParams &out) override;
  void init(Rng &rng) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<BatchNorm>(*this); }

  /// Replace the running statistics by the mean and unbiased variance of `x`.
  void set_statistics(const Tensor &x);

  Param gamma, beta, running_mean, running_var;

private:
  int channels_;
  double momentum_, eps_;
  bool cached_training_ = false;
  Tensor xhat_;
  std::vector<double> inv_std_;
};

/// Inverted dropout: active only in training mode.
class Dropout : public Layer {
public:
  explicit Dropout(double rate) : rate_(rate) {}
  Tensor forward(const Tensor &x, const Pass &pass) override;
  Tensor backward(const Tensor &grad_out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dropout>(*this); }

private:
  double rate_;
  std::vector<double> mask_;
};

class Sequential : public Layer {
public:
  Sequential() = default;
  Sequential(const Sequential &other);
  Sequential &operator=(const Sequential &other);
  Sequential(Sequential &&) = default;
  Sequential &operator=(Sequential &&) = default;

  template <typename L, typename... Args> L &add(Args &&...args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L &ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }
  void push(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

  Tensor forward(const Tensor &x, const Pass &pass) override;
  Tensor backward(const Tensor &grad_out) override;
  void collect(const std::string &prefix, NamedParams &out) override;
  void init(Rng &rng) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Sequential>(*this); }

  std::size_t size() const { return layers_.size(); }
  Layer &at(std::size_t i) { return *layers_.at(i); }

private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

/// y = x + body(x).
class Residual : public Layer {
public:
  explicit Residual(Sequential body) : body_(std::move(body)) {}
  Tensor forward(const Tensor &x, const Pass &pass) override;
  Tensor backward(const Tensor &grad_out) override;
  void collect(const std::string &prefix, NamedParams &out) override;
  void init(Rng &rng) override { body_.init(rng); }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Residual>(*this); }

private:
  Sequential body_;
};

/// conv3x3 -> LeakyReLU -> conv3x3 with identity skip.
Residual residual_block(int channels, double slope = 0.2);

/// Collect parameters of a layer into a flat list.
NamedParams named_params(Layer &layer, const std::string &prefix = "");
void zero_grads(const NamedParams &params);
std::size_t parameter_count(const NamedParams &params, bool trainable_only = true);

} // namespace reid::nn

#pragma once

#include "reid/common.hpp"
#include "reid/image.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace reid::nn {

/// Dense NCHW batch of doubles. Vectors are stored as (N, C, 1, 1).
struct Tensor {
  int n = 0, c = 0, h = 1, w = 1;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_ = 1, int w_ = 1, double fill = 0.0)
      : n(n_), c(c_), h(h_), w(w_),
        data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t sample_size() const { return static_cast<std::size_t>(c) * h * w; }
  std::span<double> sample(int i) {
    return {data.data() + i * sample_size(), sample_size()};
  }
  std::span<const double> sample(int i) const {
    return {data.data() + i * sample_size(), sample_size()};
  }
  bool same_shape(const Tensor &o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
  std::string shape_string() const;
};

/// Trainable (or buffer) parameter with its gradient accumulator.
struct Param {
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool trainable = true;
  bool decay = false; ///< subject to L2 weight regularization

  Param() = default;
  explicit Param(std::vector<int> s, bool trainable_ = true);
  std::size_t size() const { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

using NamedParams = std::vector<std::pair<std::string, Param *>>;

/// Kaiming-normal: N(0, gain^2 / fan_in) with gain = sqrt(2 / (1 + slope^2)).
void kaiming_normal(Param &p, int fan_in, double slope, Rng &rng);

/// Stack images (H x W x 3) into an (N, 3, H, W) tensor.
Tensor images_to_tensor(const std::vector<const Image *> &images);
Tensor image_to_tensor(const Image &img);
Image tensor_to_image(const Tensor &t, int index = 0);

/// Rows of `rows` (each of length cols) as an (N, cols) tensor.
Tensor rows_to_tensor(const std::vector<std::vector<double>> &rows);

/// Concatenate two (N, *) tensors along the feature axis.
Tensor concat_features(const Tensor &a, const Tensor &b);

} // namespace reid::nn

#include "reid/nn/tensor.hpp"

#include <cmath>

namespace reid::nn {

std::string Tensor::shape_string() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) +
         "," + std::to_string(w) + ")";
}

Param::Param(std::vector<int> s, bool trainable_) : shape(std::move(s)), trainable(trainable_) {
  std::size_t n = 1;
  for (int d : shape)
    n *= static_cast<std::size_t>(d);
  value.assign(n, 0.0);
  grad.assign(n, 0.0);
}

void kaiming_normal(Param &p, int fan_in, double slope, Rng &rng) {
  const double std = std::sqrt(2.0 / (1.0 + slope * slope) / fan_in);
  for (double &v : p.value)
    v = std * normal(rng);
}

Tensor images_to_tensor(const std::vector<const Image *> &images) {
  if (images.empty())
    throw Error("images_to_tensor: empty batch");
  const int h = images.front()->height, w = images.front()->width;
  Tensor t(static_cast<int>(images.size()), 3, h, w);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Image &img = *images[i];
    if (img.height != h || img.width != w)
      throw Error("images_to_tensor: mixed image sizes");
    auto s = t.sample(static_cast<int>(i));
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          s[(static_cast<std::size_t>(c) * h + y) * w + x] = img.at(y, x, c);
  }
  return t;
}

Tensor image_to_tensor(const Image &img) { return images_to_tensor({&img}); }

Image tensor_to_image(const Tensor &t, int index) {
  if (t.c != 3)
    throw Error("tensor_to_image: expected 3 channels, got " + t.shape_string());
  Image img(t.h, t.w);
  auto s = t.sample(index);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < t.h; ++y)
      for (int x = 0; x < t.w; ++x)
        img.at(y, x, c) = s[(static_cast<std::size_t>(c) * t.h + y) * t.w + x];
  return img;
}

Tensor rows_to_tensor(const std::vector<std::vector<double>> &rows) {
  if (rows.empty())
    throw Error("rows_to_tensor: empty batch");
  const int cols = static_cast<int>(rows.front().size());
  Tensor t(static_cast<int>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<int>(rows[i].size()) != cols)
      throw Error("rows_to_tensor: ragged rows");
    std::copy(rows[i].begin(), rows[i].end(), t.sample(static_cast<int>(i)).begin());
  }
  return t;
}

Tensor concat_features(const Tensor &a, const Tensor &b) {
  if (a.n != b.n)
    throw Error("concat_features: batch mismatch");
  const auto sa = a.sample_size(), sb = b.sample_size();
  Tensor t(a.n, static_cast<int>(sa + sb));
  for (int i = 0; i < a.n; ++i) {
    auto dst = t.sample(i);
    std::copy(a.sample(i).begin(), a.sample(i).end(), dst.begin());
    std::copy(b.sample(i).begin(), b.sample(i).end(), dst.begin() + static_cast<long>(sa));
  }
  return t;
}

} // namespace reid::nn

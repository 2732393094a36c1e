#include "reid/nn/layers.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace reid::nn {

namespace {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

void require(bool cond, const std::string &msg) {
  if (!cond)
    throw Error(msg);
}

} // namespace

// ---------------------------------------------------------------- Dense

Dense::Dense(int in, int out, double init_slope)
    : weight({out, in}), bias({out}), in_(in), out_(out), slope_(init_slope) {
  weight.decay = true;
}

void Dense::init(Rng &rng) {
  kaiming_normal(weight, in_, slope_, rng);
  std::fill(bias.value.begin(), bias.value.end(), 0.0);
}

Tensor Dense::forward(const Tensor &x, const Pass &) {
  require(static_cast<int>(x.sample_size()) == in_,
          "Dense: expected " + std::to_string(in_) + " features, got " + x.shape_string());
  input_ = x;
  Tensor y(x.n, out_);
  CMapR X(x.data.data(), x.n, in_);
  CMapR W(weight.value.data(), out_, in_);
  MapR Y(y.data.data(), x.n, out_);
  Y.noalias() = X * W.transpose();
  Y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.value.data(), out_);
  return y;
}

Tensor Dense::backward(const Tensor &g) {
  const int n = input_.n;
  CMapR G(g.data.data(), n, out_);
  CMapR X(input_.data.data(), n, in_);
  CMapR W(weight.value.data(), out_, in_);
  MapR(weight.grad.data(), out_, in_).noalias() += G.transpose() * X;
  Eigen::Map<Eigen::RowVectorXd>(bias.grad.data(), out_) += G.colwise().sum();
  Tensor dx = input_;
  MapR(dx.data.data(), n, in_).noalias() = G * W;
  return dx;
}

void Dense::collect(const std::string &prefix, NamedParams &out) {
  out.emplace_back(prefix + "weight", &weight);
  out.emplace_back(prefix + "bias", &bias);
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int cin, int cout, int kernel, int stride, int pad, double init_slope)
    : weight({cout, cin, kernel, kernel}), bias({cout}), cin_(cin), cout_(cout), k_(kernel),
      stride_(stride), pad_(pad < 0 ? kernel / 2 : pad), slope_(init_slope) {
  weight.decay = true;
}

void Conv2d::init(Rng &rng) {
  kaiming_normal(weight, cin_ * k_ * k_, slope_, rng);
  std::fill(bias.value.begin(), bias.value.end(), 0.0);
}

Tensor Conv2d::forward(const Tensor &x, const Pass &) {
  require(x.c == cin_, "Conv2d: expected " + std::to_string(cin_) + " channels, got " +
                           x.shape_string());
  batch_ = x.n;
  in_h_ = x.h;
  in_w_ = x.w;
  out_h_ = (in_h_ + 2 * pad_ - k_) / stride_ + 1;
  out_w_ = (in_w_ + 2 * pad_ - k_) / stride_ + 1;
  require(out_h_ > 0 && out_w_ > 0, "Conv2d: input too small " + x.shape_string());
  const int K = cin_ * k_ * k_;
  const int P = out_h_ * out_w_;
  cols_.assign(static_cast<std::size_t>(batch_) * K * P, 0.0);
  Tensor y(batch_, cout_, out_h_, out_w_);
  CMapR W(weight.value.data(), cout_, K);
  for (int n = 0; n < batch_; ++n) {
    const double *src = x.sample(n).data();
    double *col = cols_.data() + static_cast<std::size_t>(n) * K * P;
    for (int c = 0; c < cin_; ++c)
      for (int ky = 0; ky < k_; ++ky)
        for (int kx = 0; kx < k_; ++kx) {
          double *row = col + static_cast<std::size_t>((c * k_ + ky) * k_ + kx) * P;
          for (int oy = 0; oy < out_h_; ++oy) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= in_h_)
              continue;
            for (int ox = 0; ox < out_w_; ++ox) {
              const int ix = ox * stride_ - pad_ + kx;
              if (ix >= 0 && ix < in_w_)
                row[oy * out_w_ + ox] = src[(c * in_h_ + iy) * in_w_ + ix];
            }
          }
        }
    MapR Y(y.sample(n).data(), cout_, P);
    Y.noalias() = W * CMapR(col, K, P);
    Y.colwise() += Eigen::Map<const Eigen::VectorXd>(bias.value.data(), cout_);
  }
  return y;
}

Tensor Conv2d::backward(const Tensor &g) {
  const int K = cin_ * k_ * k_;
  const int P = out_h_ * out_w_;
  CMapR W(weight.value.data(), cout_, K);
  MapR dW(weight.grad.data(), cout_, K);
  VecMap db(bias.grad.data(), cout_);
  Tensor dx(batch_, cin_, in_h_, in_w_);
  MatR dcol(K, P);
  for (int n = 0; n < batch_; ++n) {
    CMapR G(g.sample(n).data(), cout_, P);
    const double *col = cols_.data() + static_cast<std::size_t>(n) * K * P;
    dW.noalias() += G * CMapR(col, K, P).transpose();
    db += G.rowwise().sum();
    dcol.noalias() = W.transpose() * G;
    double *dst = dx.sample(n).data();
    for (int c = 0; c < cin_; ++c)
      for (int ky = 0; ky < k_; ++ky)
        for (int kx = 0; kx < k_; ++kx) {
          const double *row = dcol.data() + static_cast<std::size_t>((c * k_ + ky) * k_ + kx) * P;
          for (int oy = 0; oy < out_h_; ++oy) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= in_h_)
              continue;
            for (int ox = 0; ox < out_w_; ++ox) {
              const int ix = ox * stride_ - pad_ + kx;
              if (ix >= 0 && ix < in_w_)
                dst[(c * in_h_ + iy) * in_w_ + ix] += row[oy * out_w_ + ox];
            }
          }
        }
  }
  return dx;
}

void Conv2d::collect(const std::string &prefix, NamedParams &out) {
  out.emplace_back(prefix + "weight", &weight);
  out.emplace_back(prefix + "bias", &bias);
}

// ---------------------------------------------------------------- activations

Tensor LeakyReLU::forward(const Tensor &x, const Pass &) {
  input_ = x;
  Tensor y = x;
  for (double &v : y.data)
    if (v < 0)
      v *= slope_;
  return y;
}

Tensor LeakyReLU::backward(const Tensor &g) {
  Tensor dx = g;
  for (std::size_t i = 0; i < dx.size(); ++i)
    if (input_.data[i] < 0)
      dx.data[i] *= slope_;
  return dx;
}

Tensor Sigmoid::forward(const Tensor &x, const Pass &) {
  Tensor y = x;
  for (double &v : y.data)
    v = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  output_ = y;
  return y;
}

Tensor Sigmoid::backward(const Tensor &g) {
  Tensor dx = g;
  for (std::size_t i = 0; i < dx.size(); ++i)
    dx.data[i] *= output_.data[i] * (1.0 - output_.data[i]);
  return dx;
}

// ---------------------------------------------------------------- reshaping

Tensor Upsample2x::forward(const Tensor &x, const Pass &) {
  Tensor y(x.n, x.c, x.h * 2, x.w * 2);
  for (int n = 0; n < x.n; ++n)
    for (int c = 0; c < x.c; ++c)
      for (int yy = 0; yy < y.h; ++yy)
        for (int xx = 0; xx < y.w; ++xx)
          y.data[((static_cast<std::size_t>(n) * x.c + c) * y.h + yy) * y.w + xx] =
              x.data[((static_cast<std::size_t>(n) * x.c + c) * x.h + yy / 2) * x.w + xx / 2];
  return y;
}

Tensor Upsample2x::backward(const Tensor &g) {
  Tensor dx(g.n, g.c, g.h / 2, g.w / 2);
  for (int n = 0; n < g.n; ++n)
    for (int c = 0; c < g.c; ++c)
      for (int yy = 0; yy < g.h; ++yy)
        for (int xx = 0; xx < g.w; ++xx)
          dx.data[((static_cast<std::size_t>(n) * g.c + c) * dx.h + yy / 2) * dx.w + xx / 2] +=
              g.data[((static_cast<std::size_t>(n) * g.c + c) * g.h + yy) * g.w + xx];
  return dx;
}

Tensor GlobalAvgPool::forward(const Tensor &x, const Pass &) {
  h_ = x.h;
  w_ = x.w;
  const int hw = x.h * x.w;
  Tensor y(x.n, x.c);
  for (int n = 0; n < x.n; ++n)
    for (int c = 0; c < x.c; ++c) {
      const double *p = x.data.data() + (static_cast<std::size_t>(n) * x.c + c) * hw;
      double s = 0;
      for (int i = 0; i < hw; ++i)
        s += p[i];
      y.data[static_cast<std::size_t>(n) * x.c + c] = s / hw;
    }
  return y;
}

Tensor GlobalAvgPool::backward(const Tensor &g) {
  const int hw = h_ * w_;
  Tensor dx(g.n, g.c, h_, w_);
  for (int n = 0; n < g.n; ++n)
    for (int c = 0; c < g.c; ++c) {
      const double v = g.data[static_cast<std::size_t>(n) * g.c + c] / hw;
      double *p = dx.data.data() + (static_cast<std::size_t>(n) * g.c + c) * hw;
      std::fill(p, p + hw, v);
    }
  return dx;
}

Tensor Reshape::forward(const Tensor &x, const Pass &) {
  require(x.sample_size() == static_cast<std::size_t>(c_) * h_ * w_,
          "Reshape: cannot view " + x.shape_string());
  shape_of_input_ = Tensor(0, x.c, x.h, x.w);
  Tensor y = x;
  y.c = c_;
  y.h = h_;
  y.w = w_;
  return y;
}

Tensor Reshape::backward(const Tensor &g) {
  Tensor dx = g;
  dx.c = shape_of_input_.c;
  dx.h = shape_of_input_.h;
  dx.w = shape_of_input_.w;
  return dx;
}

// ---------------------------------------------------------------- BatchNorm

BatchNorm::BatchNorm(int channels, double momentum, double eps)
    : gamma({channels}), beta({channels}), running_mean({channels}, false),
      running_var({channels}, false), channels_(channels), momentum_(momentum), eps_(eps) {
  std::fill(gamma.value.begin(), gamma.value.end(), 1.0);
  std::fill(running_var.value.begin(), running_var.value.end(), 1.0);
}

void BatchNorm::init(Rng &) {
  std::fill(gamma.value.begin(), gamma.value.end(), 1.0);
  std::fill(beta.value.begin(), beta.value.end(), 0.0);
  std::fill(running_mean.value.begin(), running_mean.value.end(), 0.0);
  std::fill(running_var.value.begin(), running_var.value.end(), 1.0);
}

void BatchNorm::set_statistics(const Tensor &x) {
  require(x.c == channels_, "BatchNorm: expected " + std::to_string(channels_) +
                                " channels, got " + x.shape_string());
  const int hw = x.h * x.w;
  const double m = static_cast<double>(x.n) * hw;
  require(m > 1, "BatchNorm: statistics need more than one value per channel");
  for (int c = 0; c < channels_; ++c) {
    double s = 0, s2 = 0;
    for (int n = 0; n < x.n; ++n)
      for (int i = 0; i < hw; ++i)
        s += x.data[(static_cast<std::size_t>(n) * x.c + c) * hw + i];
    const double mean = s / m;
    for (int n = 0; n < x.n; ++n)
      for (int i = 0; i < hw; ++i) {
        const double d = x.data[(static_cast<std::size_t>(n) * x.c + c) * hw + i] - mean;
        s2 += d * d;
      }
    running_mean.value[c] = mean;
    running_var.value[c] = s2 / (m - 1);
  }
}

Tensor BatchNorm::forward(const Tensor &x, const Pass &pass) {
  require(x.c == channels_, "BatchNorm: expected " + std::to_string(channels_) +
                                " channels, got " + x.shape_string());
  const int hw = x.h * x.w;
  const double m = static_cast<double>(x.n) * hw;
  Tensor y(x.n, x.c, x.h, x.w);
  cached_training_ = pass.training;
  xhat_ = Tensor(x.n, x.c, x.h, x.w);
  inv_std_.assign(channels_, 0.0);
  auto idx = [&](int n, int c, int i) {
    return (static_cast<std::size_t>(n) * x.c + c) * hw + i;
  };
  for (int c = 0; c < channels_; ++c) {
    double mean, var;
    if (pass.training) {
      require(m > 1, "BatchNorm: training needs more than one value per channel");
      double s = 0;
      for (int n = 0; n < x.n; ++n)
        for (int i = 0; i < hw; ++i)
          s += x.data[idx(n, c, i)];
      mean = s / m;
      double s2 = 0;
      for (int n = 0; n < x.n; ++n)
        for (int i = 0; i < hw; ++i) {
          const double d = x.data[idx(n, c, i)] - mean;
          s2 += d * d;
        }
      var = s2 / m;
      running_mean.value[c] = (1 - momentum_) * running_mean.value[c] + momentum_ * mean;
      running_var.value[c] =
          (1 - momentum_) * running_var.value[c] + momentum_ * var * m / (m - 1);
    } else {
      mean = running_mean.value[c];
      var = running_var.value[c];
    }
    const double inv = 1.0 / std::sqrt(var + eps_);
    inv_std_[c] = inv;
    for (int n = 0; n < x.n; ++n)
      for (int i = 0; i < hw; ++i) {
        const double xh = (x.data[idx(n, c, i)] - mean) * inv;
        xhat_.data[idx(n, c, i)] = xh;
        y.data[idx(n, c, i)] = gamma.value[c] * xh + beta.value[c];
      }
  }
  return y;
}

Tensor BatchNorm::backward(const Tensor &g) {
  const int hw = g.h * g.w;
  const double m = static_cast<double>(g.n) * hw;
  Tensor dx(g.n, g.c, g.h, g.w);
  auto idx = [&](int n, int c, int i) {
    return (static_cast<std::size_t>(n) * g.c + c) * hw + i;
  };
  for (int c = 0; c < channels_; ++c) {
    double sum_g = 0, sum_gx = 0;
    for (int n = 0; n < g.n; ++n)
      for (int i = 0; i < hw; ++i) {
        sum_g += g.data[idx(n, c, i)];
        sum_gx += g.data[idx(n, c, i)] * xhat_.data[idx(n, c, i)];
      }
    gamma.grad[c] += sum_gx;
    beta.grad[c] += sum_g;
    const double k = gamma.value[c] * inv_std_[c];
    for (int n = 0; n < g.n; ++n)
      for (int i = 0; i < hw; ++i) {
        const double gi = g.data[idx(n, c, i)];
        dx.data[idx(n, c, i)] =
            cached_training_
                ? k * (gi - sum_g / m - xhat_.data[idx(n, c, i)] * sum_gx / m)
                : k * gi;
      }
  }
  return dx;
}

void BatchNorm::collect(const std::string &prefix, NamedParams &out) {
  out.emplace_back(prefix + "gamma", &gamma);
  out.emplace_back(prefix + "beta", &beta);
  out.emplace_back(prefix + "running_mean", &running_mean);
  out.emplace_back(prefix + "running_var", &running_var);
}

// ---------------------------------------------------------------- Dropout

Tensor Dropout::forward(const Tensor &x, const Pass &pass) {
  if (!pass.training || rate_ <= 0) {
    mask_.assign(x.size(), 1.0);
    return x;
  }
  require(pass.rng != nullptr, "Dropout: training pass without rng");
  const double keep = 1.0 - rate_;
  mask_.resize(x.size());
  Tensor y = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask_[i] = uniform(*pass.rng, 0.0, 1.0) < keep ? 1.0 / keep : 0.0;
    y.data[i] *= mask_[i];
  }
  return y;
}

Tensor Dropout::backward(const Tensor &g) {
  Tensor dx = g;
  for (std::size_t i = 0; i < dx.size(); ++i)
    dx.data[i] *= mask_[i];
  return dx;
}

// ---------------------------------------------------------------- containers

Sequential::Sequential(const Sequential &other) {
  layers_.reserve(other.layers_.size());
  for (const auto &l : other.layers_)
    layers_.push_back(l->clone());
}

Sequential &Sequential::operator=(const Sequential &other) {
  if (this != &other) {
    Sequential copy(other);
    layers_ = std::move(copy.layers_);
  }
  return *this;
}

Tensor Sequential::forward(const Tensor &x, const Pass &pass) {
  Tensor h = x;
  for (auto &l : layers_)
    h = l->forward(h, pass);
  return h;
}

Tensor Sequential::backward(const Tensor &g) {
  Tensor d = g;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
    d = (*it)->backward(d);
  return d;
}

void Sequential::collect(const std::string &prefix, NamedParams &out) {
  for (std::size_t i = 0; i < layers_.size(); ++i)
    layers_[i]->collect(prefix + std::to_string(i) + ".", out);
}

void Sequential::init(Rng &rng) {
  for (auto &l : layers_)
    l->init(rng);
}

Tensor Residual::forward(const Tensor &x, const Pass &pass) {
  Tensor y = body_.forward(x, pass);
  require(y.same_shape(x), "Residual: body changed the shape");
  for (std::size_t i = 0; i < y.size(); ++i)
    y.data[i] += x.data[i];
  return y;
}

Tensor Residual::backward(const Tensor &g) {
  Tensor d = body_.backward(g);
  for (std::size_t i = 0; i < d.size(); ++i)
    d.data[i] += g.data[i];
  return d;
}

void Residual::collect(const std::string &prefix, NamedParams &out) {
  body_.collect(prefix + "body.", out);
}

Residual residual_block(int channels, double slope) {
  Sequential body;
  body.add<Conv2d>(channels, channels, 3, 1, 1, slope);
  body.add<LeakyReLU>(slope);
  body.add<Conv2d>(channels, channels, 3, 1, 1, slope);
  return Residual(std::move(body));
}

NamedParams named_params(Layer &layer, const std::string &prefix) {
  NamedParams out;
  layer.collect(prefix, out);
  return out;
}

void zero_grads(const NamedParams &params) {
  for (auto &[name, p] : params)
    p->zero_grad();
}

std::size_t parameter_count(const NamedParams &params, bool trainable_only) {
  std::size_t n = 0;
  for (auto &[name, p] : params)
    if (!trainable_only || p->trainable)
      n += p->size();
  return n;
}

} // namespace reid::nn

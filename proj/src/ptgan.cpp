#include "reid/ptgan.hpp"

#include "reid/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

namespace reid {

using nn::Pass;
using nn::Tensor;

namespace {

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

bool inside_clamp(double p) { return p > kProbClamp && p < 1.0 - kProbClamp; }

Tensor pose_tensor(const std::vector<PoseVector> &poses) {
  std::vector<std::vector<double>> rows;
  rows.reserve(poses.size());
  for (const auto &p : poses)
    rows.push_back(encode_pose(p));
  return nn::rows_to_tensor(rows);
}

void check_finite(double v, const std::string &what) {
  if (!std::isfinite(v))
    throw DivergenceError(what + " became non-finite");
}

} // namespace

// ------------------------------------------------------------------ backbone

std::string to_string(ExtractorVariant v) {
  switch (v) {
  case ExtractorVariant::generic: return "generic";
  case ExtractorVariant::reid_finetuned: return "reid_finetuned";
  case ExtractorVariant::toy: return "toy";
  }
  return "toy";
}

ExtractorVariant extractor_variant_from_string(const std::string &s) {
  if (s == "generic")
    return ExtractorVariant::generic;
  if (s == "reid_finetuned")
    return ExtractorVariant::reid_finetuned;
  if (s == "toy")
    return ExtractorVariant::toy;
  throw ConfigError("unknown extractor variant '" + s + "'");
}

nlohmann::json to_json(const ExtractorArch &a) {
  return {{"height", a.height},
          {"width", a.width},
          {"descriptor_dim", a.descriptor_dim},
          {"channels", a.channels}};
}

ExtractorArch extractor_arch_from_json(const nlohmann::json &j) {
  ExtractorArch a;
  a.height = j.value("height", a.height);
  a.width = j.value("width", a.width);
  a.descriptor_dim = j.value("descriptor_dim", a.descriptor_dim);
  a.channels = j.value("channels", a.channels);
  if (a.height <= 0 || a.width <= 0 || a.descriptor_dim <= 0 || a.channels.empty())
    throw ConfigError("extractor architecture: dimensions must be positive");
  return a;
}

FeatureExtractor::FeatureExtractor(ExtractorVariant variant, ExtractorArch arch,
                                   std::uint64_t seed)
    : variant_(variant), arch_(std::move(arch)),
      provenance_("random-init seed=" + std::to_string(seed)) {
  int c = 3;
  for (std::size_t i = 0; i < arch_.channels.size(); ++i) {
    trunk_.add<nn::Conv2d>(c, arch_.channels[i], 3, i == 0 ? 1 : 2, 1);
    trunk_.add<nn::LeakyReLU>(0.2);
    c = arch_.channels[i];
  }
  trunk_.add<nn::Conv2d>(c, arch_.descriptor_dim, 1, 1, 0, 1.0);
  trunk_.add<nn::GlobalAvgPool>();
  Rng rng(seed);
  trunk_.init(rng);
}

Tensor FeatureExtractor::extract_batch(const Tensor &images) const {
  if (images.c != 3 || images.h != arch_.height || images.w != arch_.width)
    throw Error("extract: expected images of shape (3," + std::to_string(arch_.height) + "," +
                std::to_string(arch_.width) + "), got " + images.shape_string());
  constexpr int kChunk = 32;
  Tensor out(images.n, arch_.descriptor_dim);
  for (int start = 0; start < images.n; start += kChunk) {
    const int n = std::min(kChunk, images.n - start);
    Tensor chunk(n, 3, images.h, images.w);
    std::copy_n(images.data.begin() + static_cast<long>(start * images.sample_size()),
                chunk.size(), chunk.data.begin());
    Tensor d = trunk_.forward(chunk, Pass{});
    std::copy(d.data.begin(), d.data.end(),
              out.data.begin() + static_cast<long>(start) * arch_.descriptor_dim);
  }
  return out;
}

Descriptor FeatureExtractor::extract(const Image &image) const {
  if (image.height != arch_.height || image.width != arch_.width)
    throw Error("extract: image is " + std::to_string(image.height) + "x" +
                std::to_string(image.width) + ", extractor expects " +
                std::to_string(arch_.height) + "x" + std::to_string(arch_.width));
  return extract_batch(nn::image_to_tensor(image)).data;
}

std::string FeatureExtractor::hash() const { return hash_params(nn::named_params(trunk_)); }

Checkpoint FeatureExtractor::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.kind = "extractor";
  ckpt.meta = {{"variant", to_string(variant_)},
               {"architecture", to_json(arch_)},
               {"provenance", provenance_}};
  store_params(ckpt, nn::named_params(trunk_), "trunk.");
  return ckpt;
}

FeatureExtractor FeatureExtractor::from_checkpoint(const Checkpoint &ckpt) {
  if (ckpt.kind != "extractor")
    throw FormatError("expected an extractor checkpoint, got '" + ckpt.kind + "'");
  FeatureExtractor fe(extractor_variant_from_string(ckpt.meta.at("variant").get<std::string>()),
                      extractor_arch_from_json(ckpt.meta.at("architecture")), 0);
  restore_params(ckpt, fe.params(), "trunk.");
  fe.provenance_ = ckpt.meta.value("provenance", "");
  return fe;
}

FeatureExtractor FeatureExtractor::from_weight_manifest(const std::string &manifest_path,
                                                        ExtractorVariant variant) {
  FeatureExtractor fe(variant, extractor_arch_from_json(read_weight_architecture(manifest_path)),
                      0);
  load_weight_manifest(manifest_path, fe.params());
  fe.provenance_ = "weights:" + std::filesystem::path(manifest_path).filename().string();
  return fe;
}

nlohmann::json to_json(const FinetuneConfig &c) {
  return {{"epochs", c.epochs},       {"lr", c.lr},           {"batch_size", c.batch_size},
          {"patience", c.patience},   {"val_frac", c.val_frac}, {"seed", c.seed}};
}

FinetuneConfig finetune_config_from_json(const nlohmann::json &j) {
  FinetuneConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.lr = j.value("lr", c.lr);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.patience = j.value("patience", c.patience);
  c.val_frac = j.value("val_frac", c.val_frac);
  c.seed = j.value("seed", c.seed);
  if (c.epochs < 1 || c.batch_size < 1 || c.patience < 1 || !(c.lr > 0) || c.val_frac < 0 ||
      c.val_frac >= 1)
    throw ConfigError("finetune: invalid configuration");
  return c;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
holdout_split(const std::vector<Sample> &samples, double frac, Rng &rng) {
  std::map<int, std::vector<std::size_t>> by_id;
  for (std::size_t i = 0; i < samples.size(); ++i)
    by_id[samples[i].identity].push_back(i);
  std::vector<std::size_t> fit, val;
  for (auto &[id, idx] : by_id) {
    std::shuffle(idx.begin(), idx.end(), rng);
    std::size_t n_val = 0;
    if (frac > 0 && idx.size() >= 2)
      n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(frac * idx.size())));
    n_val = std::min(n_val, idx.size() - 1);
    val.insert(val.end(), idx.begin(), idx.begin() + static_cast<long>(n_val));
    fit.insert(fit.end(), idx.begin() + static_cast<long>(n_val), idx.end());
  }
  std::sort(fit.begin(), fit.end());
  std::sort(val.begin(), val.end());
  return {fit, val};
}

namespace {

Tensor gather_images(const std::vector<Sample> &samples, const std::vector<std::size_t> &idx) {
  std::vector<const Image *> imgs;
  for (std::size_t i : idx)
    imgs.push_back(&samples[i].image);
  return nn::images_to_tensor(imgs);
}

int argmax_row(const Tensor &t, int row) {
  auto s = t.sample(row);
  return static_cast<int>(std::max_element(s.begin(), s.end()) - s.begin());
}

} // namespace

FeatureExtractor finetune_reid(const FeatureExtractor &base, const std::vector<Sample> &train,
                               const FinetuneConfig &cfg, FinetuneHistory *history) {
  if (train.empty())
    throw Error("finetune_reid: empty training set");
  std::vector<int> ids;
  for (const auto &s : train)
    ids.push_back(s.identity);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  auto label_of = [&](int id) {
    return static_cast<int>(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
  };

  Rng rng(cfg.seed);
  auto [fit, val] = holdout_split(train, cfg.val_frac, rng);

  FeatureExtractor fe = base;
  nn::Dense head(fe.dim(), static_cast<int>(ids.size()), 1.0);
  head.init(rng);
  nn::NamedParams params = fe.params();
  for (auto &p : nn::named_params(head, "head."))
    params.push_back(p);
  nn::Adam opt(params, {cfg.lr, 0.9, 0.999, 1e-8, 0.0});

  auto accuracy = [&](const std::vector<std::size_t> &idx) {
    if (idx.empty())
      return 0.0;
    Tensor logits = head.forward(fe.extract_batch(gather_images(train, idx)), Pass{});
    int correct = 0;
    for (std::size_t i = 0; i < idx.size(); ++i)
      correct += argmax_row(logits, static_cast<int>(i)) == label_of(train[idx[i]].identity);
    return static_cast<double>(correct) / static_cast<double>(idx.size());
  };

  FinetuneHistory hist;
  nn::Sequential best = fe.trunk();
  double best_acc = -1.0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(fit.begin(), fit.end(), rng);
    double loss_sum = 0;
    for (std::size_t start = 0; start < fit.size(); start += cfg.batch_size) {
      std::vector<std::size_t> batch(
          fit.begin() + static_cast<long>(start),
          fit.begin() + static_cast<long>(std::min(fit.size(), start + cfg.batch_size)));
      std::vector<int> labels;
      for (std::size_t i : batch)
        labels.push_back(label_of(train[i].identity));
      opt.zero_grad();
      Tensor feats = fe.trunk().forward(gather_images(train, batch), Pass{true, &rng});
      Tensor logits = head.forward(feats, Pass{true, &rng});
      const double loss = classification_loss(logits, labels);
      check_finite(loss, "finetune loss");
      loss_sum += loss;
      Tensor g = classification_loss_grad(logits, labels);
      for (double &v : g.data)
        v /= static_cast<double>(batch.size());
      fe.trunk().backward(head.backward(g));
      opt.step();
    }
    hist.train_loss.push_back(loss_sum / static_cast<double>(fit.size()));
    const double acc = accuracy(val.empty() ? fit : val);
    hist.val_accuracy.push_back(acc);
    if (acc > best_acc) {
      best_acc = acc;
      best = fe.trunk();
      hist.best_epoch = epoch;
    } else if (epoch - hist.best_epoch >= cfg.patience) {
      break;
    }
  }
  fe.trunk() = best;
  fe.set_provenance(ExtractorVariant::reid_finetuned,
                    "finetuned from [" + base.provenance() + "] best_epoch=" +
                        std::to_string(hist.best_epoch));
  if (history)
    *history = hist;
  return fe;
}

// ------------------------------------------------------------------ generator

nlohmann::json to_json(const GeneratorArch &a) {
  return {{"descriptor_dim", a.descriptor_dim}, {"height", a.height},
          {"width", a.width},                   {"residual_blocks", a.residual_blocks},
          {"base_channels", a.base_channels}, {"upsample_stages", a.upsample_stages}};
}

GeneratorArch generator_arch_from_json(const nlohmann::json &j) {
  GeneratorArch a;
  a.descriptor_dim = j.value("descriptor_dim", a.descriptor_dim);
  a.height = j.value("height", a.height);
  a.width = j.value("width", a.width);
  a.residual_blocks = j.value("residual_blocks", a.residual_blocks);
  a.base_channels = j.value("base_channels", a.base_channels);
  a.upsample_stages = j.value("upsample_stages", a.upsample_stages);
  return a;
}

Generator::Generator(GeneratorArch arch, std::uint64_t seed) : arch_(arch) {
  if (arch_.upsample_stages < 0 || arch_.upsample_stages > 6)
    throw ConfigError("generator: upsample_stages must lie in [0,6]");
  const int step = 1 << arch_.upsample_stages;
  if (arch_.height % step != 0 || arch_.width % step != 0 || arch_.height <= 0 ||
      arch_.width <= 0)
    throw ConfigError("generator: output height and width must be positive multiples of " +
                      std::to_string(step));
  if (arch_.descriptor_dim <= 0 || arch_.residual_blocks < 0 || arch_.base_channels < 1)
    throw ConfigError("generator: invalid architecture");
  const int h0 = arch_.height / step, w0 = arch_.width / step;
  int c = arch_.base_channels;
  net_.add<nn::Dense>(arch_.descriptor_dim + kPoseDim, c * h0 * w0);
  net_.add<nn::LeakyReLU>(0.2);
  net_.add<nn::Reshape>(c, h0, w0);
  for (int r = 0; r < arch_.residual_blocks; ++r)
    net_.push(std::make_unique<nn::Residual>(nn::residual_block(c)));
  for (int s = 0; s < arch_.upsample_stages; ++s) {
    const int next = std::max(8, c / 2);
    net_.add<nn::Upsample2x>();
    net_.add<nn::Conv2d>(c, next, 3, 1, 1);
    net_.add<nn::LeakyReLU>(0.2);
    c = next;
  }
  net_.add<nn::Conv2d>(c, 3, 3, 1, 1, 1.0);
  net_.add<nn::Sigmoid>();
  Rng rng(seed);
  net_.init(rng);
}

Tensor Generator::forward(const Tensor &desc, const Tensor &pose, const Pass &pass) {
  if (static_cast<int>(desc.sample_size()) != arch_.descriptor_dim)
    throw Error("generator: descriptor has " + std::to_string(desc.sample_size()) +
                " values, expected " + std::to_string(arch_.descriptor_dim));
  if (static_cast<int>(pose.sample_size()) != kPoseDim || pose.n != desc.n)
    throw Error("generator: pose batch must be (N, 50) matching the descriptors");
  return net_.forward(nn::concat_features(desc, pose), pass);
}

Tensor Generator::backward(const Tensor &grad_image) { return net_.backward(grad_image); }

Image Generator::generate(const Descriptor &desc, const PoseVector &pose) {
  Tensor out = forward(nn::rows_to_tensor({desc}), pose_tensor({pose}), Pass{});
  return nn::tensor_to_image(out);
}

nlohmann::json to_json(const DiscriminatorArch &a) {
  return {{"height", a.height},
          {"width", a.width},
          {"num_classes", a.num_classes},
          {"base_channels", a.base_channels},
          {"depth", a.depth}};
}

DiscriminatorArch discriminator_arch_from_json(const nlohmann::json &j) {
  DiscriminatorArch a;
  a.height = j.value("height", a.height);
  a.width = j.value("width", a.width);
  a.num_classes = j.value("num_classes", a.num_classes);
  a.base_channels = j.value("base_channels", a.base_channels);
  a.depth = j.value("depth", a.depth);
  return a;
}

Discriminator::Discriminator(DiscriminatorArch arch, std::uint64_t seed) : arch_(arch) {
  if (arch_.num_classes < 1 || arch_.depth < 1 || arch_.base_channels < 1)
    throw ConfigError("discriminator: invalid architecture");
  int c = 3, h = arch_.height, w = arch_.width;
  for (int d = 0; d < arch_.depth; ++d) {
    const int next = arch_.base_channels << d;
    trunk_.add<nn::Conv2d>(c, next, 3, 2, 1);
    trunk_.add<nn::LeakyReLU>(0.2);
    c = next;
    h = (h + 1) / 2;
    w = (w + 1) / 2;
  }
  const int flat = c * h * w;
  adv_head_.add<nn::Dense>(flat, 1, 1.0);
  adv_head_.add<nn::Sigmoid>();
  cls_head_.add<nn::Dense>(flat, arch_.num_classes, 1.0);
  Rng rng(seed);
  trunk_.init(rng);
  adv_head_.init(rng);
  cls_head_.init(rng);
}

DiscriminatorOutput Discriminator::forward(const Tensor &images, const Pass &pass) {
  Tensor f = trunk_.forward(images, pass);
  return {adv_head_.forward(f, pass), cls_head_.forward(f, pass)};
}

Tensor Discriminator::backward(const Tensor &grad_prob, const Tensor &grad_logits) {
  Tensor g;
  auto accumulate = [&](Tensor part) {
    if (g.data.empty())
      g = std::move(part);
    else
      for (std::size_t i = 0; i < g.size(); ++i)
        g.data[i] += part.data[i];
  };
  if (grad_prob.n > 0)
    accumulate(adv_head_.backward(grad_prob));
  if (grad_logits.n > 0)
    accumulate(cls_head_.backward(grad_logits));
  if (g.data.empty())
    throw Error("discriminator backward: no gradient supplied");
  return trunk_.backward(g);
}

nn::NamedParams Discriminator::params() {
  nn::NamedParams out;
  trunk_.collect("trunk.", out);
  adv_head_.collect("adv.", out);
  cls_head_.collect("cls.", out);
  return out;
}

// ------------------------------------------------------------------ losses

double adversarial_loss(std::span<const double> d_real, std::span<const double> d_fake) {
  if (d_real.size() != d_fake.size() || d_real.empty())
    throw Error("adversarial_loss: batches must be non-empty and of equal size");
  double s = 0;
  for (std::size_t i = 0; i < d_real.size(); ++i)
    s += std::log(clamp_prob(d_real[i])) + std::log(1.0 - clamp_prob(d_fake[i]));
  return s / static_cast<double>(d_real.size());
}

double adversarial_loss(double d_real, double d_fake) {
  return adversarial_loss(std::span<const double>(&d_real, 1),
                          std::span<const double>(&d_fake, 1));
}

double l2_loss(const Tensor &target, const Tensor &generated) {
  if (!target.same_shape(generated))
    throw Error("l2_loss: shape mismatch " + target.shape_string() + " vs " +
                generated.shape_string());
  if (target.n == 0)
    return 0.0;
  double total = 0;
  for (int n = 0; n < target.n; ++n) {
    auto a = target.sample(n), b = generated.sample(n);
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
      s += (a[i] - b[i]) * (a[i] - b[i]);
    total += std::sqrt(s);
  }
  return total / target.n;
}

double l2_loss(const Image &target, const Image &generated) {
  if (target.height != generated.height || target.width != generated.width)
    throw Error("l2_loss: shape mismatch");
  return l2_loss(nn::image_to_tensor(target), nn::image_to_tensor(generated));
}

Tensor l2_loss_grad(const Tensor &target, const Tensor &generated) {
  if (!target.same_shape(generated))
    throw Error("l2_loss_grad: shape mismatch");
  Tensor g(generated.n, generated.c, generated.h, generated.w);
  for (int n = 0; n < target.n; ++n) {
    auto a = target.sample(n), b = generated.sample(n);
    auto out = g.sample(n);
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
      s += (a[i] - b[i]) * (a[i] - b[i]);
    const double norm = std::sqrt(s);
    if (norm == 0)
      continue;
    for (std::size_t i = 0; i < a.size(); ++i)
      out[i] = (b[i] - a[i]) / (norm * target.n);
  }
  return g;
}

namespace {

double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0;
  for (double x : v)
    s += std::exp(x - m);
  return m + std::log(s);
}

void check_labels(const Tensor &logits, const std::vector<int> &labels) {
  if (static_cast<int>(labels.size()) != logits.n)
    throw Error("classification_loss: label count does not match the batch");
  for (int y : labels)
    if (y < 0 || y >= logits.c)
      throw Error("classification_loss: label " + std::to_string(y) + " outside [0, " +
                  std::to_string(logits.c) + ")");
}

} // namespace

double classification_loss(const Tensor &logits, const std::vector<int> &labels) {
  check_labels(logits, labels);
  double total = 0;
  for (int n = 0; n < logits.n; ++n) {
    auto row = logits.sample(n);
    total += log_sum_exp(row) - row[labels[n]];
  }
  return total;
}

double classification_loss(const std::vector<double> &logits, int label) {
  return classification_loss(nn::rows_to_tensor({logits}), {label});
}

Tensor classification_loss_grad(const Tensor &logits, const std::vector<int> &labels) {
  check_labels(logits, labels);
  Tensor g(logits.n, logits.c, logits.h, logits.w);
  for (int n = 0; n < logits.n; ++n) {
    auto row = logits.sample(n);
    auto out = g.sample(n);
    const double lse = log_sum_exp(row);
    for (std::size_t c = 0; c < row.size(); ++c)
      out[c] = std::exp(row[c] - lse);
    out[labels[n]] -= 1.0;
  }
  return g;
}

double generator_adversarial(std::span<const double> d_fake, bool non_saturating) {
  if (d_fake.empty())
    throw Error("generator_adversarial: empty batch");
  double s = 0;
  for (double p : d_fake)
    s += non_saturating ? -std::log(clamp_prob(p)) : std::log(1.0 - clamp_prob(p));
  return s / static_cast<double>(d_fake.size());
}

Tensor generator_adversarial_grad(const Tensor &d_fake, bool non_saturating) {
  Tensor g(d_fake.n, d_fake.c, d_fake.h, d_fake.w);
  const double inv_n = 1.0 / static_cast<double>(d_fake.size());
  for (std::size_t i = 0; i < d_fake.size(); ++i) {
    const double p = d_fake.data[i];
    if (!inside_clamp(p))
      continue;
    g.data[i] = non_saturating ? -inv_n / p : -inv_n / (1.0 - p);
  }
  return g;
}

double discriminator_adversarial(std::span<const double> d_real, std::span<const double> d_fake,
                                 std::span<const double> real_targets) {
  if (d_real.size() != real_targets.size() || d_real.empty() || d_fake.empty())
    throw Error("discriminator_adversarial: inconsistent batch sizes");
  double real = 0, fake = 0;
  for (std::size_t i = 0; i < d_real.size(); ++i) {
    const double p = clamp_prob(d_real[i]), t = real_targets[i];
    real -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
  }
  for (double p : d_fake)
    fake -= std::log(1.0 - clamp_prob(p));
  return real / static_cast<double>(d_real.size()) + fake / static_cast<double>(d_fake.size());
}

std::pair<Tensor, Tensor> discriminator_adversarial_grad(const Tensor &d_real,
                                                         const Tensor &d_fake,
                                                         std::span<const double> real_targets) {
  Tensor gr(d_real.n, d_real.c, d_real.h, d_real.w);
  Tensor gf(d_fake.n, d_fake.c, d_fake.h, d_fake.w);
  const double inv_r = 1.0 / static_cast<double>(d_real.size());
  const double inv_f = 1.0 / static_cast<double>(d_fake.size());
  for (std::size_t i = 0; i < d_real.size(); ++i) {
    const double p = d_real.data[i], t = real_targets[i];
    if (inside_clamp(p))
      gr.data[i] = -inv_r * (t / p - (1.0 - t) / (1.0 - p));
  }
  for (std::size_t i = 0; i < d_fake.size(); ++i) {
    const double p = d_fake.data[i];
    if (inside_clamp(p))
      gf.data[i] = inv_f / (1.0 - p);
  }
  return {gr, gf};
}

TotalLoss total_gan_loss(const LossParts &p, const LossWeights &w) {
  return {w.adversarial * p.adv_gen + w.l2 * p.l2 + w.classification * p.cls_fake,
          w.adversarial * p.adv_disc + w.classification * p.cls_real};
}

// ------------------------------------------------------------------ pairs

PairSampler::PairSampler(const std::vector<Sample> &samples,
                         const std::vector<int> &class_identities)
    : samples_(&samples) {
  std::map<int, std::vector<std::size_t>> by_id;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!samples[i].pose) {
      ++excluded_;
      continue;
    }
    ++posed_;
    by_id[samples[i].identity].push_back(i);
  }
  for (auto &[id, idx] : by_id) {
    if (idx.size() < 2)
      continue;
    auto it = std::lower_bound(class_identities.begin(), class_identities.end(), id);
    if (it == class_identities.end() || *it != id)
      throw Error("pair sampler: identity " + std::to_string(id) + " has no class label");
    groups_.emplace_back(static_cast<int>(it - class_identities.begin()), std::move(idx));
  }
  if (groups_.empty())
    throw Error("pair sampler: no identity has two or more posed images");
}

TrainingPair PairSampler::next(Rng &rng) const {
  const auto &[label, idx] = groups_[uniform_index(rng, groups_.size())];
  const std::size_t a = uniform_index(rng, idx.size());
  std::size_t b = uniform_index(rng, idx.size() - 1);
  if (b >= a)
    ++b;
  TrainingPair p;
  p.source = idx[a];
  p.target = idx[b];
  p.pose = *(*samples_)[p.target].pose;
  p.label = label;
  return p;
}

std::vector<TrainingPair> make_training_pairs(const std::vector<Sample> &samples,
                                              const std::vector<int> &class_identities,
                                              std::size_t count, std::uint64_t seed) {
  PairSampler sampler(samples, class_identities);
  Rng rng(seed);
  std::vector<TrainingPair> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(sampler.next(rng));
  return out;
}

// ------------------------------------------------------------------ training

void GanTrainConfig::validate() const {
  if (!(lr > 0))
    throw ConfigError("gan.lr must be positive");
  if (!(adam_beta1 > 0 && adam_beta1 < 1 && adam_beta2 > 0 && adam_beta2 < 1))
    throw ConfigError("gan Adam betas must lie in (0,1)");
  if (batch_size < 1 || epochs < 1)
    throw ConfigError("gan.batch_size and gan.epochs must be at least 1");
  const auto [lo, hi] = label_smooth_noise;
  if (!(0 <= lo && lo <= hi && hi <= 1))
    throw ConfigError("gan.label_smooth_noise must be an ordered range inside [0,1]");
  if (checkpoint_every < 0 || pairs_per_epoch < 0)
    throw ConfigError("gan.checkpoint_every and gan.pairs_per_epoch must be non-negative");
  if (weights.adversarial < 0 || weights.l2 < 0 || weights.classification < 0)
    throw ConfigError("gan loss weights must be non-negative");
  if (residual_blocks < 0 || generator_channels < 1 || discriminator_channels < 1)
    throw ConfigError("gan architecture sizes must be positive");
}

nlohmann::json to_json(const GanTrainConfig &c) {
  return {{"lr", c.lr},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"label_smooth_noise", {c.label_smooth_noise.first, c.label_smooth_noise.second}},
          {"seed", c.seed},
          {"checkpoint_every", c.checkpoint_every},
          {"pairs_per_epoch", c.pairs_per_epoch},
          {"augment", c.augment},
          {"non_saturating", c.non_saturating},
          {"lambda_adv", c.weights.adversarial},
          {"lambda_l2", c.weights.l2},
          {"lambda_cls", c.weights.classification},
          {"residual_blocks", c.residual_blocks},
          {"generator_channels", c.generator_channels},
          {"discriminator_channels", c.discriminator_channels}};
}

GanTrainConfig gan_config_from_json(const nlohmann::json &j) {
  GanTrainConfig c;
  c.lr = j.value("lr", c.lr);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  if (j.contains("label_smooth_noise")) {
    const auto r = j.at("label_smooth_noise").get<std::vector<double>>();
    if (r.size() != 2)
      throw ConfigError("gan.label_smooth_noise must be [lo, hi]");
    c.label_smooth_noise = {r[0], r[1]};
  }
  c.seed = j.value("seed", c.seed);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.pairs_per_epoch = j.value("pairs_per_epoch", c.pairs_per_epoch);
  c.augment = j.value("augment", c.augment);
  c.non_saturating = j.value("non_saturating", c.non_saturating);
  c.weights.adversarial = j.value("lambda_adv", c.weights.adversarial);
  c.weights.l2 = j.value("lambda_l2", c.weights.l2);
  c.weights.classification = j.value("lambda_cls", c.weights.classification);
  c.residual_blocks = j.value("residual_blocks", c.residual_blocks);
  c.generator_channels = j.value("generator_channels", c.generator_channels);
  c.discriminator_channels = j.value("discriminator_channels", c.discriminator_channels);
  c.validate();
  return c;
}

nlohmann::json to_json(const GanHistory &h) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto &e : h.epochs)
    epochs.push_back({{"gen", e.gen},
                      {"disc", e.disc},
                      {"l2", e.l2},
                      {"adv_gen", e.adv_gen},
                      {"adv_disc", e.adv_disc},
                      {"cls_real", e.cls_real},
                      {"cls_fake", e.cls_fake}});
  return {{"epochs", epochs}, {"excluded_unposed", h.excluded_unposed}};
}

Checkpoint gan_checkpoint(Generator &g, Discriminator &d, const GanTrainConfig &cfg, int epoch,
                          const Rng &rng) {
  Checkpoint ckpt;
  ckpt.kind = "ptgan";
  ckpt.epoch = epoch;
  ckpt.rng_state = rng_state(rng);
  ckpt.config = to_json(cfg);
  ckpt.meta = {{"generator", to_json(g.arch())}, {"discriminator", to_json(d.arch())}};
  store_params(ckpt, g.params(), "generator.");
  store_params(ckpt, d.params(), "discriminator.");
  return ckpt;
}

std::pair<Generator, Discriminator> gan_from_checkpoint(const Checkpoint &ckpt) {
  if (ckpt.kind != "ptgan")
    throw FormatError("expected a ptgan checkpoint, got '" + ckpt.kind + "'");
  Generator g(generator_arch_from_json(ckpt.meta.at("generator")), 0);
  Discriminator d(discriminator_arch_from_json(ckpt.meta.at("discriminator")), 0);
  restore_params(ckpt, g.params(), "generator.");
  restore_params(ckpt, d.params(), "discriminator.");
  return {std::move(g), std::move(d)};
}

GanModels train_ptgan(const std::vector<Sample> &train, const std::vector<int> &class_identities,
                      const FeatureExtractor &fr1, const GanTrainConfig &cfg,
                      const AugmentConfig &aug, const std::string &checkpoint_dir) {
  cfg.validate();
  aug.validate();
  PairSampler sampler(train, class_identities);
  if (sampler.excluded() > 0)
    warn("train_ptgan: " + std::to_string(sampler.excluded()) +
         " training samples without a pose excluded from pair construction");

  const int H = fr1.arch().height, W = fr1.arch().width;
  Generator G({fr1.dim(), H, W, cfg.residual_blocks, cfg.generator_channels},
              cfg.seed ^ 0x6a09e667f3bcc908ULL);
  Discriminator D({H, W, static_cast<int>(class_identities.size()), cfg.discriminator_channels, 3},
                  cfg.seed ^ 0xbb67ae8584caa73bULL);
  nn::AdamConfig acfg{cfg.lr, cfg.adam_beta1, cfg.adam_beta2, 1e-8, 0.0};
  nn::Adam opt_g(G.params(), acfg);
  nn::Adam opt_d(D.params(), acfg);
  Rng rng(cfg.seed);
  const Pass pass{true, &rng};
  const auto &w = cfg.weights;

  std::map<std::size_t, Descriptor> plain_desc;
  auto source_descriptor = [&](std::size_t idx) -> Descriptor {
    if (cfg.augment)
      return fr1.extract(augment(train[idx].image, aug, rng));
    auto it = plain_desc.find(idx);
    if (it == plain_desc.end())
      it = plain_desc.emplace(idx, fr1.extract(train[idx].image)).first;
    return it->second;
  };

  const int per_epoch = cfg.pairs_per_epoch > 0 ? cfg.pairs_per_epoch
                                                : static_cast<int>(sampler.posed_samples());
  GanHistory history;
  history.excluded_unposed = sampler.excluded();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochStats sum;
    int batches = 0;
    for (int done = 0; done < per_epoch; done += cfg.batch_size) {
      const int b = std::min(cfg.batch_size, per_epoch - done);
      std::vector<TrainingPair> pairs;
      for (int i = 0; i < b; ++i)
        pairs.push_back(sampler.next(rng));

      std::vector<std::vector<double>> descs;
      std::vector<PoseVector> poses;
      std::vector<const Image *> targets;
      std::vector<int> labels;
      for (const auto &p : pairs) {
        descs.push_back(source_descriptor(p.source));
        poses.push_back(p.pose);
        targets.push_back(&train[p.target].image);
        labels.push_back(p.label);
      }
      const Tensor desc = nn::rows_to_tensor(descs);
      const Tensor pose = pose_tensor(poses);
      const Tensor real = nn::images_to_tensor(targets);
      std::vector<double> smooth(b);
      for (double &t : smooth)
        t = uniform(rng, cfg.label_smooth_noise.first, cfg.label_smooth_noise.second);

      const Tensor fake = G.forward(desc, pose, pass);

      // Discriminator step.
      opt_d.zero_grad();
      LossParts parts;
      auto out_real = D.forward(real, pass);
      {
        auto [g_real, unused] = discriminator_adversarial_grad(out_real.prob, out_real.prob, smooth);
        (void)unused;
        for (double &v : g_real.data)
          v *= w.adversarial;
        Tensor g_cls = classification_loss_grad(out_real.logits, labels);
        for (double &v : g_cls.data)
          v *= w.classification;
        D.backward(g_real, g_cls);
      }
      parts.cls_real = classification_loss(out_real.logits, labels);
      auto out_fake = D.forward(fake, pass);
      {
        auto [unused, g_fake] = discriminator_adversarial_grad(out_real.prob, out_fake.prob, smooth);
        (void)unused;
        for (double &v : g_fake.data)
          v *= w.adversarial;
        D.backward(g_fake, Tensor());
      }
      parts.adv_disc = discriminator_adversarial(out_real.prob.data, out_fake.prob.data, smooth);
      opt_d.step();

      // Generator step through the updated discriminator.
      opt_g.zero_grad();
      auto out_gen = D.forward(fake, pass);
      parts.adv_gen = generator_adversarial(out_gen.prob.data, cfg.non_saturating);
      parts.cls_fake = classification_loss(out_gen.logits, labels);
      parts.l2 = l2_loss(real, fake);
      Tensor g_adv = generator_adversarial_grad(out_gen.prob, cfg.non_saturating);
      for (double &v : g_adv.data)
        v *= w.adversarial;
      Tensor g_cls = classification_loss_grad(out_gen.logits, labels);
      for (double &v : g_cls.data)
        v *= w.classification;
      Tensor g_img = D.backward(g_adv, g_cls);
      const Tensor g_l2 = l2_loss_grad(real, fake);
      for (std::size_t i = 0; i < g_img.size(); ++i)
        g_img.data[i] += w.l2 * g_l2.data[i];
      G.backward(g_img);
      opt_g.step();

      const TotalLoss total = total_gan_loss(parts, w);
      check_finite(total.gen, "generator loss (epoch " + std::to_string(epoch) + ")");
      check_finite(total.disc, "discriminator loss (epoch " + std::to_string(epoch) + ")");
      sum.gen += total.gen;
      sum.disc += total.disc;
      sum.l2 += parts.l2;
      sum.adv_gen += parts.adv_gen;
      sum.adv_disc += parts.adv_disc;
      sum.cls_real += parts.cls_real;
      sum.cls_fake += parts.cls_fake;
      ++batches;
    }
    for (double *v : {&sum.gen, &sum.disc, &sum.l2, &sum.adv_gen, &sum.adv_disc, &sum.cls_real,
                      &sum.cls_fake})
      *v /= batches;
    history.epochs.push_back(sum);

    if (!checkpoint_dir.empty() && cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "gan_epoch%03d.ckpt", epoch);
      save_checkpoint(gan_checkpoint(G, D, cfg, epoch, rng),
                      (std::filesystem::path(checkpoint_dir) / name).string());
    }
  }
  if (!checkpoint_dir.empty())
    save_checkpoint(gan_checkpoint(G, D, cfg, cfg.epochs, rng),
                    (std::filesystem::path(checkpoint_dir) / "gan.ckpt").string());
  return {std::move(G), std::move(D), std::move(history)};
}

} // namespace reid

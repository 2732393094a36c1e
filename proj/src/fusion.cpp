#include "reid/fusion.hpp"

#include <algorithm>
#include <cmath>

namespace reid {

using nn::Pass;
using nn::Tensor;

FusionShapes fusion_shapes(int num_generated, int descriptor_dim) {
  if (num_generated < 1 || descriptor_dim < 1)
    throw ConfigError("FusionNet needs N >= 1 and D >= 1");
  const int d = descriptor_dim;
  return {{(num_generated + 1) * d, 4 * d}, {4 * d, d}, {d, d}};
}

namespace {

nn::Dense make_dense(const DenseShape &s, double slope) { return nn::Dense(s.in, s.out, slope); }

} // namespace

FusionNet::FusionNet(int num_generated, int descriptor_dim, int num_classes, double dropout,
                     std::uint64_t seed)
    : n_(num_generated), d_(descriptor_dim), c_(num_classes), dropout_(dropout),
      fc1_(make_dense(fusion_shapes(num_generated, descriptor_dim).fc1, 0.2)),
      bn1_(4 * descriptor_dim), act1_(0.2), drop1_(dropout),
      fc2_(make_dense(fusion_shapes(num_generated, descriptor_dim).fc2, 1.0)),
      bn2_(descriptor_dim),
      output_(make_dense(fusion_shapes(num_generated, descriptor_dim).output, 1.0)),
      head_(descriptor_dim, std::max(1, num_classes), 1.0) {
  if (num_classes < 1)
    throw ConfigError("FusionNet needs at least one class");
  if (dropout < 0 || dropout >= 1)
    throw ConfigError("FusionNet dropout must lie in [0,1)");
  Rng rng(seed);
  fc1_.init(rng);
  bn1_.init(rng);
  fc2_.init(rng);
  bn2_.init(rng);
  head_.init(rng);
  std::fill(output_.weight.value.begin(), output_.weight.value.end(), 0.0);
  std::fill(output_.bias.value.begin(), output_.bias.value.end(), 0.0);
  for (int i = 0; i < d_; ++i)
    output_.weight.value[static_cast<std::size_t>(i) * d_ + i] = 1.0;
}

Tensor FusionNet::input_row(const Descriptor &source,
                            const std::vector<Descriptor> &generated) const {
  if (static_cast<int>(generated.size()) != n_)
    throw Error("fuse: expected " + std::to_string(n_) + " generated descriptors, got " +
                std::to_string(generated.size()));
  if (static_cast<int>(source.size()) != d_)
    throw Error("fuse: source descriptor has length " + std::to_string(source.size()) +
                ", expected " + std::to_string(d_));
  Tensor row(1, (n_ + 1) * d_);
  std::copy(source.begin(), source.end(), row.data.begin());
  for (int k = 0; k < n_; ++k) {
    if (static_cast<int>(generated[k].size()) != d_)
      throw Error("fuse: generated descriptor " + std::to_string(k) + " has length " +
                  std::to_string(generated[k].size()));
    std::copy(generated[k].begin(), generated[k].end(),
              row.data.begin() + static_cast<long>(k + 1) * d_);
  }
  return row;
}

Tensor FusionNet::branch(const Tensor &input, const Pass &pass) const {
  Tensor h = fc1_.forward(input, pass);
  h = bn1_.forward(h, pass);
  h = act1_.forward(h, pass);
  h = drop1_.forward(h, pass);
  h = fc2_.forward(h, pass);
  return bn2_.forward(h, pass);
}

void FusionNet::recalibrate(const Tensor &input) {
  const Pass inference{};
  Tensor h = fc1_.forward(input, inference);
  bn1_.set_statistics(h);
  h = bn1_.forward(h, inference);
  h = act1_.forward(h, inference);
  h = fc2_.forward(h, inference);
  bn2_.set_statistics(h);
}

Tensor FusionNet::forward_impl(const Tensor &input, const Pass &pass) const {
  if (static_cast<int>(input.sample_size()) != (n_ + 1) * d_)
    throw Error("FusionNet: input has " + std::to_string(input.sample_size()) +
                " features, expected " + std::to_string((n_ + 1) * d_));
  Tensor a = branch(input, pass);
  for (int b = 0; b < input.n; ++b) {
    auto src = input.sample(b);
    auto dst = a.sample(b);
    for (int i = 0; i < d_; ++i)
      dst[i] += src[i];
  }
  return output_.forward(a, pass);
}

Tensor FusionNet::forward(const Tensor &input, const Pass &pass) {
  return forward_impl(input, pass);
}

Tensor FusionNet::forward_logits(const Tensor &input, const Pass &pass) {
  return head_.forward(forward_impl(input, pass), pass);
}

Tensor FusionNet::backward(const Tensor &grad_output) {
  Tensor ga = output_.backward(grad_output);
  Tensor g = bn2_.backward(ga);
  g = fc2_.backward(g);
  g = drop1_.backward(g);
  g = act1_.backward(g);
  g = bn1_.backward(g);
  g = fc1_.backward(g);
  for (int b = 0; b < g.n; ++b) {
    auto dst = g.sample(b);
    auto src = ga.sample(b);
    for (int i = 0; i < d_; ++i)
      dst[i] += src[i];
  }
  return g;
}

Tensor FusionNet::backward_logits(const Tensor &grad_logits) {
  return backward(head_.backward(grad_logits));
}

Descriptor FusionNet::fuse(const Descriptor &source,
                           const std::vector<Descriptor> &generated) const {
  return forward_impl(input_row(source, generated), Pass{}).data;
}

Descriptor FusionNet::pre_skip(const Descriptor &source,
                               const std::vector<Descriptor> &generated) const {
  return branch(input_row(source, generated), Pass{}).data;
}

void FusionNet::reset_to_skip() {
  std::fill(bn2_.gamma.value.begin(), bn2_.gamma.value.end(), 0.0);
  std::fill(bn2_.beta.value.begin(), bn2_.beta.value.end(), 0.0);
  std::fill(output_.weight.value.begin(), output_.weight.value.end(), 0.0);
  std::fill(output_.bias.value.begin(), output_.bias.value.end(), 0.0);
  for (int i = 0; i < d_; ++i)
    output_.weight.value[static_cast<std::size_t>(i) * d_ + i] = 1.0;
}

nn::NamedParams FusionNet::params() {
  nn::NamedParams out;
  fc1_.collect("fc_1.", out);
  bn1_.collect("bn_1.", out);
  fc2_.collect("fc_2.", out);
  bn2_.collect("bn_2.", out);
  output_.collect("output.", out);
  return out;
}

nn::NamedParams FusionNet::training_params() {
  nn::NamedParams out = params();
  head_.collect("head.", out);
  return out;
}

std::string FusionNet::hash() { return hash_params(params()); }

Checkpoint FusionNet::to_checkpoint() {
  Checkpoint ckpt;
  ckpt.kind = "fusion";
  ckpt.meta = {{"num_generated", n_},
               {"descriptor_dim", d_},
               {"num_classes", c_},
               {"dropout", dropout_}};
  store_params(ckpt, training_params(), "");
  return ckpt;
}

FusionNet FusionNet::from_checkpoint(const Checkpoint &ckpt) {
  if (ckpt.kind != "fusion")
    throw FormatError("expected a fusion checkpoint, got '" + ckpt.kind + "'");
  FusionNet net(ckpt.meta.at("num_generated").get<int>(), ckpt.meta.at("descriptor_dim").get<int>(),
                ckpt.meta.at("num_classes").get<int>(), ckpt.meta.at("dropout").get<double>(), 0);
  restore_params(ckpt, net.training_params(), "");
  return net;
}

// ------------------------------------------------------------------ pipeline

void Pipeline::require(bool need_fusion) const {
  if (!fr1)
    throw MissingPrerequisite("pipeline is missing F_R1 (run train-gan first)");
  if (!generator)
    throw MissingPrerequisite("pipeline is missing the generator (run train-gan first)");
  if (!poses)
    throw MissingPrerequisite("pipeline is missing the pose set (run cluster first)");
  if (!fr2)
    throw MissingPrerequisite("pipeline is missing F_R2 (run train-gan first)");
  if (need_fusion && !fusion)
    throw MissingPrerequisite("pipeline is missing FusionNet (run train-fusion first)");
}

std::vector<Image> Pipeline::render(const Image &image) {
  require(false);
  const Descriptor s = fr1->extract(image);
  const std::size_t n = poses->poses.size();
  std::vector<std::vector<double>> descs(n, s), codes;
  for (const auto &p : poses->poses)
    codes.push_back(encode_pose(p));
  const Tensor imgs =
      generator->forward(nn::rows_to_tensor(descs), nn::rows_to_tensor(codes), Pass{});
  std::vector<Image> out;
  for (std::size_t k = 0; k < n; ++k)
    out.push_back(nn::tensor_to_image(imgs, static_cast<int>(k)));
  return out;
}

std::vector<double> Pipeline::fusion_input(const Image &image) {
  require(false);
  const Descriptor s = fr1->extract(image);
  const std::size_t n = poses->poses.size();
  std::vector<std::vector<double>> descs(n, s), codes;
  for (const auto &p : poses->poses)
    codes.push_back(encode_pose(p));
  const Tensor imgs =
      generator->forward(nn::rows_to_tensor(descs), nn::rows_to_tensor(codes), Pass{});
  const Tensor g = fr2->extract_batch(imgs);
  std::vector<double> row = s;
  row.insert(row.end(), g.data.begin(), g.data.end());
  return row;
}

Descriptor Pipeline::extract_fused(const Image &image) {
  require(true);
  if (fusion->num_generated() != static_cast<int>(poses->poses.size()))
    throw ConfigError("FusionNet expects " + std::to_string(fusion->num_generated()) +
                      " generated views but the pose set holds " +
                      std::to_string(poses->poses.size()));
  return fusion->forward(nn::rows_to_tensor({fusion_input(image)}), Pass{}).data;
}

Descriptor Pipeline::extract_baseline(const Image &image) {
  if (!fr2)
    throw MissingPrerequisite("pipeline is missing F_R2 (run train-gan first)");
  return fr2->extract(image);
}

Descriptor Pipeline::extract_max_fused(const Image &image) {
  const std::vector<double> row = fusion_input(image);
  const std::size_t d = static_cast<std::size_t>(fr1->dim());
  Descriptor out(row.begin(), row.begin() + static_cast<long>(d));
  for (std::size_t off = d; off < row.size(); off += d)
    for (std::size_t i = 0; i < d; ++i)
      out[i] = std::max(out[i], row[off + i]);
  return out;
}

// ------------------------------------------------------------------ training

void FusionTrainConfig::validate() const {
  if (!(lr > 0) || weight_decay < 0)
    throw ConfigError("fusion.lr must be positive and fusion.weight_decay non-negative");
  if (!(adam_beta1 > 0 && adam_beta1 < 1 && adam_beta2 > 0 && adam_beta2 < 1))
    throw ConfigError("fusion Adam betas must lie in (0,1)");
  if (dropout < 0 || dropout >= 1)
    throw ConfigError("fusion.dropout must lie in [0,1)");
  if (epochs < 1 || batch_size < 2 || patience < 1)
    throw ConfigError("fusion needs epochs >= 1, batch_size >= 2, patience >= 1");
  if (val_frac < 0 || val_frac >= 1)
    throw ConfigError("fusion.val_frac must lie in [0,1)");
}

nlohmann::json to_json(const FusionTrainConfig &c) {
  return {{"lr", c.lr},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"weight_decay", c.weight_decay},
          {"dropout", c.dropout},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"patience", c.patience},
          {"val_frac", c.val_frac},
          {"augment", c.augment},
          {"seed", c.seed}};
}

FusionTrainConfig fusion_config_from_json(const nlohmann::json &j) {
  FusionTrainConfig c;
  c.lr = j.value("lr", c.lr);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.dropout = j.value("dropout", c.dropout);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.patience = j.value("patience", c.patience);
  c.val_frac = j.value("val_frac", c.val_frac);
  c.augment = j.value("augment", c.augment);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

nlohmann::json to_json(const FusionHistory &h) {
  return {{"train_loss", h.train_loss},
          {"train_accuracy", h.train_accuracy},
          {"val_accuracy", h.val_accuracy},
          {"best_epoch", h.best_epoch},
          {"stopped_early", h.stopped_early}};
}

FusionTraining train_fusion(const std::vector<Sample> &train,
                            const std::vector<int> &class_identities, Pipeline &pipeline,
                            const FusionTrainConfig &cfg, const AugmentConfig &aug) {
  cfg.validate();
  pipeline.require(false);
  if (train.empty())
    throw Error("train_fusion: empty training set");
  const int n = static_cast<int>(pipeline.poses->poses.size());
  const int d = pipeline.fr1->dim();
  if (pipeline.fr2->dim() != d)
    throw ConfigError("F_R1 and F_R2 descriptor sizes differ");

  std::vector<int> labels;
  for (const auto &s : train) {
    auto it = std::lower_bound(class_identities.begin(), class_identities.end(), s.identity);
    if (it == class_identities.end() || *it != s.identity)
      throw Error("train_fusion: identity " + std::to_string(s.identity) + " has no class label");
    labels.push_back(static_cast<int>(it - class_identities.begin()));
  }

  Rng rng(cfg.seed);
  auto [fit, val] = holdout_split(train, cfg.val_frac, rng);

  auto compute_inputs = [&](bool augmented) {
    std::vector<std::vector<double>> rows;
    rows.reserve(train.size());
    for (const auto &s : train)
      rows.push_back(pipeline.fusion_input(augmented ? augment(s.image, aug, rng) : s.image));
    return rows;
  };
  const std::vector<std::vector<double>> plain = compute_inputs(false);

  FusionNet net(n, d, static_cast<int>(class_identities.size()), cfg.dropout,
                cfg.seed ^ 0x3c6ef372fe94f82bULL);
  nn::Adam opt(net.training_params(),
               {cfg.lr, cfg.adam_beta1, cfg.adam_beta2, 1e-8, cfg.weight_decay});

  auto accuracy = [&](const std::vector<std::size_t> &idx) {
    if (idx.empty())
      return 0.0;
    std::vector<std::vector<double>> rows;
    for (std::size_t i : idx)
      rows.push_back(plain[i]);
    Tensor logits = net.forward_logits(nn::rows_to_tensor(rows), Pass{});
    int correct = 0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      auto r = logits.sample(static_cast<int>(k));
      correct += static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin()) ==
                 labels[idx[k]];
    }
    return static_cast<double>(correct) / static_cast<double>(idx.size());
  };

  std::vector<std::vector<double>> fit_rows;
  for (std::size_t i : fit)
    fit_rows.push_back(plain[i]);

  FusionHistory hist;
  FusionNet best = net;
  double best_acc = -1.0;
  const Pass pass{true, &rng};
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto inputs = cfg.augment ? compute_inputs(true) : plain;
    std::shuffle(fit.begin(), fit.end(), rng);
    double loss_sum = 0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < fit.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(fit.size(), start + cfg.batch_size);
      if (end - start < 2)
        continue;
      std::vector<std::vector<double>> rows;
      std::vector<int> y;
      for (std::size_t k = start; k < end; ++k) {
        rows.push_back(inputs[fit[k]]);
        y.push_back(labels[fit[k]]);
      }
      opt.zero_grad();
      Tensor logits = net.forward_logits(nn::rows_to_tensor(rows), pass);
      const double loss = classification_loss(logits, y);
      if (!std::isfinite(loss))
        throw DivergenceError("fusion loss became non-finite (epoch " + std::to_string(epoch) +
                              ")");
      loss_sum += loss;
      seen += y.size();
      Tensor g = classification_loss_grad(logits, y);
      for (double &v : g.data)
        v /= static_cast<double>(y.size());
      net.backward_logits(g);
      opt.step();
    }
    net.recalibrate(nn::rows_to_tensor(fit_rows));
    const nn::NamedParams tp = net.training_params();
    hist.train_loss.push_back((seen ? loss_sum / static_cast<double>(seen) : 0.0) +
                              cfg.weight_decay * nn::l2_penalty(tp));
    hist.train_accuracy.push_back(accuracy(fit));
    const double acc = val.empty() ? hist.train_accuracy.back() : accuracy(val);
    hist.val_accuracy.push_back(acc);
    if (acc > best_acc) {
      best_acc = acc;
      best = net;
      hist.best_epoch = epoch;
    } else if (epoch - hist.best_epoch >= cfg.patience) {
      hist.stopped_early = true;
      break;
    }
  }
  return {std::move(best), std::move(hist)};
}

} // namespace reid

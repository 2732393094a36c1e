#pragma once

#include "reid/augment.hpp"
#include "reid/checkpoint.hpp"
#include "reid/dataset.hpp"
#include "reid/nn/layers.hpp"
#include "reid/nn/optim.hpp"
#include "reid/pose.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace reid {

using Descriptor = std::vector<double>;

// ------------------------------------------------------------------ backbone

enum class ExtractorVariant { generic, reid_finetuned, toy };
std::string to_string(ExtractorVariant v);
ExtractorVariant extractor_variant_from_string(const std::string &s);

/// Convolutional trunk: conv3x3 to channels[0], then one stride-2 conv3x3 per
/// further entry of `channels`, a 1x1 projection to descriptor_dim, and global
/// average pooling. LeakyReLU between convolutions.
struct ExtractorArch {
  int height = 128;
  int width = 64;
  int descriptor_dim = 2048;
  std::vector<int> channels{16, 32, 64};
};
nlohmann::json to_json(const ExtractorArch &a);
ExtractorArch extractor_arch_from_json(const nlohmann::json &j);

class FeatureExtractor {
public:
  FeatureExtractor(ExtractorVariant variant, ExtractorArch arch, std::uint64_t seed);

  /// Length-D descriptor; inference is deterministic. Throws on a shape mismatch.
  Descriptor extract(const Image &image) const;
  /// Batched inference on an (N, 3, H, W) tensor, returning (N, D).
  nn::Tensor extract_batch(const nn::Tensor &images) const;

  int dim() const { return arch_.descriptor_dim; }
  const ExtractorArch &arch() const { return arch_; }
  ExtractorVariant variant() const { return variant_; }
  const std::string &provenance() const { return provenance_; }
  void set_provenance(ExtractorVariant v, std::string tag) {
    variant_ = v;
    provenance_ = std::move(tag);
  }

  nn::Sequential &trunk() { return trunk_; }
  nn::NamedParams params() { return nn::named_params(trunk_); }
  std::string hash() const;

  Checkpoint to_checkpoint() const;
  static FeatureExtractor from_checkpoint(const Checkpoint &ckpt);
  /// Build the trunk described by the manifest's architecture block and load
  /// its float32 weights.
  static FeatureExtractor from_weight_manifest(const std::string &manifest_path,
                                               ExtractorVariant variant);

private:
  ExtractorVariant variant_;
  ExtractorArch arch_;
  std::string provenance_;
  mutable nn::Sequential trunk_;
};

struct FinetuneConfig {
  int epochs = 30;
  double lr = 1e-3;
  int batch_size = 16;
  int patience = 5;
  double val_frac = 0.1; ///< fraction of each identity's images held out
  std::uint64_t seed = 0;
};
nlohmann::json to_json(const FinetuneConfig &c);
FinetuneConfig finetune_config_from_json(const nlohmann::json &j);

struct FinetuneHistory {
  std::vector<double> train_loss;
  std::vector<double> val_accuracy;
  int best_epoch = 0;
};

/// Per identity, hold out round(frac * n) images (at least one when n >= 2,
/// never all of them). Returns (fit, held-out) sample indices, sorted.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
holdout_split(const std::vector<Sample> &samples, double frac, Rng &rng);

/// F_R2 protocol: identity-classification head over the training identities,
/// cross-entropy, Adam, early stopping on held-out accuracy. Returns the
/// trunk at its best validation epoch, tagged reid_finetuned.
FeatureExtractor finetune_reid(const FeatureExtractor &base, const std::vector<Sample> &train,
                               const FinetuneConfig &cfg, FinetuneHistory *history = nullptr);

// ------------------------------------------------------------------ generator

struct GeneratorArch {
  int descriptor_dim = 2048;
  int height = 128;
  int width = 64;
  int residual_blocks = 6;
  int base_channels = 64;
  int upsample_stages = 3; ///< height and width must be divisible by 2^stages
};
nlohmann::json to_json(const GeneratorArch &a);
GeneratorArch generator_arch_from_json(const nlohmann::json &j);

/// Dense(D + 50) -> (base, H/2^s, W/2^s) -> residual blocks -> s
/// (upsample, conv, LeakyReLU) stages -> conv to RGB -> sigmoid.
class Generator {
public:
  Generator(GeneratorArch arch, std::uint64_t seed);

  /// desc: (N, D); pose: (N, 50). Returns (N, 3, H, W) in [0,1].
  nn::Tensor forward(const nn::Tensor &desc, const nn::Tensor &pose, const nn::Pass &pass);
  /// Accumulates parameter gradients; returns the gradient w.r.t. the
  /// concatenated (desc, pose) input.
  nn::Tensor backward(const nn::Tensor &grad_image);

  Image generate(const Descriptor &desc, const PoseVector &pose);

  const GeneratorArch &arch() const { return arch_; }
  nn::NamedParams params() { return nn::named_params(net_); }

private:
  GeneratorArch arch_;
  nn::Sequential net_;
};

struct DiscriminatorArch {
  int height = 128;
  int width = 64;
  int num_classes = 2;
  int base_channels = 16;
  int depth = 3; ///< stride-2 conv stages
};
nlohmann::json to_json(const DiscriminatorArch &a);
DiscriminatorArch discriminator_arch_from_json(const nlohmann::json &j);

struct DiscriminatorOutput {
  nn::Tensor prob;   ///< (N, 1) real/fake probability
  nn::Tensor logits; ///< (N, C) identity logits
};

class Discriminator {
public:
  Discriminator(DiscriminatorArch arch, std::uint64_t seed);
  DiscriminatorOutput forward(const nn::Tensor &images, const nn::Pass &pass);
  /// Either gradient may be empty (n == 0) to skip that head.
  nn::Tensor backward(const nn::Tensor &grad_prob, const nn::Tensor &grad_logits);

  const DiscriminatorArch &arch() const { return arch_; }
  nn::NamedParams params();

private:
  DiscriminatorArch arch_;
  nn::Sequential trunk_, adv_head_, cls_head_;
};

// ------------------------------------------------------------------ losses

constexpr double kProbClamp = 1e-7;

/// mean_b [log d_real + log(1 - d_fake)], probabilities clamped to
/// [1e-7, 1 - 1e-7].
double adversarial_loss(std::span<const double> d_real, std::span<const double> d_fake);
double adversarial_loss(double d_real, double d_fake);

/// Mean over the batch of the per-sample L2 norm of (target - generated).
double l2_loss(const nn::Tensor &target, const nn::Tensor &generated);
double l2_loss(const Image &target, const Image &generated);
nn::Tensor l2_loss_grad(const nn::Tensor &target, const nn::Tensor &generated);

/// Softmax cross-entropy summed over samples.
double classification_loss(const nn::Tensor &logits, const std::vector<int> &labels);
double classification_loss(const std::vector<double> &logits, int label);
nn::Tensor classification_loss_grad(const nn::Tensor &logits, const std::vector<int> &labels);

/// Generator fooling term: mean log(1 - d_fake), or -mean log d_fake when
/// non-saturating.
double generator_adversarial(std::span<const double> d_fake, bool non_saturating);
nn::Tensor generator_adversarial_grad(const nn::Tensor &d_fake, bool non_saturating);

/// Discriminator term (minimized): -mean[t log d_real + (1 - t) log(1 - d_real)]
/// - mean log(1 - d_fake), with per-sample real targets t.
double discriminator_adversarial(std::span<const double> d_real, std::span<const double> d_fake,
                                 std::span<const double> real_targets);
std::pair<nn::Tensor, nn::Tensor>
discriminator_adversarial_grad(const nn::Tensor &d_real, const nn::Tensor &d_fake,
                               std::span<const double> real_targets);

struct LossWeights {
  double adversarial = 1.0;
  double l2 = 1.0;
  double classification = 1.0;
};

struct LossParts {
  double adv_gen = 0;  ///< generator fooling term
  double adv_disc = 0; ///< discriminator real/fake term
  double l2 = 0;
  double cls_real = 0; ///< classification of real images (discriminator)
  double cls_fake = 0; ///< classification of generated images vs source identity
};

struct TotalLoss {
  double gen = 0;
  double disc = 0;
};

TotalLoss total_gan_loss(const LossParts &parts, const LossWeights &w);

// ------------------------------------------------------------------ training

struct TrainingPair {
  std::size_t source = 0; ///< index into the sample list
  std::size_t target = 0;
  PoseVector pose;        ///< target pose
  int label = 0;          ///< class index of the shared identity
};

/// Uniform same-identity pair sampling: an eligible identity is drawn
/// uniformly, then an ordered pair of its distinct posed images. Samples
/// without a pose are excluded.
class PairSampler {
public:
  PairSampler(const std::vector<Sample> &samples, const std::vector<int> &class_identities);
  TrainingPair next(Rng &rng) const;
  std::size_t excluded() const { return excluded_; }
  std::size_t eligible_identities() const { return groups_.size(); }
  std::size_t posed_samples() const { return posed_; }

private:
  const std::vector<Sample> *samples_;
  std::vector<std::pair<int, std::vector<std::size_t>>> groups_; // (label, sample idx)
  std::size_t excluded_ = 0;
  std::size_t posed_ = 0;
};

std::vector<TrainingPair> make_training_pairs(const std::vector<Sample> &samples,
                                              const std::vector<int> &class_identities,
                                              std::size_t count, std::uint64_t seed);

struct GanTrainConfig {
  double lr = 2e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  int batch_size = 32;
  int epochs = 30;
  std::pair<double, double> label_smooth_noise{0.9, 1.0};
  std::uint64_t seed = 0;
  int checkpoint_every = 0; ///< 0: final checkpoint only
  int pairs_per_epoch = 0;  ///< 0: one pair per posed training sample
  bool augment = true;
  bool non_saturating = false;
  LossWeights weights;
  int residual_blocks = 6;
  int generator_channels = 64;
  int discriminator_channels = 16;

  void validate() const;
};
nlohmann::json to_json(const GanTrainConfig &c);
GanTrainConfig gan_config_from_json(const nlohmann::json &j);

struct EpochStats {
  double gen = 0, disc = 0, l2 = 0, adv_gen = 0, adv_disc = 0, cls_real = 0, cls_fake = 0;
};

struct GanHistory {
  std::vector<EpochStats> epochs;
  std::size_t excluded_unposed = 0;
};
nlohmann::json to_json(const GanHistory &h);

struct GanModels {
  Generator generator;
  Discriminator discriminator;
  GanHistory history;
};

/// Alternating discriminator/generator Adam steps. F_R1 conditions the
/// generator and is never modified. If `checkpoint_dir` is set, writes
/// gan_epochNNN.ckpt every checkpoint_every epochs and gan.ckpt at the end.
GanModels train_ptgan(const std::vector<Sample> &train, const std::vector<int> &class_identities,
                      const FeatureExtractor &fr1, const GanTrainConfig &cfg,
                      const AugmentConfig &aug, const std::string &checkpoint_dir = "");

Checkpoint gan_checkpoint(Generator &g, Discriminator &d, const GanTrainConfig &cfg, int epoch,
                          const Rng &rng);
std::pair<Generator, Discriminator> gan_from_checkpoint(const Checkpoint &ckpt);

} // namespace reid

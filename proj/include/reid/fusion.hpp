#pragma once

#include "reid/cluster.hpp"
#include "reid/ptgan.hpp"

#include <optional>

namespace reid {

/// Weight/bias element counts of one dense layer.
struct DenseShape {
  int in = 0;
  int out = 0;
  std::size_t params() const {
    return static_cast<std::size_t>(in) * out + static_cast<std::size_t>(out);
  }
};

/// Layer geometry of a FusionNet with N generated views and descriptor size D.
struct FusionShapes {
  DenseShape fc1;    ///< (N+1)D -> 4D
  DenseShape fc2;    ///< 4D -> D
  DenseShape output; ///< D -> D
};
FusionShapes fusion_shapes(int num_generated, int descriptor_dim);

/// concat([source, generated_1..N]) -> fc_1 -> BN -> LeakyReLU -> dropout
/// -> fc_2 -> BN -> (+ source) -> output (linear) [-> C-way head, training only]
class FusionNet {
public:
  FusionNet(int num_generated, int descriptor_dim, int num_classes, double dropout,
            std::uint64_t seed);

  int num_generated() const { return n_; }
  int descriptor_dim() const { return d_; }
  int num_classes() const { return c_; }
  double dropout() const { return dropout_; }

  /// Fused descriptor in inference mode. Throws on count or dimension mismatch.
  Descriptor fuse(const Descriptor &source, const std::vector<Descriptor> &generated) const;
  /// fc_2 branch activation before the skip addition (inference mode).
  Descriptor pre_skip(const Descriptor &source, const std::vector<Descriptor> &generated) const;

  /// input: (B, (N+1)D) -> (B, D), the second-to-last activation.
  nn::Tensor forward(const nn::Tensor &input, const nn::Pass &pass);
  nn::Tensor forward_logits(const nn::Tensor &input, const nn::Pass &pass);
  nn::Tensor backward(const nn::Tensor &grad_output);
  nn::Tensor backward_logits(const nn::Tensor &grad_logits);

  /// Set both batch-norm layers' running statistics to their population
  /// statistics over `input`, evaluated in inference mode.
  void recalibrate(const nn::Tensor &input);

  /// Zero the fc_2 branch (its batch-norm affine terms) and set the output
  /// layer to the identity, leaving the skip path alone.
  void reset_to_skip();

  nn::Dense &fc1() { return fc1_; }
  nn::Dense &fc2() { return fc2_; }
  nn::Dense &output() { return output_; }
  nn::Dense &head() { return head_; }
  nn::BatchNorm &bn2() { return bn2_; }

  /// Parameters of the inference path (fc_1 .. output).
  nn::NamedParams params();
  /// Inference path plus the classification head.
  nn::NamedParams training_params();
  std::string hash();

  Checkpoint to_checkpoint();
  static FusionNet from_checkpoint(const Checkpoint &ckpt);

private:
  nn::Tensor input_row(const Descriptor &source, const std::vector<Descriptor> &generated) const;
  nn::Tensor branch(const nn::Tensor &input, const nn::Pass &pass) const;
  nn::Tensor forward_impl(const nn::Tensor &input, const nn::Pass &pass) const;

  int n_, d_, c_;
  double dropout_;
  mutable nn::Dense fc1_;
  mutable nn::BatchNorm bn1_;
  mutable nn::LeakyReLU act1_;
  mutable nn::Dropout drop1_;
  mutable nn::Dense fc2_;
  mutable nn::BatchNorm bn2_;
  mutable nn::Dense output_;
  mutable nn::Dense head_;
};

/// The complete feature map: F_R1 conditions the generator, which renders the
/// image in each canonical pose; F_R2 describes every rendering; FusionNet
/// merges them with the source descriptor.
struct Pipeline {
  std::optional<FeatureExtractor> fr1;
  std::optional<FeatureExtractor> fr2;
  std::optional<Generator> generator;
  std::optional<PoseSet> poses;
  std::optional<FusionNet> fusion;

  /// [F_R1(I), F_R2(G(F_R1(I), p_1)), ..., F_R2(G(F_R1(I), p_N))], concatenated.
  std::vector<double> fusion_input(const Image &image);
  std::vector<Image> render(const Image &image);
  Descriptor extract_fused(const Image &image);
  /// F_R2 on the original image only.
  Descriptor extract_baseline(const Image &image);
  /// Element-wise maximum over the source and generated descriptors.
  Descriptor extract_max_fused(const Image &image);

  /// Throws MissingPrerequisite naming the first absent component.
  void require(bool need_fusion) const;
};

struct FusionTrainConfig {
  double lr = 1e-3;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  double weight_decay = 5e-4;
  double dropout = 0.6;
  int epochs = 60;
  int batch_size = 16;
  int patience = 8;
  double val_frac = 0.1; ///< fraction of each identity's images held out
  bool augment = false;
  std::uint64_t seed = 0;

  void validate() const;
};
nlohmann::json to_json(const FusionTrainConfig &c);
FusionTrainConfig fusion_config_from_json(const nlohmann::json &j);

struct FusionHistory {
  std::vector<double> train_loss;
  std::vector<double> train_accuracy;
  std::vector<double> val_accuracy;
  int best_epoch = 0;
  bool stopped_early = false;
};
nlohmann::json to_json(const FusionHistory &h);

struct FusionTraining {
  FusionNet net;
  FusionHistory history;
};

/// Train a FusionNet on frozen F_R1/generator/PoseSet/F_R2 with categorical
/// cross-entropy, dropout, batch norm, L2 weight regularization and early
/// stopping on held-out accuracy. Returns the best-validation weights.
FusionTraining train_fusion(const std::vector<Sample> &train,
                            const std::vector<int> &class_identities, Pipeline &pipeline,
                            const FusionTrainConfig &cfg, const AugmentConfig &aug);

} // namespace reid

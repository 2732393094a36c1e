#pragma once

#include "reid/augment.hpp"
#include "reid/cluster.hpp"
#include "reid/dataset.hpp"
#include "reid/fusion.hpp"
#include "reid/ptgan.hpp"
#include "reid/retrieval.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace reid {

/// Environment variable naming the default output root.
inline constexpr const char *kOutputRootEnv = "REID_OUTPUT_ROOT";

struct DatasetConfig {
  std::string root;                ///< empty: <output_dir>/dataset, written by `synth`
  Naming naming = Naming::flat;
  Protocol protocol = Protocol::toy;
  int height = 128;                ///< every image is resized to height x width
  int width = 64;
  ToySpec toy;
};

struct BackboneConfig {
  ExtractorArch arch;
  FinetuneConfig finetune;
  std::string fr1_weights; ///< optional weight manifest replacing the random trunk
  std::string fr2_weights; ///< optional weight manifest replacing fine-tuning
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "runs";
  DatasetConfig dataset;
  AugmentConfig augment;
  ClusterConfig cluster;
  BackboneConfig backbone;
  GanTrainConfig gan;
  FusionTrainConfig fusion;
  EvalOptions eval;

  /// Cross-section checks (image size, descriptor size, value ranges).
  void validate() const;

  /// Copy with every per-stage seed derived from the global seed.
  ExperimentConfig seeded() const;

  GeneratorArch generator_arch() const;
  DiscriminatorArch discriminator_arch(int num_classes) const;
};

nlohmann::json to_json(const ExperimentConfig &c);
/// Strict: every key must be known; missing keys keep their defaults.
ExperimentConfig experiment_config_from_json(const nlohmann::json &j);

/// Dotted paths present in `given` but absent from `reference`.
std::vector<std::string> unknown_keys(const nlohmann::json &given,
                                      const nlohmann::json &reference);

/// Parse "a.b.c=value". The value is read as JSON when it parses, otherwise
/// as a string.
void apply_override(nlohmann::json &doc, const std::string &assignment);

/// defaults < $REID_OUTPUT_ROOT < config file < overrides, then validated.
ExperimentConfig load_config(const std::string &file, const std::vector<std::string> &overrides);

} // namespace reid

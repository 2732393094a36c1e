#pragma once

#include "reid/config.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <string>

namespace reid {

/// Record of one command invocation. File maps are keyed by paths relative to
/// the output directory (inputs outside it keep their given path) and hold
/// git-style blob hashes.
struct RunManifest {
  std::string command;
  nlohmann::json arguments = nlohmann::json::object();
  nlohmann::json config; ///< as given, before per-stage seed derivation
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> components; ///< model name -> parameter hash
  std::map<std::string, std::string> outputs;
  std::string started;
  std::string finished;
};
nlohmann::json to_json(const RunManifest &m);
RunManifest run_manifest_from_json(const nlohmann::json &j);

/// Where each artifact lives under a config's output directory.
struct ArtifactPaths {
  explicit ArtifactPaths(const ExperimentConfig &cfg);

  std::string root;
  std::string dataset;
  std::string poses;
  std::string fr1, fr2, finetune_history;
  std::string gan, gan_history;
  std::string fusion, fusion_history;
  std::string gallery_desc, query_desc;
  std::string report_json, report_txt, cmc_plot, distance_plot;
  std::string generated;
  std::string ablation_csv, cells;
  std::string manifest(const std::string &command) const;
};

RunManifest cmd_synth(const ExperimentConfig &cfg);
RunManifest cmd_cluster(const ExperimentConfig &cfg);
/// Builds F_R1, fine-tunes F_R2 from it, then trains the pose-transfer GAN.
RunManifest cmd_train_gan(const ExperimentConfig &cfg);
/// Source image followed by its rendering in every canonical pose, one row.
/// Empty arguments select the first query image, the config's pose set, and
/// <output_dir>/generated.png.
RunManifest cmd_generate(const ExperimentConfig &cfg, const std::string &image = "",
                         const std::string &pose_set = "", const std::string &output = "");
RunManifest cmd_train_fusion(const ExperimentConfig &cfg);
RunManifest cmd_index(const ExperimentConfig &cfg);
RunManifest cmd_eval(const ExperimentConfig &cfg);
/// {fullbody, bodyjoint} x {kmeans, gmm} x K in {8, 12, 16, 24}, reusing the
/// trained backbones and GAN. Each cell clusters, trains a FusionNet and
/// evaluates; results go to ablation.csv (method,mode,K,rank1,mAP).
RunManifest cmd_ablate(const ExperimentConfig &cfg);

/// Re-run the command recorded in a manifest with its config snapshot,
/// optionally into another output directory.
RunManifest replay(const std::string &manifest_path, const std::string &output_dir = "");

/// Rows of the ablation table.
struct AblationRow {
  ClusterMethod method;
  ClusterMode mode;
  int K;
  double rank1;
  double map;
  bool ok;
};
inline constexpr int kAblationK[] = {8, 12, 16, 24};
std::vector<AblationRow> read_ablation_csv(const std::string &path);

} // namespace reid

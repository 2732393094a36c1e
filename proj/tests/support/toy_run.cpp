#include "toy_run.hpp"

#include <filesystem>

namespace fs = std::filesystem;

namespace toy {

std::string fixture_dir() { return REID_FIXTURE_DIR; }

std::string fixture_dataset() { return (fs::path(REID_FIXTURE_DIR) / "dataset").string(); }

std::string fresh_dir(const std::string &name) {
  const fs::path dir = fs::path(REID_SCRATCH_DIR) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

reid::ExperimentConfig fixture_config(const std::string &output_dir,
                                      const std::vector<std::string> &overrides) {
  std::vector<std::string> all{"dataset.root=" + nlohmann::json(fixture_dataset()).dump(),
                               "output_dir=" + nlohmann::json(output_dir).dump()};
  all.insert(all.end(), overrides.begin(), overrides.end());
  return reid::load_config((fs::path(REID_FIXTURE_DIR) / "config.json").string(), all);
}

std::vector<reid::RunManifest> run_pipeline(const reid::ExperimentConfig &cfg) {
  return {reid::cmd_cluster(cfg),      reid::cmd_train_gan(cfg), reid::cmd_generate(cfg),
          reid::cmd_train_fusion(cfg), reid::cmd_index(cfg),     reid::cmd_eval(cfg)};
}

} // namespace toy

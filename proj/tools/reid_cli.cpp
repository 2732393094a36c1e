#include "reid/commands.hpp"

#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <optional>

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kMissing = 3, kDiverged = 4 };

struct Flag {
  std::string key; // dotted config key
  std::string text;
};

/// Options shared by every subcommand, plus the flag-to-key table.
struct Common {
  std::string config_file;
  std::vector<std::string> sets;
  std::vector<Flag> flags;
  std::optional<std::string> output_dir;
  std::optional<std::uint64_t> seed;

  std::vector<std::string> overrides() const {
    std::vector<std::string> out;
    if (output_dir)
      out.push_back("output_dir=" + nlohmann::json(*output_dir).dump());
    if (seed)
      out.push_back("seed=" + std::to_string(*seed));
    for (const auto &f : flags)
      if (!f.text.empty())
        out.push_back(f.key + "=" + f.text);
    out.insert(out.end(), sets.begin(), sets.end());
    return out;
  }
};

CLI::App *subcommand(CLI::App &app, const std::string &name, const std::string &help,
                     Common &common) {
  CLI::App *sub = app.add_subcommand(name, help);
  sub->add_option("-c,--config", common.config_file, "JSON config file");
  sub->add_option("--set", common.sets, "override a config key: key.path=value");
  sub->add_option("-o,--output-dir", common.output_dir,
                  "output directory (default $REID_OUTPUT_ROOT or ./runs)");
  sub->add_option("--seed", common.seed, "global seed");
  return sub;
}

/// Flag whose raw text becomes `key=text` (JSON if it parses, else a string).
void keyed(CLI::App *sub, Common &common, const std::string &flag, const std::string &key,
           const std::string &help) {
  common.flags.push_back({key, ""});
  const std::size_t slot = common.flags.size() - 1;
  sub->add_option_function<std::string>(
      flag, [&common, slot](const std::string &v) { common.flags[slot].text = v; }, help);
}

void string_keyed(CLI::App *sub, Common &common, const std::string &flag, const std::string &key,
                  const std::string &help) {
  common.flags.push_back({key, ""});
  const std::size_t slot = common.flags.size() - 1;
  sub->add_option_function<std::string>(
      flag,
      [&common, slot](const std::string &v) {
        common.flags[slot].text = nlohmann::json(v).dump();
      },
      help);
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Pose-invariant person re-identification pipeline"};
  app.require_subcommand(1);
  Common common;

  auto *synth = subcommand(app, "synth", "write the synthetic toy dataset", common);
  auto *cluster = subcommand(app, "cluster", "derive the canonical pose set", common);
  string_keyed(cluster, common, "--method", "cluster.method", "kmeans or gmm");
  string_keyed(cluster, common, "--mode", "cluster.mode", "fullbody or bodyjoint");
  keyed(cluster, common, "--num-poses", "cluster.K", "number of canonical poses");
  auto *train_gan =
      subcommand(app, "train-gan", "build F_R1, fine-tune F_R2, train the pose-transfer GAN",
                 common);
  keyed(train_gan, common, "--epochs", "gan.epochs", "GAN epochs");
  keyed(train_gan, common, "--lr", "gan.lr", "GAN learning rate");
  keyed(train_gan, common, "--batch-size", "gan.batch_size", "GAN batch size");
  std::string gen_image, gen_poses, gen_output;
  auto *generate = subcommand(app, "generate", "render one image in every canonical pose", common);
  generate->add_option("--image", gen_image, "source image (default: first query image)");
  generate->add_option("--pose-set", gen_poses, "pose set JSON (default: <output>/poses.json)");
  generate->add_option("--out", gen_output, "grid image (default: <output>/generated.png)");
  auto *train_fusion = subcommand(app, "train-fusion", "train FusionNet", common);
  keyed(train_fusion, common, "--epochs", "fusion.epochs", "fusion epochs");
  keyed(train_fusion, common, "--dropout", "fusion.dropout", "dropout rate");
  keyed(train_fusion, common, "--patience", "fusion.patience", "early-stopping patience");
  auto *index = subcommand(app, "index", "write gallery and query descriptor matrices", common);
  auto *eval = subcommand(app, "eval", "evaluate retrieval and write report and plots", common);
  for (auto *sub : {index, eval}) {
    string_keyed(sub, common, "--metric", "eval.metric", "euclidean or cosine");
    string_keyed(sub, common, "--source", "eval.source", "fused, baseline or max_fused");
  }
  keyed(eval, common, "--rerank", "eval.rerank", "true to apply k-reciprocal re-ranking");
  keyed(eval, common, "--k1", "eval.k1", "re-ranking k1");
  keyed(eval, common, "--k2", "eval.k2", "re-ranking k2");
  keyed(eval, common, "--lambda", "eval.lambda", "re-ranking lambda");
  keyed(eval, common, "--multi-query", "eval.multi_query", "true to pool queries");
  auto *ablate = subcommand(app, "ablate", "run the 16-cell clustering ablation grid", common);
  std::string replay_path, replay_out;
  auto *replay = app.add_subcommand("replay", "re-run the command recorded in a run manifest");
  replay->add_option("manifest", replay_path, "run manifest JSON")->required();
  replay->add_option("-o,--output-dir", replay_out, "output directory override");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (replay->parsed()) {
      const auto m = reid::replay(replay_path, replay_out);
      std::cout << m.command << ": replayed, " << m.outputs.size() << " output(s)\n";
      for (const auto &[path, hash] : m.outputs)
        std::cout << "  " << path << "  " << hash.substr(0, 12) << "\n";
      return kOk;
    }

    const reid::ExperimentConfig cfg = reid::load_config(common.config_file, common.overrides());
    const reid::ArtifactPaths paths(cfg);
    const std::vector<std::pair<CLI::App *, std::function<reid::RunManifest()>>> table{
        {synth, [&] { return reid::cmd_synth(cfg); }},
        {cluster, [&] { return reid::cmd_cluster(cfg); }},
        {train_gan, [&] { return reid::cmd_train_gan(cfg); }},
        {generate, [&] { return reid::cmd_generate(cfg, gen_image, gen_poses, gen_output); }},
        {train_fusion, [&] { return reid::cmd_train_fusion(cfg); }},
        {index, [&] { return reid::cmd_index(cfg); }},
        {eval, [&] { return reid::cmd_eval(cfg); }},
        {ablate, [&] { return reid::cmd_ablate(cfg); }},
    };
    for (const auto &[sub, run] : table) {
      if (!sub->parsed())
        continue;
      const reid::RunManifest m = run();
      std::cout << m.command << ": done (" << paths.manifest(m.command) << ")\n";
      for (const auto &[path, hash] : m.outputs)
        std::cout << "  " << path << "  " << hash.substr(0, 12) << "\n";
      if (sub == eval)
        std::cout << "\n" << reid::read_file(paths.report_txt);
      return kOk;
    }
    return kFailure;
  } catch (const reid::ConfigError &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const reid::MissingPrerequisite &e) {
    std::cerr << "missing prerequisite: " << e.what() << "\n";
    return kMissing;
  } catch (const reid::DivergenceError &e) {
    std::cerr << "numerical divergence: " << e.what() << "\n";
    return kDiverged;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
}

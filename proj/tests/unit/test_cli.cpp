#include "toy_run.hpp"

#include "reid/commands.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <sys/wait.h>

using namespace reid;
namespace fs = std::filesystem;

namespace {

/// Run the CLI with `args` and return its exit status.
int run_cli(const std::string &args, const std::string &log) {
  const std::string cmd = std::string("\"") + REID_CLI_PATH + "\" " + args + " > \"" + log +
                          "\" 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string quoted(const std::string &s) { return "\"" + s + "\""; }

/// A fixture config cut down so the whole chain runs in seconds.
ExperimentConfig quick_config(const std::string &dir) {
  return toy::fixture_config(dir, {"gan.epochs=1", "gan.residual_blocks=1",
                                   "gan.generator_channels=16", "backbone.finetune.epochs=1",
                                   "fusion.epochs=2", "cluster.K=2"});
}

class ScopedEnv {
public:
  ScopedEnv(const char *name, const std::string &value) : name_(name) {
    if (const char *old = std::getenv(name))
      old_ = old;
    setenv(name, value.c_str(), 1);
  }
  ~ScopedEnv() {
    if (old_)
      setenv(name_, old_->c_str(), 1);
    else
      unsetenv(name_);
  }

private:
  const char *name_;
  std::optional<std::string> old_;
};

} // namespace

TEST_SUITE("cli") {

TEST_CASE("config layering: defaults, environment, file, overrides") {
  const std::string dir = toy::fresh_dir("layering");
  {
    ScopedEnv env(kOutputRootEnv, "/tmp/from-env");
    CHECK(load_config("", {}).output_dir == "/tmp/from-env");
    write_file(dir + "/c.json", R"({"output_dir": "from-file", "seed": 4})");
    const auto f = load_config(dir + "/c.json", {});
    CHECK(f.output_dir == "from-file");
    CHECK(f.seed == 4);
    const auto o = load_config(dir + "/c.json", {"output_dir=from-flag", "seed=9"});
    CHECK(o.output_dir == "from-flag");
    CHECK(o.seed == 9);
  }
  unsetenv(kOutputRootEnv);
  CHECK(load_config("", {}).output_dir == "runs");
}

TEST_CASE("unknown keys and malformed values are configuration errors") {
  CHECK_THROWS_AS(load_config("", {"gan.bogus=1"}), ConfigError);
  CHECK_THROWS_AS(load_config("", {"nonsense=1"}), ConfigError);
  CHECK_THROWS_AS(load_config("", {"cluster.method=spectral"}), ConfigError);
  CHECK_THROWS_AS(load_config("", {"no-equals-sign"}), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/c.json", {}), ConfigError);
  const std::string dir = toy::fresh_dir("badjson");
  write_file(dir + "/c.json", "{not json");
  CHECK_THROWS_AS(load_config(dir + "/c.json", {}), ConfigError);
  const nlohmann::json ref = {{"a", {{"b", 1}}}, {"c", 2}};
  CHECK(unknown_keys({{"a", {{"b", 3}, {"x", 1}}}, {"y", 0}}, ref) ==
        std::vector<std::string>{"a.x", "y"});
}

TEST_CASE("overrides parse JSON and fall back to strings") {
  nlohmann::json doc = nlohmann::json::object();
  apply_override(doc, "a.b=3");
  apply_override(doc, "a.c=[1,2]");
  apply_override(doc, "name=plain text");
  apply_override(doc, "flag=true");
  CHECK(doc["a"]["b"] == 3);
  CHECK(doc["a"]["c"] == nlohmann::json::array({1, 2}));
  CHECK(doc["name"] == "plain text");
  CHECK(doc["flag"] == true);
}

TEST_CASE("defaults carry the reference hyperparameters") {
  const ExperimentConfig c = load_config("", {});
  CHECK(c.gan.adam_beta1 == 0.5);
  CHECK(c.gan.adam_beta2 == 0.999);
  CHECK(c.fusion.adam_beta1 == 0.5);
  CHECK(c.fusion.dropout == 0.6);
  CHECK(c.dataset.height == 128);
  CHECK(c.dataset.width == 64);
  CHECK(c.augment.rotation_deg == 20.0);
  CHECK(c.cluster.n_cbj == 3);
  CHECK(c.cluster.K == 12);
  CHECK(c.cluster.method == ClusterMethod::gmm);
  CHECK(c.eval.k1 == 20);
  CHECK(c.eval.k2 == 6);
  CHECK(c.eval.lambda == 0.3);
  CHECK(experiment_config_from_json(to_json(c)).seed == c.seed);
}

TEST_CASE("per-stage seeds derive from the global seed") {
  const auto a = load_config("", {"seed=1"}).seeded();
  const auto b = load_config("", {"seed=2"}).seeded();
  CHECK(a.gan.seed != b.gan.seed);
  CHECK(a.fusion.seed != b.fusion.seed);
  CHECK(a.cluster.seed != a.gan.seed);
  CHECK(load_config("", {"seed=1"}).seeded().gan.seed == a.gan.seed);
}

TEST_CASE("synth reproduces the committed fixture") {
  const std::string dir = toy::fresh_dir("synth");
  ExperimentConfig cfg = toy::fixture_config(dir);
  cfg.dataset.root.clear();
  const RunManifest m = cmd_synth(cfg);
  CHECK(fs::exists(ArtifactPaths(cfg).manifest("synth")));
  REQUIRE(m.outputs.count("dataset") == 1);
  std::size_t files = 0;
  for (const auto &e : fs::directory_iterator(toy::fixture_dataset())) {
    const fs::path mine = fs::path(dir) / "dataset" / e.path().filename();
    REQUIRE(fs::exists(mine));
    CHECK_MESSAGE(read_file(mine.string()) == read_file(e.path().string()), e.path().filename());
    ++files;
  }
  CHECK(files == 161);
}

TEST_CASE("exit codes for parse, configuration and prerequisite failures") {
  const std::string dir = toy::fresh_dir("exitcodes");
  const std::string log = dir + "/log.txt";
  CHECK(run_cli("no-such-command", log) == 2);
  CHECK(run_cli("eval --k1", log) == 2);
  CHECK(run_cli("eval -o " + quoted(dir) + " --set gan.bogus=1", log) == 2);
  CHECK(run_cli("eval -o " + quoted(dir) + " --metric manhattan", log) == 2);
  CHECK(run_cli("cluster -o " + quoted(dir + "/empty"), log) == 3);
  CHECK(read_file(log).find("run synth first") != std::string::npos);
  CHECK(run_cli("replay " + quoted(dir + "/missing.json"), log) == 3);

  CHECK(run_cli("synth -o " + quoted(dir + "/run") + " --set dataset.toy.num_identities=4", log) ==
        0);
  CHECK(run_cli("train-fusion -o " + quoted(dir + "/run"), log) == 3);
  CHECK(read_file(log).find("run train-gan first") != std::string::npos);
}

TEST_CASE("the CLI runs the chain end to end and eval is reproducible") {
  const std::string dir = toy::fresh_dir("chain");
  const ExperimentConfig cfg = quick_config(dir + "/api");
  const ArtifactPaths paths(cfg);

  cmd_cluster(cfg);
  cmd_train_gan(cfg);
  CHECK_THROWS_WITH_AS(cmd_eval(cfg), doctest::Contains("run train-fusion first"),
                       MissingPrerequisite);
  cmd_train_fusion(cfg);
  cmd_index(cfg);
  cmd_eval(cfg);
  const std::string first = read_file(paths.report_json);
  cmd_eval(cfg);
  CHECK(read_file(paths.report_json) == first);
  for (const char *cmd : {"cluster", "train-gan", "train-fusion", "index", "eval"}) {
    const auto m = run_manifest_from_json(nlohmann::json::parse(read_file(paths.manifest(cmd))));
    CHECK(m.command == cmd);
    CHECK_FALSE(m.outputs.empty());
    CHECK(experiment_config_from_json(m.config).seed == cfg.seed);
  }
  const auto report = nlohmann::json::parse(first);
  CHECK(report["reports"].contains("fused"));
  CHECK(report["reports"].contains("baseline"));
  CHECK(fs::exists(paths.cmc_plot));
  CHECK(fs::exists(paths.distance_plot));

  // Same stages through the binary, with the config written to a file.
  const std::string cli_dir = dir + "/cli";
  const std::string cfg_file = dir + "/quick.json";
  ExperimentConfig file_cfg = cfg;
  file_cfg.output_dir = cli_dir;
  write_file(cfg_file, to_json(file_cfg).dump(2));
  const std::string log = dir + "/log.txt";
  for (const char *cmd : {"cluster", "train-gan", "train-fusion", "index", "eval"}) {
    INFO(cmd);
    CHECK(run_cli(std::string(cmd) + " -c " + quoted(cfg_file), log) == 0);
  }
  CHECK(read_file(ArtifactPaths(file_cfg).report_json) == first);
  CHECK(run_cli("generate -c " + quoted(cfg_file), log) == 0);
  CHECK(fs::exists(cli_dir + "/generated.png"));
}

}

#include "reid/config.hpp"

#include <cstdlib>
#include <filesystem>

namespace reid {

namespace {

const char *naming_string(Naming n) { return n == Naming::market1501 ? "market1501" : "flat"; }

nlohmann::json toy_json(const ToySpec &t) {
  return {{"num_identities", t.num_identities},
          {"images_per_identity", t.images_per_identity},
          {"height", t.height},
          {"width", t.width},
          {"appearance_seed", t.appearance_seed},
          {"pose_range",
           {{"arm_deg", t.pose_range.arm_deg},
            {"elbow_deg", t.pose_range.elbow_deg},
            {"leg_deg", t.pose_range.leg_deg},
            {"knee_deg", t.pose_range.knee_deg},
            {"lean_deg", t.pose_range.lean_deg}}}};
}

ToySpec toy_from_json(const nlohmann::json &j) {
  ToySpec t;
  t.num_identities = j.at("num_identities").get<int>();
  t.images_per_identity = j.at("images_per_identity").get<int>();
  t.height = j.at("height").get<int>();
  t.width = j.at("width").get<int>();
  t.appearance_seed = j.at("appearance_seed").get<std::uint64_t>();
  const auto &r = j.at("pose_range");
  t.pose_range.arm_deg = r.at("arm_deg").get<double>();
  t.pose_range.elbow_deg = r.at("elbow_deg").get<double>();
  t.pose_range.leg_deg = r.at("leg_deg").get<double>();
  t.pose_range.knee_deg = r.at("knee_deg").get<double>();
  t.pose_range.lean_deg = r.at("lean_deg").get<double>();
  t.validate();
  return t;
}

// splitmix64 finalizer, used to give every stage its own stream.
std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stage_seed(std::uint64_t global, std::uint64_t stage, std::uint64_t local) {
  return mix(mix(global) ^ mix(stage * 0x100000001b3ULL + 1) ^ mix(local + 7));
}

void collect_unknown(const nlohmann::json &given, const nlohmann::json &reference,
                     const std::string &prefix, std::vector<std::string> &out) {
  if (!given.is_object())
    return;
  for (auto it = given.begin(); it != given.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!reference.is_object() || !reference.contains(it.key())) {
      out.push_back(path);
      continue;
    }
    const auto &ref = reference.at(it.key());
    if (ref.is_object())
      collect_unknown(it.value(), ref, path, out);
  }
}

} // namespace

void ExperimentConfig::validate() const {
  if (output_dir.empty())
    throw ConfigError("output_dir must not be empty");
  if (dataset.height % 8 != 0 || dataset.width % 8 != 0 || dataset.height <= 0 ||
      dataset.width <= 0)
    throw ConfigError("dataset.height and dataset.width must be positive multiples of 8");
  if (backbone.arch.descriptor_dim < 1)
    throw ConfigError("backbone.arch.descriptor_dim must be positive");
  augment.validate();
  cluster.validate();
  gan.validate();
  fusion.validate();
  dataset.toy.validate();
  if (eval.max_rank < 10)
    throw ConfigError("eval.max_rank must be at least 10");
}

ExperimentConfig ExperimentConfig::seeded() const {
  ExperimentConfig c = *this;
  c.augment.seed = stage_seed(seed, 1, augment.seed);
  c.cluster.seed = stage_seed(seed, 2, cluster.seed);
  c.backbone.finetune.seed = stage_seed(seed, 3, backbone.finetune.seed);
  c.gan.seed = stage_seed(seed, 4, gan.seed);
  c.fusion.seed = stage_seed(seed, 5, fusion.seed);
  return c;
}

GeneratorArch ExperimentConfig::generator_arch() const {
  GeneratorArch a;
  a.descriptor_dim = backbone.arch.descriptor_dim;
  a.height = dataset.height;
  a.width = dataset.width;
  a.residual_blocks = gan.residual_blocks;
  a.base_channels = gan.generator_channels;
  return a;
}

DiscriminatorArch ExperimentConfig::discriminator_arch(int num_classes) const {
  DiscriminatorArch a;
  a.height = dataset.height;
  a.width = dataset.width;
  a.num_classes = num_classes;
  a.base_channels = gan.discriminator_channels;
  return a;
}

nlohmann::json to_json(const ExperimentConfig &c) {
  nlohmann::json arch = to_json(c.backbone.arch);
  arch.erase("height");
  arch.erase("width");
  return {{"seed", c.seed},
          {"output_dir", c.output_dir},
          {"dataset",
           {{"root", c.dataset.root},
            {"naming", naming_string(c.dataset.naming)},
            {"protocol", to_string(c.dataset.protocol)},
            {"height", c.dataset.height},
            {"width", c.dataset.width},
            {"toy", toy_json(c.dataset.toy)}}},
          {"augment", to_json(c.augment)},
          {"cluster", to_json(c.cluster)},
          {"backbone",
           {{"arch", arch},
            {"finetune", to_json(c.backbone.finetune)},
            {"fr1_weights", c.backbone.fr1_weights},
            {"fr2_weights", c.backbone.fr2_weights}}},
          {"gan", to_json(c.gan)},
          {"fusion", to_json(c.fusion)},
          {"eval", to_json(c.eval)}};
}

ExperimentConfig experiment_config_from_json(const nlohmann::json &j) {
  const nlohmann::json defaults = to_json(ExperimentConfig{});
  if (const auto bad = unknown_keys(j, defaults); !bad.empty()) {
    std::string list;
    for (const auto &k : bad)
      list += (list.empty() ? "" : ", ") + k;
    throw ConfigError("unknown configuration key(s): " + list);
  }
  nlohmann::json full = defaults;
  full.merge_patch(j);

  ExperimentConfig c;
  try {
    c.seed = full.at("seed").get<std::uint64_t>();
    c.output_dir = full.at("output_dir").get<std::string>();
    const auto &d = full.at("dataset");
    c.dataset.root = d.at("root").get<std::string>();
    c.dataset.naming = naming_from_string(d.at("naming").get<std::string>());
    c.dataset.protocol = protocol_from_string(d.at("protocol").get<std::string>());
    c.dataset.height = d.at("height").get<int>();
    c.dataset.width = d.at("width").get<int>();
    c.dataset.toy = toy_from_json(d.at("toy"));
    c.augment = augment_config_from_json(full.at("augment"));
    c.cluster = cluster_config_from_json(full.at("cluster"));
    nlohmann::json arch = full.at("backbone").at("arch");
    arch["height"] = c.dataset.height;
    arch["width"] = c.dataset.width;
    c.backbone.arch = extractor_arch_from_json(arch);
    c.backbone.finetune = finetune_config_from_json(full.at("backbone").at("finetune"));
    c.backbone.fr1_weights = full.at("backbone").at("fr1_weights").get<std::string>();
    c.backbone.fr2_weights = full.at("backbone").at("fr2_weights").get<std::string>();
    c.gan = gan_config_from_json(full.at("gan"));
    c.fusion = fusion_config_from_json(full.at("fusion"));
    c.eval = eval_options_from_json(full.at("eval"));
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("configuration: ") + e.what());
  }
  c.eval.protocol = mask_protocol_for(c.dataset.protocol);
  c.validate();
  return c;
}

std::vector<std::string> unknown_keys(const nlohmann::json &given,
                                      const nlohmann::json &reference) {
  std::vector<std::string> out;
  collect_unknown(given, reference, "", out);
  return out;
}

void apply_override(nlohmann::json &doc, const std::string &assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded())
    value = text;

  nlohmann::json *node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty())
      throw ConfigError("override key '" + key + "' has an empty component");
    if (!node->is_object())
      *node = nlohmann::json::object();
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

ExperimentConfig load_config(const std::string &file, const std::vector<std::string> &overrides) {
  nlohmann::json doc = nlohmann::json::object();
  if (const char *root = std::getenv(kOutputRootEnv); root && *root)
    doc["output_dir"] = root;
  if (!file.empty()) {
    if (!std::filesystem::exists(file))
      throw ConfigError("config file not found: " + file);
    nlohmann::json from_file;
    try {
      from_file = nlohmann::json::parse(read_file(file));
    } catch (const nlohmann::json::exception &e) {
      throw ConfigError("config file " + file + ": " + e.what());
    }
    if (!from_file.is_object())
      throw ConfigError("config file " + file + " must hold a JSON object");
    doc.merge_patch(from_file);
  }
  for (const auto &o : overrides)
    apply_override(doc, o);
  return experiment_config_from_json(doc);
}

} // namespace reid

#include "miniatures.hpp"
#include "toy_run.hpp"

#include "reid/ptgan.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <set>

namespace fs = std::filesystem;
using namespace reid;

namespace {

ExtractorArch toy_arch(int h = 128, int w = 64) {
  ExtractorArch a;
  a.height = h;
  a.width = w;
  a.descriptor_dim = 64;
  a.channels = {8, 16};
  return a;
}

std::vector<Sample> toy_samples(int ids, int imgs) {
  ToySpec spec;
  spec.num_identities = ids;
  spec.images_per_identity = imgs;
  return synth_toy_dataset(spec);
}

PoseVector standing_pose(double shift) {
  PoseVector p;
  for (int j = 0; j < kNumJoints; ++j)
    p.joints[j] = {0.3 + 0.01 * j + shift, 0.1 + 0.03 * j, 1.0};
  return p;
}

GanTrainConfig tiny_gan() {
  GanTrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 4;
  cfg.residual_blocks = 1;
  cfg.generator_channels = 16;
  cfg.discriminator_channels = 8;
  cfg.seed = 3;
  return cfg;
}

} // namespace

TEST_SUITE("ptgan") {

TEST_CASE("toy extractor gives a length-64 descriptor for 128x64 input") {
  FeatureExtractor fe(ExtractorVariant::toy, toy_arch(), 1);
  const Descriptor d = fe.extract(Image(128, 64, 0.3));
  CHECK(d.size() == 64);
  for (double v : d)
    CHECK(std::isfinite(v));
  CHECK_THROWS_AS(fe.extract(Image(64, 32, 0.3)), Error);
}

TEST_CASE("extraction is deterministic and sensitive to content") {
  FeatureExtractor fe(ExtractorVariant::toy, toy_arch(), 2);
  const Image zeros(128, 64, 0.0), ones(128, 64, 1.0);
  CHECK(fe.extract(zeros) == fe.extract(zeros));
  CHECK(fe.extract(zeros) != fe.extract(ones));
  const nn::Tensor batch = nn::images_to_tensor({&zeros, &ones});
  const nn::Tensor out = fe.extract_batch(batch);
  CHECK(std::vector<double>(out.sample(1).begin(), out.sample(1).end()) == fe.extract(ones));
}

TEST_CASE("extractor checkpoints and weight manifests restore the same descriptors") {
  FeatureExtractor fe(ExtractorVariant::toy, toy_arch(64, 32), 4);
  const Image img = toy_samples(2, 2)[0].image;
  const FeatureExtractor back =
      FeatureExtractor::from_checkpoint(parse_checkpoint(serialize_checkpoint(fe.to_checkpoint())));
  CHECK(back.extract(img) == fe.extract(img));
  CHECK(back.hash() == fe.hash());

  const std::string dir = toy::fresh_dir("extractor_manifest");
  save_weight_manifest(fe.params(), to_json(fe.arch()), dir + "/fr1.json");
  const FeatureExtractor loaded =
      FeatureExtractor::from_weight_manifest(dir + "/fr1.json", ExtractorVariant::generic);
  CHECK(loaded.variant() == ExtractorVariant::generic);
  const Descriptor a = loaded.extract(img), b = fe.extract(img);
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-5));
}

TEST_CASE("untrained generator output has the configured shape and range") {
  GeneratorArch arch;
  arch.descriptor_dim = 16;
  arch.height = 64;
  arch.width = 32;
  arch.residual_blocks = 1;
  arch.base_channels = 16;
  Generator g(arch, 5);
  const Descriptor desc(16, 0.5);
  const Image img = g.generate(desc, standing_pose(0));
  CHECK(img.height == 64);
  CHECK(img.width == 32);
  for (double v : img.data)
    CHECK((v >= 0.0 && v <= 1.0));
  CHECK(g.generate(desc, standing_pose(0)) == img);
  CHECK_THROWS_AS(g.generate(Descriptor(15, 0.5), standing_pose(0)), Error);
}

TEST_CASE("generator geometry must divide into its upsampling stages") {
  GeneratorArch arch;
  arch.descriptor_dim = 16;
  arch.height = 8;
  arch.width = 4;
  CHECK_THROWS_AS(Generator(arch, 1), ConfigError);
  arch.upsample_stages = 2;
  CHECK_NOTHROW(Generator(arch, 1));
}

TEST_CASE("discriminator heads: probability in (0,1) and C finite logits") {
  DiscriminatorArch arch;
  arch.height = 64;
  arch.width = 32;
  arch.num_classes = 5;
  arch.base_channels = 4;
  Discriminator d(arch, 7);
  const auto samples = toy_samples(2, 2);
  const nn::Tensor x = nn::images_to_tensor({&samples[0].image, &samples[1].image});
  const DiscriminatorOutput out = d.forward(x, {});
  CHECK(out.logits.c == 5);
  for (double p : out.prob.data)
    CHECK((p > 0.0 && p < 1.0));
  for (double v : out.logits.data)
    CHECK(std::isfinite(v));
}

TEST_CASE("adversarial loss closed forms") {
  CHECK(adversarial_loss(0.5, 0.5) == doctest::Approx(-1.3863).epsilon(1e-4));
  CHECK(std::abs(adversarial_loss(1.0, 0.0)) < 1e-6);
  const std::vector<double> real{0.9, 0.8}, fake{0.1, 0.2};
  const double expected = (2 * std::log(0.9) + 2 * std::log(0.8)) / 2;
  CHECK(adversarial_loss(real, fake) == doctest::Approx(expected));
  CHECK(adversarial_loss(real, fake) == doctest::Approx(-0.32850).epsilon(1e-4));
  CHECK(std::isfinite(adversarial_loss(0.0, 1.0)));
}

TEST_CASE("L2 loss closed forms and elementwise recomputation") {
  Image a(8, 4, 0.0), b(8, 4, 1.0);
  CHECK(l2_loss(a, a) == 0.0);
  CHECK(l2_loss(a, b) == doctest::Approx(std::sqrt(8.0 * 4 * 3)));
  Rng rng(3);
  nn::Tensor t(3, 3, 8, 4), g(3, 3, 8, 4);
  for (std::size_t i = 0; i < t.size(); ++i) {
    t.data[i] = uniform(rng, 0, 1);
    g.data[i] = uniform(rng, 0, 1);
  }
  double expected = 0;
  for (int n = 0; n < 3; ++n) {
    double s = 0;
    for (int i = 0; i < 96; ++i) {
      const double diff = t.data[n * 96 + i] - g.data[n * 96 + i];
      s += diff * diff;
    }
    expected += std::sqrt(s) / 3;
  }
  CHECK(l2_loss(t, g) == doctest::Approx(expected).epsilon(1e-12));
  CHECK_THROWS_AS(l2_loss(t, nn::Tensor(3, 3, 4, 8)), Error);
}

TEST_CASE("classification loss closed forms") {
  CHECK(classification_loss({100.0, -100.0, -100.0}, 0) == doctest::Approx(0.0));
  CHECK(classification_loss({0.0, 0.0, 0.0, 0.0}, 2) == doctest::Approx(1.3863).epsilon(1e-4));
  CHECK(classification_loss({2.0, 1.0, 0.0}, 0) == doctest::Approx(0.40761).epsilon(1e-4));
  // Summed over samples.
  const nn::Tensor logits = nn::rows_to_tensor({{0, 0, 0, 0}, {0, 0, 0, 0}});
  CHECK(classification_loss(logits, {0, 1}) == doctest::Approx(2 * std::log(4.0)));
  CHECK_THROWS_AS(classification_loss(logits, {0, 4}), Error);
}

TEST_CASE("total loss is a linear weighting of its parts") {
  LossWeights unit;
  const TotalLoss zero = total_gan_loss({}, unit);
  CHECK(zero.gen == 0.0);
  CHECK(zero.disc == 0.0);

  LossParts only_l2;
  only_l2.l2 = 2.5;
  CHECK(total_gan_loss(only_l2, unit).gen == 2.5);
  CHECK(total_gan_loss(only_l2, unit).disc == 0.0);

  LossWeights heavy;
  heavy.l2 = 10;
  LossParts base{0.3, 0.7, 1.0, 0.2, 0.4};
  LossParts more = base;
  more.l2 += 0.5;
  CHECK(total_gan_loss(more, heavy).gen - total_gan_loss(base, heavy).gen ==
        doctest::Approx(5.0).epsilon(1e-12));

  const TotalLoss t = total_gan_loss(base, unit);
  CHECK(t.gen == base.adv_gen + base.l2 + base.cls_fake);
  CHECK(t.disc == base.adv_disc + base.cls_real);
}

TEST_CASE("identity with two images yields both orderings") {
  auto samples = toy_samples(2, 2);
  const auto pairs = make_training_pairs(samples, {0, 1}, 400, 1);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto &p : pairs) {
    CHECK(samples[p.source].identity == samples[p.target].identity);
    CHECK(p.source != p.target);
    CHECK(p.pose == *samples[p.target].pose);
    CHECK(p.label == samples[p.source].identity);
    seen.insert({p.source, p.target});
  }
  CHECK(seen.count({0, 1}) == 1);
  CHECK(seen.count({1, 0}) == 1);
  CHECK(seen.size() == 4);
}

TEST_CASE("pair sampling is uniform over eligible identities") {
  auto samples = toy_samples(5, 2);
  // Identity 1 gets extra images; identity 4 loses its poses and drops out.
  auto extra = toy_samples(5, 6);
  for (const auto &s : extra)
    if (s.identity == 1)
      samples.push_back(s);
  for (auto &s : samples)
    if (s.identity == 4)
      s.pose.reset();
  PairSampler sampler(samples, {0, 1, 2, 3, 4});
  CHECK(sampler.eligible_identities() == 4);
  CHECK(sampler.excluded() == 2);

  const int n = 10000;
  std::map<int, int> count;
  for (const auto &p : make_training_pairs(samples, {0, 1, 2, 3, 4}, n, 9))
    ++count[samples[p.source].identity];
  CHECK(count.count(4) == 0);
  const double expected = n / 4.0, sigma = std::sqrt(n * 0.25 * 0.75);
  for (int id = 0; id < 4; ++id)
    CHECK(std::abs(count[id] - expected) < 3 * sigma);
}

TEST_CASE("no eligible identity is an error") {
  auto samples = toy_samples(2, 2);
  for (auto &s : samples)
    s.pose.reset();
  CHECK_THROWS_AS(PairSampler(samples, {0, 1}), Error);
}

TEST_CASE("one epoch on eight samples: finite history and a checkpoint") {
  const auto samples = toy_samples(2, 4);
  FeatureExtractor fr1(ExtractorVariant::toy, toy_arch(64, 32), 1);
  const std::string before = fr1.hash();
  const std::string dir = toy::fresh_dir("gan_smoke");
  const GanModels m = train_ptgan(samples, {0, 1}, fr1, tiny_gan(), AugmentConfig{}, dir);
  REQUIRE(m.history.epochs.size() == 1);
  const EpochStats &e = m.history.epochs[0];
  for (double v : {e.gen, e.disc, e.l2, e.adv_gen, e.adv_disc, e.cls_real, e.cls_fake})
    CHECK(std::isfinite(v));
  CHECK(fs::exists(fs::path(dir) / "gan.ckpt"));
  CHECK(fr1.hash() == before);

  auto [g, d] = gan_from_checkpoint(load_checkpoint((fs::path(dir) / "gan.ckpt").string()));
  GanModels copy = m;
  CHECK(hash_params(g.params()) == hash_params(copy.generator.params()));
  CHECK(hash_params(d.params()) == hash_params(copy.discriminator.params()));
}

TEST_CASE("same seed gives the same loss history") {
  const auto samples = toy_samples(2, 4);
  FeatureExtractor fr1(ExtractorVariant::toy, toy_arch(64, 32), 1);
  GanTrainConfig cfg = tiny_gan();
  cfg.epochs = 2;
  const auto a = train_ptgan(samples, {0, 1}, fr1, cfg, AugmentConfig{});
  const auto b = train_ptgan(samples, {0, 1}, fr1, cfg, AugmentConfig{});
  CHECK(to_json(a.history) == to_json(b.history));
}

TEST_CASE("gradient checks on the miniature generator and discriminator") {
  for (std::uint64_t seed : {1u, 2u}) {
    for (const auto &c : mini::ptgan_gradient_checks(seed)) {
      INFO(c.name << " worst " << c.report.worst_param);
      CHECK(c.report.checked > 0);
      CHECK(c.report.max_relative_error < 1e-4);
    }
  }
}

TEST_CASE("GAN config round trip and validation") {
  GanTrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.weights.l2 = 10;
  cfg.non_saturating = true;
  const GanTrainConfig back = gan_config_from_json(to_json(cfg));
  CHECK(back.lr == 1e-3);
  CHECK(back.weights.l2 == 10);
  CHECK(back.non_saturating);
  CHECK(back.adam_beta1 == 0.5);
  CHECK(back.adam_beta2 == 0.999);
  cfg.adam_beta1 = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

}

#include "miniatures.hpp"

#include "reid/fusion.hpp"
#include "reid/ptgan.hpp"

namespace mini {

using namespace reid;
using nn::Tensor;

namespace {

Tensor noise(int n, int c, int h, int w, Rng &rng, double lo, double hi) {
  Tensor t(n, c, h, w);
  for (double &v : t.data)
    v = uniform(rng, lo, hi);
  return t;
}

nn::NamedParams join(nn::NamedParams a, const nn::NamedParams &b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

} // namespace

std::vector<Check> ptgan_gradient_checks(std::uint64_t seed) {
  constexpr int kBatch = 3, kDim = 16, kClasses = 4;
  GeneratorArch ga;
  ga.descriptor_dim = kDim;
  ga.height = 8;
  ga.width = 4;
  ga.residual_blocks = 1;
  ga.base_channels = 8;
  ga.upsample_stages = 2;
  DiscriminatorArch da;
  da.height = 8;
  da.width = 4;
  da.num_classes = kClasses;
  da.base_channels = 4;
  da.depth = 2;
  Generator g(ga, seed);
  Discriminator d(da, seed + 1);

  Rng rng(seed + 2);
  const Tensor desc = noise(kBatch, kDim, 1, 1, rng, -1, 1);
  const Tensor pose = noise(kBatch, kPoseDim, 1, 1, rng, 0, 1);
  const Tensor real = noise(kBatch, 3, 8, 4, rng, 0, 1);
  const Tensor target = noise(kBatch, 3, 8, 4, rng, 0, 1);
  const std::vector<int> labels{0, 3, 1};
  const std::vector<double> targets{0.93, 0.97, 0.91};
  const nn::Pass pass{};

  const auto gp = g.params();
  const auto dp = d.params();
  const auto both = join(gp, dp);
  std::vector<Check> out;

  // Discriminator side of the adversarial game; the fake batch is held fixed.
  const Tensor fixed_fake = g.forward(desc, pose, pass);
  out.push_back({"adversarial/discriminator",
                 oracle::check_gradients(
                     dp,
                     [&] {
                       return discriminator_adversarial(d.forward(real, pass).prob.data,
                                                        d.forward(fixed_fake, pass).prob.data,
                                                        targets);
                     },
                     [&] {
                       nn::zero_grads(both);
                       const Tensor pr = d.forward(real, pass).prob;
                       const Tensor pf = d.forward(fixed_fake, pass).prob;
                       const auto [gr, gf] = discriminator_adversarial_grad(pr, pf, targets);
                       d.forward(real, pass);
                       d.backward(gr, {});
                       d.forward(fixed_fake, pass);
                       d.backward(gf, {});
                     },
                     seed)});

  out.push_back({"adversarial/generator",
                 oracle::check_gradients(
                     both,
                     [&] {
                       return generator_adversarial(
                           d.forward(g.forward(desc, pose, pass), pass).prob.data, false);
                     },
                     [&] {
                       nn::zero_grads(both);
                       const Tensor fake = g.forward(desc, pose, pass);
                       const Tensor p = d.forward(fake, pass).prob;
                       g.backward(d.backward(generator_adversarial_grad(p, false), {}));
                     },
                     seed + 10)});

  out.push_back({"l2/generator",
                 oracle::check_gradients(
                     gp, [&] { return l2_loss(target, g.forward(desc, pose, pass)); },
                     [&] {
                       nn::zero_grads(both);
                       const Tensor fake = g.forward(desc, pose, pass);
                       g.backward(l2_loss_grad(target, fake));
                     },
                     seed + 20)});

  out.push_back({"classification/real",
                 oracle::check_gradients(
                     dp, [&] { return classification_loss(d.forward(real, pass).logits, labels); },
                     [&] {
                       nn::zero_grads(both);
                       const Tensor logits = d.forward(real, pass).logits;
                       d.backward({}, classification_loss_grad(logits, labels));
                     },
                     seed + 30)});

  out.push_back(
      {"classification/generated",
       oracle::check_gradients(
           both,
           [&] {
             return classification_loss(d.forward(g.forward(desc, pose, pass), pass).logits,
                                        labels);
           },
           [&] {
             nn::zero_grads(both);
             const Tensor fake = g.forward(desc, pose, pass);
             const Tensor logits = d.forward(fake, pass).logits;
             g.backward(d.backward({}, classification_loss_grad(logits, labels)));
           },
           seed + 40)});
  return out;
}

std::vector<Check> fusion_gradient_checks(std::uint64_t seed) {
  constexpr int kBatch = 6, kDim = 16, kViews = 2, kClasses = 3;
  FusionNet net(kViews, kDim, kClasses, 0.6, seed);
  Rng rng(seed + 2);
  const Tensor input = noise(kBatch, (kViews + 1) * kDim, 1, 1, rng, -1, 1);
  const Tensor target = noise(kBatch, kDim, 1, 1, rng, -1, 1);
  const std::vector<int> labels{0, 1, 2, 2, 1, 0};

  nn::Sequential probe;
  probe.add<nn::Dense>(kDim, 1, 1.0);
  probe.add<nn::Sigmoid>();
  Rng probe_rng(seed + 3);
  probe.init(probe_rng);

  // Every evaluation replays the same dropout mask.
  auto forward = [&](auto &&fn) {
    Rng mask(seed + 4);
    return fn(nn::Pass{true, &mask});
  };

  const auto inference = net.params();
  const auto training = net.training_params();
  const auto with_probe = join(inference, nn::named_params(probe));
  std::vector<Check> out;

  out.push_back({"classification/fusion",
                 oracle::check_gradients(
                     training,
                     [&] {
                       return classification_loss(
                           forward([&](const nn::Pass &p) { return net.forward_logits(input, p); }),
                           labels);
                     },
                     [&] {
                       nn::zero_grads(training);
                       const Tensor logits =
                           forward([&](const nn::Pass &p) { return net.forward_logits(input, p); });
                       net.backward_logits(classification_loss_grad(logits, labels));
                     },
                     seed)});

  out.push_back({"l2/fusion",
                 oracle::check_gradients(
                     inference,
                     [&] {
                       return l2_loss(target, forward([&](const nn::Pass &p) {
                                        return net.forward(input, p);
                                      }));
                     },
                     [&] {
                       nn::zero_grads(training);
                       const Tensor fused =
                           forward([&](const nn::Pass &p) { return net.forward(input, p); });
                       net.backward(l2_loss_grad(target, fused));
                     },
                     seed + 10)});

  out.push_back({"adversarial/fusion",
                 oracle::check_gradients(
                     with_probe,
                     [&] {
                       const Tensor fused =
                           forward([&](const nn::Pass &p) { return net.forward(input, p); });
                       return generator_adversarial(probe.forward(fused, {}).data, false);
                     },
                     [&] {
                       nn::zero_grads(with_probe);
                       const Tensor fused =
                           forward([&](const nn::Pass &p) { return net.forward(input, p); });
                       const Tensor prob = probe.forward(fused, {});
                       net.backward(probe.backward(generator_adversarial_grad(prob, false)));
                     },
                     seed + 20)});
  return out;
}

} // namespace mini

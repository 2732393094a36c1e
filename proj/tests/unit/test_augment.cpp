#include "reid/augment.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

using namespace reid;

namespace {

Image noise_image(int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  Image img(h, w);
  for (double &v : img.data)
    v = uniform(rng, 0.0, 1.0);
  return img;
}

double max_abs_diff(const Image &a, const Image &b) {
  double m = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

bool in_unit_range(const Image &img) {
  return std::all_of(img.data.begin(), img.data.end(),
                     [](double v) { return v >= 0.0 && v <= 1.0; });
}

} // namespace

TEST_SUITE("augment") {

TEST_CASE("erase with probability zero is the identity") {
  AugmentConfig cfg;
  cfg.erase_prob = 0.0;
  Rng rng(1);
  const Image img = noise_image(64, 32, 2);
  CHECK(random_erase(img, cfg, rng) == img);
}

TEST_CASE("erase of a tenth of the area changes a tenth of the pixels") {
  AugmentConfig cfg;
  cfg.erase_prob = 1.0;
  cfg.erase_area_frac = {0.1, 0.1};
  const Image img(128, 64, 0.5);
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    Rng rng(seed);
    const Image out = random_erase(img, cfg, rng);
    int changed = 0, y0 = 1 << 30, y1 = -1, x0 = 1 << 30, x1 = -1;
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        bool diff = false;
        for (int c = 0; c < 3; ++c)
          diff = diff || out.at(y, x, c) != img.at(y, x, c);
        if (diff) {
          ++changed;
          y0 = std::min(y0, y);
          y1 = std::max(y1, y);
          x0 = std::min(x0, x);
          x1 = std::max(x1, x);
        }
      }
    const int rows = y1 - y0 + 1, cols = x1 - x0 + 1;
    CHECK(changed == rows * cols);
    const double target = 0.1 * img.height * img.width;
    CHECK(std::abs(changed - target) <= rows + cols + 1);
  }
}

TEST_CASE("erase is deterministic under a fixed seed") {
  AugmentConfig cfg;
  cfg.erase_prob = 1.0;
  const Image img = noise_image(64, 32, 3);
  Rng a(9), b(9);
  CHECK(random_erase(img, cfg, a) == random_erase(img, cfg, b));
}

TEST_CASE("full-frame crop is the identity up to resampling") {
  AugmentConfig cfg;
  cfg.crop_scale = {1.0, 1.0};
  Rng rng(4);
  const Image img = noise_image(64, 32, 5);
  CHECK(max_abs_diff(random_crop(img, cfg, rng), img) < 1e-6);
}

TEST_CASE("top-left half window of a half-black image is all black") {
  Image img(64, 32, 1.0);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 16; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(y, x, c) = 0.0;
  const Image out = crop_resize(img, 0, 0, 32, 16);
  for (double v : out.data)
    CHECK(v == 0.0);
}

TEST_CASE("crop keeps the input shape") {
  AugmentConfig cfg;
  cfg.crop_scale = {0.5, 0.9};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const int h = 32 + static_cast<int>(seed % 5) * 8, w = 16 + static_cast<int>(seed % 3) * 8;
    const Image out = random_crop(noise_image(h, w, seed), cfg, rng);
    CHECK(out.height == h);
    CHECK(out.width == w);
  }
}

TEST_CASE("crop windows below 8x8 are rejected") {
  AugmentConfig cfg;
  cfg.crop_scale = {0.1, 1.0};
  Rng rng(0);
  CHECK_THROWS_AS(random_crop(noise_image(64, 32, 1), cfg, rng), ConfigError);
}

TEST_CASE("forced flip twice is the identity") {
  AugmentConfig cfg;
  cfg.flip_prob = 1.0;
  Rng rng(0);
  const Image img = noise_image(16, 8, 6);
  const Image once = horizontal_flip(img, cfg, rng);
  CHECK_FALSE(once == img);
  CHECK(horizontal_flip(once, cfg, rng) == img);
}

TEST_CASE("zero rotation bound is the identity") {
  AugmentConfig cfg;
  cfg.rotation_deg = 0.0;
  Rng rng(0);
  const Image img = noise_image(64, 32, 7);
  CHECK(max_abs_diff(random_rotate(img, cfg, rng), img) < 1e-9);
}

TEST_CASE("unit jitter factor is the identity") {
  AugmentConfig cfg;
  cfg.jitter_strength = {1.0, 1.0};
  Rng rng(0);
  const Image img = noise_image(64, 32, 8);
  CHECK(color_jitter(img, cfg, rng) == img);
}

TEST_CASE("rotation by 180 degrees reverses the pixel order") {
  const Image img = noise_image(9, 5, 3);
  const Image out = rotate(img, 180.0);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 5; ++x)
      CHECK(out.at(y, x, 1) == doctest::Approx(img.at(8 - y, 4 - x, 1)).epsilon(1e-9));
}

TEST_CASE("distortion stays within its displacement bound") {
  AugmentConfig cfg;
  cfg.distortion_strength = 2.0;
  // A horizontal ramp: each pixel's value reveals its horizontal source.
  Image ramp(32, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      for (int c = 0; c < 3; ++c)
        ramp.at(y, x, c) = x / 31.0;
  Rng rng(12);
  const Image out = random_distort(ramp, cfg, rng);
  for (int y = 0; y < 32; ++y)
    for (int x = 2; x < 30; ++x)
      CHECK(std::abs(out.at(y, x, 0) * 31.0 - x) <= 2.0 + 1e-9);
  cfg.distortion_strength = 0.0;
  CHECK(random_distort(ramp, cfg, rng) == ramp);
}

TEST_CASE("every operator preserves shape and range") {
  AugmentConfig cfg;
  cfg.erase_prob = 1.0;
  cfg.flip_prob = 0.5;
  cfg.jitter_strength = {0.5, 1.8};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Image img = noise_image(64, 32, 100 + seed);
    Rng rng(seed);
    for (const Image &out :
         {random_erase(img, cfg, rng), random_crop(img, cfg, rng), random_rotate(img, cfg, rng),
          color_jitter(img, cfg, rng), horizontal_flip(img, cfg, rng),
          random_distort(img, cfg, rng), augment(img, cfg, rng)}) {
      CHECK(out.height == img.height);
      CHECK(out.width == img.width);
      CHECK(in_unit_range(out));
    }
  }
}

TEST_CASE("the pipeline runs flip, crop, rotate, jitter, distort, erase in order") {
  AugmentConfig cfg;
  cfg.erase_prob = 1.0;
  const Image img = noise_image(64, 32, 13);
  Rng a(77), b(77);
  Image manual = horizontal_flip(img, cfg, b);
  manual = random_crop(manual, cfg, b);
  manual = random_rotate(manual, cfg, b);
  manual = color_jitter(manual, cfg, b);
  manual = random_distort(manual, cfg, b);
  manual = random_erase(manual, cfg, b);
  CHECK(augment(img, cfg, a) == manual);
  Rng c(77);
  CHECK(augment(img, cfg, c) == manual);
}

TEST_CASE("config validation and JSON round trip") {
  AugmentConfig cfg;
  cfg.seed = 99;
  cfg.crop_scale = {0.7, 0.95};
  const AugmentConfig back = augment_config_from_json(to_json(cfg));
  CHECK(back.seed == 99);
  CHECK(back.crop_scale == cfg.crop_scale);
  CHECK(back.rotation_deg == 20.0);
  AugmentConfig bad;
  bad.erase_area_frac = {0.3, 0.1};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = AugmentConfig{};
  bad.rotation_deg = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

}

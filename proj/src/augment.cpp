#include "reid/augment.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

namespace reid {

namespace {

void check_range(const std::pair<double, double> &r, double lo, double hi,
                 const char *name) {
  if (!(r.first <= r.second) || r.first < lo || r.second > hi)
    throw ConfigError(std::string("augment.") + name + " must be an ordered range within [" +
                      std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

void check_prob(double p, const char *name) {
  if (!(p >= 0.0 && p <= 1.0))
    throw ConfigError(std::string("augment.") + name + " must lie in [0,1]");
}

std::pair<double, double> pair_from(const nlohmann::json &j) {
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

} // namespace

void AugmentConfig::validate() const {
  check_prob(erase_prob, "erase_prob");
  check_prob(flip_prob, "flip_prob");
  check_range(erase_area_frac, 0.0, 1.0, "erase_area_frac");
  check_range(crop_scale, 0.0, 1.0, "crop_scale");
  check_range(jitter_strength, 0.0, 10.0, "jitter_strength");
  if (!(rotation_deg >= 0.0))
    throw ConfigError("augment.rotation_deg must be >= 0");
  if (!(distortion_strength >= 0.0))
    throw ConfigError("augment.distortion_strength must be >= 0");
}

nlohmann::json to_json(const AugmentConfig &c) {
  return {{"erase_prob", c.erase_prob},
          {"erase_area_frac", {c.erase_area_frac.first, c.erase_area_frac.second}},
          {"crop_scale", {c.crop_scale.first, c.crop_scale.second}},
          {"rotation_deg", c.rotation_deg},
          {"jitter_strength", {c.jitter_strength.first, c.jitter_strength.second}},
          {"flip_prob", c.flip_prob},
          {"distortion_strength", c.distortion_strength},
          {"seed", c.seed}};
}

AugmentConfig augment_config_from_json(const nlohmann::json &j) {
  AugmentConfig c;
  c.erase_prob = j.at("erase_prob").get<double>();
  c.erase_area_frac = pair_from(j.at("erase_area_frac"));
  c.crop_scale = pair_from(j.at("crop_scale"));
  c.rotation_deg = j.at("rotation_deg").get<double>();
  c.jitter_strength = pair_from(j.at("jitter_strength"));
  c.flip_prob = j.at("flip_prob").get<double>();
  c.distortion_strength = j.at("distortion_strength").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

Image random_erase(const Image &img, const AugmentConfig &cfg, Rng &rng) {
  if (uniform(rng, 0.0, 1.0) >= cfg.erase_prob)
    return img;
  const double total = static_cast<double>(img.height) * img.width;
  const double area = uniform(rng, cfg.erase_area_frac.first, cfg.erase_area_frac.second) * total;
  int h = 0, w = 0;
  for (int attempt = 0; attempt < 100; ++attempt) {
    const double aspect = std::exp(uniform(rng, std::log(0.3), std::log(1 / 0.3)));
    h = static_cast<int>(std::lround(std::sqrt(area * aspect)));
    w = static_cast<int>(std::lround(std::sqrt(area / aspect)));
    if (h >= 1 && w >= 1 && h <= img.height && w <= img.width)
      break;
    h = w = 0;
  }
  if (h == 0) {
    // Fall back to a full-width band of the requested area.
    w = img.width;
    h = std::clamp(static_cast<int>(std::lround(area / w)), 1, img.height);
  }
  const int y0 = static_cast<int>(uniform_index(rng, img.height - h + 1));
  const int x0 = static_cast<int>(uniform_index(rng, img.width - w + 1));
  Image out = img;
  for (int y = y0; y < y0 + h; ++y)
    for (int x = x0; x < x0 + w; ++x)
      for (int c = 0; c < Image::channels; ++c)
        out.at(y, x, c) = uniform(rng, 0.0, 1.0);
  return out;
}

Image crop_resize(const Image &img, int y0, int x0, int h, int w) {
  if (h < 1 || w < 1 || y0 < 0 || x0 < 0 || y0 + h > img.height || x0 + w > img.width)
    throw Error("crop window outside the image");
  Image out(img.height, img.width);
  const double sy = static_cast<double>(h) / img.height;
  const double sx = static_cast<double>(w) / img.width;
  for (int y = 0; y < img.height; ++y) {
    const double src_y = std::clamp((y + 0.5) * sy - 0.5, 0.0, h - 1.0) + y0;
    for (int x = 0; x < img.width; ++x) {
      const double src_x = std::clamp((x + 0.5) * sx - 0.5, 0.0, w - 1.0) + x0;
      for (int c = 0; c < Image::channels; ++c)
        out.at(y, x, c) = sample_bilinear(img, src_y, src_x, c);
    }
  }
  return out;
}

Image random_crop(const Image &img, const AugmentConfig &cfg, Rng &rng) {
  if (cfg.crop_scale.first * img.height < 8.0 || cfg.crop_scale.first * img.width < 8.0)
    throw ConfigError("crop_scale minimum yields a window smaller than 8x8");
  const double s = uniform(rng, cfg.crop_scale.first, cfg.crop_scale.second);
  const int h = std::clamp(static_cast<int>(std::lround(s * img.height)), 8, img.height);
  const int w = std::clamp(static_cast<int>(std::lround(s * img.width)), 8, img.width);
  const int y0 = static_cast<int>(uniform_index(rng, img.height - h + 1));
  const int x0 = static_cast<int>(uniform_index(rng, img.width - w + 1));
  return crop_resize(img, y0, x0, h, w);
}

Image rotate(const Image &img, double degrees) {
  if (degrees == 0.0)
    return img;
  const double r = degrees * M_PI / 180.0;
  const double cs = std::cos(r), sn = std::sin(r);
  const double cy = (img.height - 1) / 2.0, cx = (img.width - 1) / 2.0;
  Image out(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      // Inverse map: output pixel -> source location.
      const double dx = x - cx, dy = y - cy;
      const double sx = cs * dx + sn * dy + cx;
      const double sy = -sn * dx + cs * dy + cy;
      for (int c = 0; c < Image::channels; ++c)
        out.at(y, x, c) = sample_bilinear(img, sy, sx, c);
    }
  return out;
}

Image random_rotate(const Image &img, const AugmentConfig &cfg, Rng &rng) {
  const double angle = uniform(rng, -cfg.rotation_deg, cfg.rotation_deg);
  return rotate(img, angle);
}

Image scale_channels(const Image &img, const std::array<double, 3> &factors) {
  Image out = img;
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = std::clamp(out.data[i] * factors[i % 3], 0.0, 1.0);
  return out;
}

Image color_jitter(const Image &img, const AugmentConfig &cfg, Rng &rng) {
  std::array<double, 3> f{};
  for (double &v : f)
    v = uniform(rng, cfg.jitter_strength.first, cfg.jitter_strength.second);
  if (cfg.jitter_strength.first == cfg.jitter_strength.second)
    f.fill(cfg.jitter_strength.first);
  return scale_channels(img, f);
}

Image mirror(const Image &img) {
  Image out(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < Image::channels; ++c)
        out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
  return out;
}

Image horizontal_flip(const Image &img, const AugmentConfig &cfg, Rng &rng) {
  return uniform(rng, 0.0, 1.0) < cfg.flip_prob ? mirror(img) : img;
}

Image random_distort(const Image &img, const AugmentConfig &cfg, Rng &rng) {
  constexpr int kGrid = 4;
  double gx[kGrid][kGrid], gy[kGrid][kGrid];
  for (int i = 0; i < kGrid; ++i)
    for (int j = 0; j < kGrid; ++j) {
      gx[i][j] = uniform(rng, -cfg.distortion_strength, cfg.distortion_strength);
      gy[i][j] = uniform(rng, -cfg.distortion_strength, cfg.distortion_strength);
    }
  if (cfg.distortion_strength == 0.0)
    return img;
  Image out(img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    const double fy = img.height > 1 ? y * (kGrid - 1.0) / (img.height - 1) : 0.0;
    const int i0 = std::min(static_cast<int>(fy), kGrid - 2);
    const double ty = fy - i0;
    for (int x = 0; x < img.width; ++x) {
      const double fx = img.width > 1 ? x * (kGrid - 1.0) / (img.width - 1) : 0.0;
      const int j0 = std::min(static_cast<int>(fx), kGrid - 2);
      const double tx = fx - j0;
      auto lerp2 = [&](double g[kGrid][kGrid]) {
        return (g[i0][j0] * (1 - tx) + g[i0][j0 + 1] * tx) * (1 - ty) +
               (g[i0 + 1][j0] * (1 - tx) + g[i0 + 1][j0 + 1] * tx) * ty;
      };
      const double dx = lerp2(gx), dy = lerp2(gy);
      for (int c = 0; c < Image::channels; ++c)
        out.at(y, x, c) = sample_bilinear(img, y + dy, x + dx, c);
    }
  }
  return out;
}

Image augment(const Image &img, const AugmentConfig &cfg, Rng &rng) {
  Image out = horizontal_flip(img, cfg, rng);
  out = random_crop(out, cfg, rng);
  out = random_rotate(out, cfg, rng);
  out = color_jitter(out, cfg, rng);
  out = random_distort(out, cfg, rng);
  return random_erase(out, cfg, rng);
}

} // namespace reid

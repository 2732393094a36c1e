#pragma once

#include "reid/common.hpp"
#include "reid/image.hpp"

#include <nlohmann/json_fwd.hpp>

#include <array>
#include <utility>

namespace reid {

struct AugmentConfig {
  double erase_prob = 0.5;
  std::pair<double, double> erase_area_frac{0.02, 0.2};
  std::pair<double, double> crop_scale{0.8, 1.0}; ///< side-length fraction
  double rotation_deg = 20.0;
  std::pair<double, double> jitter_strength{0.8, 1.2};
  double flip_prob = 0.5;
  double distortion_strength = 2.0; ///< max displacement in pixels
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const AugmentConfig &cfg);
AugmentConfig augment_config_from_json(const nlohmann::json &j);

/// With probability erase_prob fill one rectangle (area fraction drawn from
/// erase_area_frac, aspect ratio in [0.3, 3.3]) with uniform noise.
Image random_erase(const Image &img, const AugmentConfig &cfg, Rng &rng);

/// Crop the window [y0, y0+h) x [x0, x0+w) and resize it bilinearly back to
/// the input shape, sampling only inside the window.
Image crop_resize(const Image &img, int y0, int x0, int h, int w);

/// Side scale drawn from crop_scale, window position uniform.
Image random_crop(const Image &img, const AugmentConfig &cfg, Rng &rng);

/// Rotate about the centre by an angle in degrees, replicating the border.
Image rotate(const Image &img, double degrees);
Image random_rotate(const Image &img, const AugmentConfig &cfg, Rng &rng);

Image scale_channels(const Image &img, const std::array<double, 3> &factors);
Image color_jitter(const Image &img, const AugmentConfig &cfg, Rng &rng);

Image mirror(const Image &img);
Image horizontal_flip(const Image &img, const AugmentConfig &cfg, Rng &rng);

/// Smooth displacement field: a 4x4 grid of offsets in
/// [-distortion_strength, distortion_strength] pixels, bilinearly upsampled.
Image random_distort(const Image &img, const AugmentConfig &cfg, Rng &rng);

/// flip -> crop -> rotate -> jitter -> distort -> erase.
Image augment(const Image &img, const AugmentConfig &cfg, Rng &rng);

} // namespace reid

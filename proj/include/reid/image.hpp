#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace reid {

/// H x W x 3 intensity image, interleaved RGB, values nominally in [0,1].
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Image() = default;
  Image(int h, int w, double fill = 0.0);

  static constexpr int channels = 3;

  double &at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }

  bool operator==(const Image &) const = default;
};

/// Bilinear sample at continuous pixel coordinates (pixel centers at integers),
/// replicating the border.
double sample_bilinear(const Image &img, double y, double x, int c);

/// Bilinear resize to (h, w) using pixel-center alignment.
Image resize_bilinear(const Image &img, int h, int w);

/// Decode PNG/JPEG (anything OpenCV reads) into an RGB image in [0,1].
Image load_image(const std::string &path);

/// Encode as PNG; values are clamped and quantized to 8 bits.
void save_png(const Image &img, const std::string &path);

/// Round every value to the nearest k/255 so a PNG round trip is exact.
void quantize8(Image &img);

} // namespace reid

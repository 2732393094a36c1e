#include "reid/image.hpp"

#include "reid/common.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>

namespace reid {

Image::Image(int h, int w, double fill)
    : height(h), width(w),
      data(static_cast<std::size_t>(h) * w * channels, fill) {}

double sample_bilinear(const Image &img, double y, double x, int c) {
  y = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
  x = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const int y1 = std::min(y0 + 1, img.height - 1);
  const int x1 = std::min(x0 + 1, img.width - 1);
  const double fy = y - y0;
  const double fx = x - x0;
  const double top = img.at(y0, x0, c) * (1 - fx) + img.at(y0, x1, c) * fx;
  const double bot = img.at(y1, x0, c) * (1 - fx) + img.at(y1, x1, c) * fx;
  return top * (1 - fy) + bot * fy;
}

Image resize_bilinear(const Image &img, int h, int w) {
  if (h <= 0 || w <= 0 || img.empty())
    throw Error("resize_bilinear: invalid size");
  if (h == img.height && w == img.width)
    return img;
  Image out(h, w);
  const double sy = static_cast<double>(img.height) / h;
  const double sx = static_cast<double>(img.width) / w;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < Image::channels; ++c)
        out.at(y, x, c) =
            sample_bilinear(img, (y + 0.5) * sy - 0.5, (x + 0.5) * sx - 0.5, c);
  return out;
}

Image load_image(const std::string &path) {
  cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
  if (bgr.empty())
    throw FormatError("cannot decode image " + path);
  Image img(bgr.rows, bgr.cols);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto *row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(y, x, c) = row[x][2 - c] / 255.0;
  }
  return img;
}

void save_png(const Image &img, const std::string &path) {
  cv::Mat bgr(img.height, img.width, CV_8UC3);
  for (int y = 0; y < img.height; ++y) {
    auto *row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c)
        row[x][2 - c] = static_cast<unsigned char>(
            std::lround(std::clamp(img.at(y, x, c), 0.0, 1.0) * 255.0));
  }
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty())
    std::filesystem::create_directories(parent);
  if (!cv::imwrite(path, bgr))
    throw Error("cannot write image " + path);
}

void quantize8(Image &img) {
  for (double &v : img.data)
    v = static_cast<double>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)) / 255.0;
}

} // namespace reid

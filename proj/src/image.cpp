#include "pouta/image.hpp"

#include <algorithm>
#include <numeric>

#include <opencv2/imgproc.hpp>

#include "pouta/errors.hpp"

namespace pouta {

Image::Image(int h, int w, int c, float fill)
    : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {}

bool Image::in_unit_range() const {
  return std::all_of(data.begin(), data.end(), [](float v) { return v >= 0.0f && v <= 1.0f; });
}

Mask::Mask(int h, int w, std::uint8_t fill)
    : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

std::size_t Mask::foreground() const {
  return static_cast<std::size_t>(std::count_if(data.begin(), data.end(), [](std::uint8_t v) { return v != 0; }));
}

double Mask::foreground_fraction() const {
  return data.empty() ? 0.0 : static_cast<double>(foreground()) / static_cast<double>(data.size());
}

ScalarField::ScalarField(int h, int w, float fill)
    : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

Image resize(const Image& image, int height, int width) {
  if (height <= 0 || width <= 0) throw ArgumentError("resize: target size must be positive");
  if (image.height == height && image.width == width) return image;
  cv::Mat src(image.height, image.width, CV_32FC(image.channels), const_cast<float*>(image.data.data()));
  Image out(height, width, image.channels);
  cv::Mat dst(height, width, CV_32FC(image.channels), out.data.data());
  cv::resize(src, dst, dst.size(), 0, 0, cv::INTER_LINEAR);
  for (float& v : out.data) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

Mask resize(const Mask& mask, int height, int width) {
  if (height <= 0 || width <= 0) throw ArgumentError("resize: target size must be positive");
  if (mask.height == height && mask.width == width) return mask;
  cv::Mat src(mask.height, mask.width, CV_8UC1, const_cast<std::uint8_t*>(mask.data.data()));
  Mask out(height, width);
  cv::Mat dst(height, width, CV_8UC1, out.data.data());
  cv::resize(src, dst, dst.size(), 0, 0, cv::INTER_NEAREST);
  return out;
}

Image to_rgb(const Image& image) {
  if (image.channels != 1) return image;
  Image out(image.height, image.width, 3);
  for (std::size_t i = 0; i < image.pixel_count(); ++i) {
    out.data[3 * i] = out.data[3 * i + 1] = out.data[3 * i + 2] = image.data[i];
  }
  return out;
}

}  // namespace pouta

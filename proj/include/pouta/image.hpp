#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace pouta {

// Interleaved H x W x C image with values in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;

  Image() = default;
  Image(int h, int w, int c, float fill = 0.0f);

  float& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  float at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
  bool same_shape(const Image& other) const {
    return height == other.height && width == other.width && channels == other.channels;
  }
  bool in_unit_range() const;
};

// Strictly binary H x W mask; 1 marks anomalous pixels.
struct Mask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  Mask() = default;
  Mask(int h, int w, std::uint8_t fill = 0);

  std::uint8_t& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
  std::size_t foreground() const;
  double foreground_fraction() const;
  bool empty_foreground() const { return foreground() == 0; }
};

// Single-channel real-valued map (heatmaps, noise fields).
struct ScalarField {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  ScalarField() = default;
  ScalarField(int h, int w, float fill = 0.0f);

  float& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  float at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
  std::span<const float> values() const { return data; }
};

// Bilinear resize of every channel; grayscale inputs keep one channel.
Image resize(const Image& image, int height, int width);
// Nearest-neighbour resize keeps masks binary.
Mask resize(const Mask& mask, int height, int width);
// Replicates a single channel into three; other channel counts pass through.
Image to_rgb(const Image& image);

}  // namespace pouta

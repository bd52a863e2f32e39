#pragma once

#include <array>
#include <cstdint>
#include <utility>

#include <torch/torch.h>

namespace pouta {

// Channel widths of the four pyramid levels (strides 2, 4, 8, 16).
using LevelWidths = std::array<std::int64_t, 4>;

constexpr LevelWidths widths_from_base(std::int64_t base) { return {base, 2 * base, 4 * base, 8 * base}; }

inline constexpr std::array<std::int64_t, 4> kLevelStrides{2, 4, 8, 16};

// Four feature maps, index 0 is the finest (stride 2).
struct FeaturePyramid {
  std::array<torch::Tensor, 4> levels;

  const torch::Tensor& operator[](std::size_t i) const { return levels[i]; }
  torch::Tensor& operator[](std::size_t i) { return levels[i]; }
};

struct Reconstruction {
  FeaturePyramid encoder;
  torch::Tensor latent;
  FeaturePyramid decoder;
  torch::Tensor image;  // B x C x H x W in [0, 1]
};

// 3x3 convolution -> batch norm -> ReLU.
class ConvBlockImpl : public torch::nn::Module {
 public:
  ConvBlockImpl(std::int64_t in_channels, std::int64_t out_channels, std::int64_t stride = 1);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv_{nullptr};
  torch::nn::BatchNorm2d norm_{nullptr};
};
TORCH_MODULE(ConvBlock);

// Two conv blocks; the first one optionally strides by 2.
torch::nn::Sequential make_stage(std::int64_t in_channels, std::int64_t out_channels, std::int64_t stride);

torch::Tensor upsample_to(const torch::Tensor& x, std::int64_t height, std::int64_t width);

struct ReconstructiveOptions {
  std::int64_t in_channels = 3;
  LevelWidths widths{64, 128, 256, 512};
  // Square input side; must be a multiple of 16.
  std::int64_t image_size = 224;
};

// Encoder -> mapping layer -> decoder autoencoder exposing both feature pyramids.
class ReconstructiveNetImpl : public torch::nn::Module {
 public:
  explicit ReconstructiveNetImpl(ReconstructiveOptions options = {});

  FeaturePyramid encode(const torch::Tensor& input);
  torch::Tensor map_latent(const torch::Tensor& f_e4);
  std::pair<FeaturePyramid, torch::Tensor> decode(const torch::Tensor& latent);
  Reconstruction forward(const torch::Tensor& input);

  const ReconstructiveOptions& options() const { return options_; }

 private:
  ReconstructiveOptions options_;
  std::array<torch::nn::Sequential, 4> encoder_;
  torch::nn::Sequential mapping_{nullptr};
  std::array<torch::nn::Sequential, 4> decoder_;
  torch::nn::Conv2d output_{nullptr};
};
TORCH_MODULE(ReconstructiveNet);

struct SsimOptions {
  std::int64_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

// Mean SSIM over all pixels, channels and batch (Gaussian window, zero padding).
torch::Tensor ssim(const torch::Tensor& a, const torch::Tensor& b, const SsimOptions& options = {});

// MSE + (1 - SSIM).
torch::Tensor reconstruction_loss(const torch::Tensor& reconstructed, const torch::Tensor& original);

}  // namespace pouta

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "pouta/reconstructive.hpp"

namespace pouta {

// Contrast maps for all four levels plus the guided refinements of levels 1..3.
struct ContrastPyramid {
  std::array<torch::Tensor, 4> contrast;
  std::array<torch::Tensor, 3> refined;  // undefined tensors when guidance is disabled

  // The maps that feed prediction: refined levels where present, raw contrast otherwise.
  std::array<torch::Tensor, 4> prediction_inputs() const;
};

struct GuidanceWeights {
  torch::Tensor spatial;  // B x 1 x H_i x W_i
  torch::Tensor channel;  // B x C_i x 1 x 1
};

// spatial * contrast * channel with broadcasting over the singleton axes.
torch::Tensor apply_guidance(const torch::Tensor& contrast, const torch::Tensor& spatial, const torch::Tensor& channel);

// Projects encoder and decoder maps with separate 1x1 convolutions and fuses
// their concatenation with another 1x1 convolution.
class FeatureContrastImpl : public torch::nn::Module {
 public:
  explicit FeatureContrastImpl(std::int64_t channels);
  torch::Tensor forward(const torch::Tensor& encoder_level, const torch::Tensor& decoder_level);

 private:
  torch::nn::Conv2d encoder_proj_{nullptr};
  torch::nn::Conv2d decoder_proj_{nullptr};
  torch::nn::Conv2d fuse_{nullptr};
  torch::nn::BatchNorm2d norm_{nullptr};
};
TORCH_MODULE(FeatureContrast);

// Derives spatial and channel weight maps from the next-coarser level and
// multiplies them onto the current contrast map.
class SemanticGuidanceImpl : public torch::nn::Module {
 public:
  SemanticGuidanceImpl(std::int64_t channels, std::int64_t deeper_channels);

  std::pair<torch::Tensor, GuidanceWeights> forward(const torch::Tensor& current, const torch::Tensor& deeper);

  // Test hook: replaces both weight maps by ones.
  void force_unit_weights(bool enabled) { unit_weights_ = enabled; }

 private:
  std::int64_t channels_;
  std::int64_t deeper_channels_;
  bool unit_weights_ = false;
  torch::nn::Conv2d context_{nullptr};
  torch::nn::Conv2d spatial_{nullptr};
  torch::nn::Conv2d channel_{nullptr};
};
TORCH_MODULE(SemanticGuidance);

// Side output used for deep supervision: 1x1 conv to two classes, bilinear
// upsampling to the image size, softmax.
class PredictionHeadImpl : public torch::nn::Module {
 public:
  explicit PredictionHeadImpl(std::int64_t channels);
  torch::Tensor forward(const torch::Tensor& x, std::int64_t height, std::int64_t width);

 private:
  torch::nn::Conv2d classify_{nullptr};
};
TORCH_MODULE(PredictionHead);

// Upsamples all levels to stride 2, concatenates them, and predicts the
// two-class map at full resolution.
class AggregationHeadImpl : public torch::nn::Module {
 public:
  AggregationHeadImpl(const LevelWidths& widths, std::int64_t hidden);
  torch::Tensor forward(const std::array<torch::Tensor, 4>& levels, std::int64_t height, std::int64_t width);

 private:
  ConvBlock fuse_{nullptr};
  torch::nn::Conv2d classify_{nullptr};
};
TORCH_MODULE(AggregationHead);

struct DiscriminativeOptions {
  LevelWidths widths{64, 128, 256, 512};
  bool use_hsg = true;
  bool use_mss = true;
  std::int64_t aggregate_channels = 64;
};

struct Discrimination {
  torch::Tensor probabilities;  // B x 2 x H x W softmax, channel 1 = anomaly
  torch::Tensor heatmap;        // B x 1 x H x W anomaly probability
  ContrastPyramid pyramid;
  std::vector<torch::Tensor> side_outputs;  // four MSS heads, training only
};

class DiscriminativeNetImpl : public torch::nn::Module {
 public:
  explicit DiscriminativeNetImpl(DiscriminativeOptions options = {});

  // level is 1-based.
  torch::Tensor fcm(int level, const torch::Tensor& encoder_level, const torch::Tensor& decoder_level);
  std::pair<torch::Tensor, GuidanceWeights> hsg_refine(int level, const torch::Tensor& current,
                                                       const torch::Tensor& deeper);

  ContrastPyramid contrast(const FeaturePyramid& encoder, const FeaturePyramid& decoder);
  std::array<torch::Tensor, 4> mss_forward(const ContrastPyramid& pyramid, std::int64_t height, std::int64_t width);
  torch::Tensor aggregate_predict(const ContrastPyramid& pyramid, std::int64_t height, std::int64_t width);

  Discrimination forward(const FeaturePyramid& encoder, const FeaturePyramid& decoder, std::int64_t height,
                         std::int64_t width);

  const DiscriminativeOptions& options() const { return options_; }
  SemanticGuidance guidance(int level) const { return hsg_[static_cast<std::size_t>(level - 1)]; }

 private:
  DiscriminativeOptions options_;
  std::array<FeatureContrast, 4> fcm_{nullptr, nullptr, nullptr, nullptr};
  std::array<SemanticGuidance, 3> hsg_{nullptr, nullptr, nullptr};
  std::array<PredictionHead, 4> mss_{nullptr, nullptr, nullptr, nullptr};
  AggregationHead aggregate_{nullptr};
};
TORCH_MODULE(DiscriminativeNet);

// Anomaly channel of a two-class softmax map, kept as B x 1 x H x W.
inline torch::Tensor anomaly_channel(const torch::Tensor& probabilities) { return probabilities.narrow(1, 1, 1); }

// U-Net segmentation network on the channel concatenation of input and
// reconstruction; the discriminator of the vanilla baseline.
class UNetDiscriminatorImpl : public torch::nn::Module {
 public:
  UNetDiscriminatorImpl(std::int64_t in_channels, std::int64_t base_width);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  std::array<torch::nn::Sequential, 5> down_;
  std::array<ConvBlock, 4> up_{nullptr, nullptr, nullptr, nullptr};
  std::array<torch::nn::Sequential, 4> merge_;
  torch::nn::Conv2d classify_{nullptr};
};
TORCH_MODULE(UNetDiscriminator);

}  // namespace pouta

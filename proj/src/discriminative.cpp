#include "pouta/discriminative.hpp"

#include <string>

#include "pouta/errors.hpp"

namespace pouta {

namespace {

torch::nn::Conv2d conv1x1(std::int64_t in, std::int64_t out, bool bias = true) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 1).bias(bias));
}

void require_level(int level, int lo, int hi, const char* op) {
  if (level < lo || level > hi) {
    throw ArgumentError(std::string(op) + ": level " + std::to_string(level) + " outside [" + std::to_string(lo) +
                        ", " + std::to_string(hi) + "]");
  }
}

}  // namespace

std::array<torch::Tensor, 4> ContrastPyramid::prediction_inputs() const {
  std::array<torch::Tensor, 4> out;
  for (std::size_t i = 0; i < 3; ++i) out[i] = refined[i].defined() ? refined[i] : contrast[i];
  out[3] = contrast[3];
  return out;
}

torch::Tensor apply_guidance(const torch::Tensor& contrast, const torch::Tensor& spatial, const torch::Tensor& channel) {
  if (contrast.dim() != 4 || spatial.dim() != 4 || channel.dim() != 4) {
    throw ArgumentError("apply_guidance: expected rank-4 tensors");
  }
  const auto b = contrast.size(0), c = contrast.size(1), h = contrast.size(2), w = contrast.size(3);
  if (spatial.size(0) != b || spatial.size(1) != 1 || spatial.size(2) != h || spatial.size(3) != w) {
    throw ArgumentError("apply_guidance: spatial weights must be B x 1 x H x W, got " + torch::str(spatial.sizes()));
  }
  if (channel.size(0) != b || channel.size(1) != c || channel.size(2) != 1 || channel.size(3) != 1) {
    throw ArgumentError("apply_guidance: channel weights must be B x C x 1 x 1, got " + torch::str(channel.sizes()));
  }
  return spatial * contrast * channel;
}

FeatureContrastImpl::FeatureContrastImpl(std::int64_t channels) {
  encoder_proj_ = register_module("encoder_proj", conv1x1(channels, channels, false));
  decoder_proj_ = register_module("decoder_proj", conv1x1(channels, channels, false));
  fuse_ = register_module("fuse", conv1x1(2 * channels, channels, false));
  norm_ = register_module("norm", torch::nn::BatchNorm2d(channels));
}

torch::Tensor FeatureContrastImpl::forward(const torch::Tensor& encoder_level, const torch::Tensor& decoder_level) {
  if (encoder_level.sizes() != decoder_level.sizes()) {
    throw ArgumentError("fcm: encoder and decoder maps differ in shape: " + torch::str(encoder_level.sizes()) + " vs " +
                        torch::str(decoder_level.sizes()));
  }
  const auto joined = torch::cat({encoder_proj_->forward(encoder_level), decoder_proj_->forward(decoder_level)}, 1);
  return torch::relu(norm_->forward(fuse_->forward(joined)));
}

SemanticGuidanceImpl::SemanticGuidanceImpl(std::int64_t channels, std::int64_t deeper_channels)
    : channels_(channels), deeper_channels_(deeper_channels) {
  context_ = register_module(
      "context", torch::nn::Conv2d(torch::nn::Conv2dOptions(deeper_channels, channels, 3).padding(1)));
  spatial_ = register_module("spatial", conv1x1(channels, 1));
  channel_ = register_module("channel", conv1x1(channels, channels));
}

std::pair<torch::Tensor, GuidanceWeights> SemanticGuidanceImpl::forward(const torch::Tensor& current,
                                                                        const torch::Tensor& deeper) {
  if (current.dim() != 4 || deeper.dim() != 4 || current.size(1) != channels_ || deeper.size(1) != deeper_channels_ ||
      deeper.size(0) != current.size(0) || deeper.size(2) * 2 != current.size(2) ||
      deeper.size(3) * 2 != current.size(3)) {
    throw ArgumentError("hsg: level pairing mismatch, current " + torch::str(current.sizes()) + " deeper " +
                        torch::str(deeper.sizes()));
  }
  const auto b = current.size(0);
  GuidanceWeights weights;
  if (unit_weights_) {
    weights.spatial = torch::ones({b, 1, current.size(2), current.size(3)}, current.options());
    weights.channel = torch::ones({b, channels_, 1, 1}, current.options());
  } else {
    const auto context = torch::relu(context_->forward(upsample_to(deeper, current.size(2), current.size(3))));
    weights.spatial = torch::sigmoid(spatial_->forward(context));
    weights.channel = torch::sigmoid(channel_->forward(torch::adaptive_avg_pool2d(context, {1, 1})));
  }
  auto refined = apply_guidance(current, weights.spatial, weights.channel);
  return {std::move(refined), std::move(weights)};
}

PredictionHeadImpl::PredictionHeadImpl(std::int64_t channels) {
  classify_ = register_module("classify", conv1x1(channels, 2));
}

torch::Tensor PredictionHeadImpl::forward(const torch::Tensor& x, std::int64_t height, std::int64_t width) {
  // The 1x1 projection commutes with bilinear upsampling, so reduce channels first.
  return torch::softmax(upsample_to(classify_->forward(x), height, width), 1);
}

AggregationHeadImpl::AggregationHeadImpl(const LevelWidths& widths, std::int64_t hidden) {
  const auto total = widths[0] + widths[1] + widths[2] + widths[3];
  fuse_ = register_module("fuse", ConvBlock(total, hidden, 1));
  classify_ = register_module("classify", conv1x1(hidden, 2));
}

torch::Tensor AggregationHeadImpl::forward(const std::array<torch::Tensor, 4>& levels, std::int64_t height,
                                           std::int64_t width) {
  const auto h = levels[0].size(2);
  const auto w = levels[0].size(3);
  std::vector<torch::Tensor> parts;
  parts.reserve(4);
  for (const auto& level : levels) parts.push_back(upsample_to(level, h, w));
  auto x = fuse_->forward(torch::cat(parts, 1));
  x = upsample_to(x, height, width);
  return torch::softmax(classify_->forward(x), 1);
}

DiscriminativeNetImpl::DiscriminativeNetImpl(DiscriminativeOptions options) : options_(options) {
  const auto& w = options_.widths;
  for (std::size_t i = 0; i < 4; ++i) {
    fcm_[i] = register_module("fcm" + std::to_string(i + 1), FeatureContrast(w[i]));
  }
  if (options_.use_hsg) {
    for (std::size_t i = 0; i < 3; ++i) {
      hsg_[i] = register_module("hsg" + std::to_string(i + 1), SemanticGuidance(w[i], w[i + 1]));
    }
  }
  if (options_.use_mss) {
    for (std::size_t i = 0; i < 4; ++i) {
      mss_[i] = register_module("mss" + std::to_string(i + 1), PredictionHead(w[i]));
    }
  }
  aggregate_ = register_module("aggregate", AggregationHead(w, options_.aggregate_channels));
}

torch::Tensor DiscriminativeNetImpl::fcm(int level, const torch::Tensor& encoder_level,
                                         const torch::Tensor& decoder_level) {
  require_level(level, 1, 4, "fcm");
  return fcm_[static_cast<std::size_t>(level - 1)]->forward(encoder_level, decoder_level);
}

std::pair<torch::Tensor, GuidanceWeights> DiscriminativeNetImpl::hsg_refine(int level, const torch::Tensor& current,
                                                                             const torch::Tensor& deeper) {
  require_level(level, 1, 3, "hsg_refine");
  if (!options_.use_hsg) throw ContractError("hsg_refine: this variant has no guidance modules");
  return hsg_[static_cast<std::size_t>(level - 1)]->forward(current, deeper);
}

ContrastPyramid DiscriminativeNetImpl::contrast(const FeaturePyramid& encoder, const FeaturePyramid& decoder) {
  ContrastPyramid pyramid;
  for (int i = 0; i < 4; ++i) pyramid.contrast[static_cast<std::size_t>(i)] = fcm(i + 1, encoder[i], decoder[i]);
  if (options_.use_hsg) {
    torch::Tensor deeper = pyramid.contrast[3];
    for (int level = 3; level >= 1; --level) {
      const auto idx = static_cast<std::size_t>(level - 1);
      pyramid.refined[idx] = hsg_refine(level, pyramid.contrast[idx], deeper).first;
      deeper = pyramid.refined[idx];
    }
  }
  return pyramid;
}

std::array<torch::Tensor, 4> DiscriminativeNetImpl::mss_forward(const ContrastPyramid& pyramid, std::int64_t height,
                                                                std::int64_t width) {
  if (!options_.use_mss) throw ContractError("mss_forward: this variant has no supervision heads");
  if (!is_training()) throw ContractError("mss_forward: supervision heads are only evaluated in training mode");
  const auto inputs = pyramid.prediction_inputs();
  std::array<torch::Tensor, 4> out;
  for (std::size_t i = 0; i < 4; ++i) out[i] = mss_[i]->forward(inputs[i], height, width);
  return out;
}

torch::Tensor DiscriminativeNetImpl::aggregate_predict(const ContrastPyramid& pyramid, std::int64_t height,
                                                       std::int64_t width) {
  const auto inputs = pyramid.prediction_inputs();
  for (const auto& level : inputs) {
    if (!level.defined()) throw ArgumentError("aggregate_predict: missing pyramid level");
  }
  return aggregate_->forward(inputs, height, width);
}

Discrimination DiscriminativeNetImpl::forward(const FeaturePyramid& encoder, const FeaturePyramid& decoder,
                                              std::int64_t height, std::int64_t width) {
  Discrimination out;
  out.pyramid = contrast(encoder, decoder);
  out.probabilities = aggregate_predict(out.pyramid, height, width);
  out.heatmap = anomaly_channel(out.probabilities);
  if (options_.use_mss && is_training()) {
    const auto heads = mss_forward(out.pyramid, height, width);
    out.side_outputs.assign(heads.begin(), heads.end());
  }
  return out;
}

UNetDiscriminatorImpl::UNetDiscriminatorImpl(std::int64_t in_channels, std::int64_t base_width) {
  const std::array<std::int64_t, 5> widths{base_width, 2 * base_width, 4 * base_width, 8 * base_width,
                                           8 * base_width};
  std::int64_t in = in_channels;
  for (std::size_t i = 0; i < 5; ++i) {
    down_[i] = register_module("down" + std::to_string(i + 1), make_stage(in, widths[i], 1));
    in = widths[i];
  }
  for (std::size_t i = 4; i-- > 0;) {
    up_[i] = register_module("up" + std::to_string(i + 1), ConvBlock(widths[i + 1], widths[i], 1));
    merge_[i] = register_module("merge" + std::to_string(i + 1), make_stage(2 * widths[i], widths[i], 1));
  }
  classify_ = register_module("classify", conv1x1(base_width, 2));
}

torch::Tensor UNetDiscriminatorImpl::forward(const torch::Tensor& x) {
  std::array<torch::Tensor, 5> skips;
  torch::Tensor h = x;
  for (std::size_t i = 0; i < 5; ++i) {
    if (i > 0) h = torch::max_pool2d(h, 2);
    h = down_[i]->forward(h);
    skips[i] = h;
  }
  for (std::size_t i = 4; i-- > 0;) {
    h = up_[i]->forward(upsample_to(h, skips[i].size(2), skips[i].size(3)));
    h = merge_[i]->forward(torch::cat({h, skips[i]}, 1));
  }
  return torch::softmax(classify_->forward(h), 1);
}

}  // namespace pouta

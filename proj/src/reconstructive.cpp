#include "pouta/reconstructive.hpp"

#include <cmath>
#include <string>

#include "pouta/errors.hpp"

namespace pouta {

namespace F = torch::nn::functional;

ConvBlockImpl::ConvBlockImpl(std::int64_t in_channels, std::int64_t out_channels, std::int64_t stride) {
  conv_ = register_module(
      "conv", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, out_channels, 3).stride(stride).padding(1).bias(false)));
  norm_ = register_module("norm", torch::nn::BatchNorm2d(out_channels));
}

torch::Tensor ConvBlockImpl::forward(const torch::Tensor& x) { return torch::relu(norm_->forward(conv_->forward(x))); }

torch::nn::Sequential make_stage(std::int64_t in_channels, std::int64_t out_channels, std::int64_t stride) {
  return torch::nn::Sequential(ConvBlock(in_channels, out_channels, stride), ConvBlock(out_channels, out_channels, 1));
}

torch::Tensor upsample_to(const torch::Tensor& x, std::int64_t height, std::int64_t width) {
  if (x.size(2) == height && x.size(3) == width) return x;
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<std::int64_t>{height, width})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

ReconstructiveNetImpl::ReconstructiveNetImpl(ReconstructiveOptions options) : options_(options) {
  if (options_.image_size <= 0 || options_.image_size % 16 != 0) {
    throw ArgumentError("reconstructive net: image_size must be a positive multiple of 16");
  }
  const auto& w = options_.widths;
  std::int64_t in = options_.in_channels;
  for (std::size_t i = 0; i < 4; ++i) {
    encoder_[i] = register_module("encoder" + std::to_string(i + 1), make_stage(in, w[i], 2));
    in = w[i];
  }
  mapping_ = register_module("mapping", make_stage(w[3], w[3], 1));
  decoder_[3] = register_module("decoder4", make_stage(w[3], w[3], 1));
  for (std::size_t i = 3; i-- > 0;) {
    decoder_[i] = register_module("decoder" + std::to_string(i + 1), make_stage(w[i + 1], w[i], 1));
  }
  output_ = register_module("output", torch::nn::Conv2d(torch::nn::Conv2dOptions(w[0], options_.in_channels, 3).padding(1)));
}

FeaturePyramid ReconstructiveNetImpl::encode(const torch::Tensor& input) {
  const auto size = options_.image_size;
  if (input.dim() != 4 || input.size(1) != options_.in_channels || input.size(2) != size || input.size(3) != size) {
    throw ArgumentError("encode: expected input B x " + std::to_string(options_.in_channels) + " x " +
                        std::to_string(size) + " x " + std::to_string(size) + ", got " + torch::str(input.sizes()) +
                        " (resize images before encoding)");
  }
  FeaturePyramid pyramid;
  torch::Tensor x = input;
  for (std::size_t i = 0; i < 4; ++i) {
    x = encoder_[i]->forward(x);
    pyramid[i] = x;
  }
  return pyramid;
}

torch::Tensor ReconstructiveNetImpl::map_latent(const torch::Tensor& f_e4) {
  const auto side = options_.image_size / 16;
  if (f_e4.dim() != 4 || f_e4.size(1) != options_.widths[3] || f_e4.size(2) != side || f_e4.size(3) != side) {
    throw ArgumentError("map_latent: expected a stride-16 map with " + std::to_string(options_.widths[3]) +
                        " channels, got " + torch::str(f_e4.sizes()));
  }
  return mapping_->forward(f_e4);
}

std::pair<FeaturePyramid, torch::Tensor> ReconstructiveNetImpl::decode(const torch::Tensor& latent) {
  const auto size = options_.image_size;
  if (latent.dim() != 4 || latent.size(1) != options_.widths[3] || latent.size(2) != size / 16 ||
      latent.size(3) != size / 16) {
    throw ArgumentError("decode: expected a stride-16 latent map, got " + torch::str(latent.sizes()));
  }
  FeaturePyramid pyramid;
  torch::Tensor x = decoder_[3]->forward(latent);
  pyramid[3] = x;
  for (std::size_t i = 3; i-- > 0;) {
    const auto side = size / kLevelStrides[i];
    x = decoder_[i]->forward(upsample_to(x, side, side));
    pyramid[i] = x;
  }
  torch::Tensor image = torch::sigmoid(output_->forward(upsample_to(x, size, size)));
  return {std::move(pyramid), std::move(image)};
}

Reconstruction ReconstructiveNetImpl::forward(const torch::Tensor& input) {
  Reconstruction out;
  out.encoder = encode(input);
  out.latent = map_latent(out.encoder[3]);
  auto [decoder, image] = decode(out.latent);
  out.decoder = std::move(decoder);
  out.image = std::move(image);
  return out;
}

torch::Tensor ssim(const torch::Tensor& a, const torch::Tensor& b, const SsimOptions& options) {
  if (a.sizes() != b.sizes() || a.dim() != 4) throw ArgumentError("ssim: expected two B x C x H x W tensors of equal shape");
  const auto channels = a.size(1);
  auto g = torch::arange(options.window, a.options()) - static_cast<double>(options.window / 2);
  g = torch::exp(-(g * g) / (2.0 * options.sigma * options.sigma));
  g = g / g.sum();
  const auto window = torch::outer(g, g).expand({channels, 1, options.window, options.window}).contiguous();
  const auto conv = [&](const torch::Tensor& x) {
    return F::conv2d(x, window, F::Conv2dFuncOptions().padding(options.window / 2).groups(channels));
  };
  const double c1 = std::pow(options.k1 * options.dynamic_range, 2);
  const double c2 = std::pow(options.k2 * options.dynamic_range, 2);

  const auto mu_a = conv(a);
  const auto mu_b = conv(b);
  const auto mu_ab = mu_a * mu_b;
  const auto mu_a2 = mu_a * mu_a;
  const auto mu_b2 = mu_b * mu_b;
  const auto var_a = conv(a * a) - mu_a2;
  const auto var_b = conv(b * b) - mu_b2;
  const auto cov = conv(a * b) - mu_ab;
  const auto map = ((2.0 * mu_ab + c1) * (2.0 * cov + c2)) / ((mu_a2 + mu_b2 + c1) * (var_a + var_b + c2));
  return map.mean();
}

torch::Tensor reconstruction_loss(const torch::Tensor& reconstructed, const torch::Tensor& original) {
  if (reconstructed.sizes() != original.sizes()) {
    throw ArgumentError("reconstruction_loss: shape mismatch " + torch::str(reconstructed.sizes()) + " vs " +
                        torch::str(original.sizes()));
  }
  return F::mse_loss(reconstructed, original) + (1.0 - ssim(reconstructed, original));
}

}  // namespace pouta

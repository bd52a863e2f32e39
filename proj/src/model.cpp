#include "pouta/model.hpp"

#include "pouta/errors.hpp"

namespace pouta {

ModelOptions model_options(const TrainConfig& config) {
  ModelOptions options;
  options.variant = config.variant;
  options.widths = widths_from_base(config.base_width);
  options.image_size = config.image_size;
  options.aggregate_channels = config.aggregate_channels;
  return options;
}

AnomalyModelImpl::AnomalyModelImpl(ModelOptions options) : options_(options) {
  ReconstructiveOptions rec;
  rec.in_channels = options_.in_channels;
  rec.widths = options_.widths;
  rec.image_size = options_.image_size;
  reconstructive_ = register_module("reconstructive", ReconstructiveNet(rec));
  if (options_.variant == Variant::vanilla) {
    unet_ = register_module("unet", UNetDiscriminator(2 * options_.in_channels, options_.widths[0]));
  } else {
    DiscriminativeOptions disc;
    disc.widths = options_.widths;
    disc.use_hsg = uses_guidance(options_.variant);
    disc.use_mss = uses_supervision(options_.variant);
    disc.aggregate_channels = options_.aggregate_channels;
    discriminative_ = register_module("discriminative", DiscriminativeNet(disc));
  }
}

ModelOutput AnomalyModelImpl::forward(const torch::Tensor& input) {
  ModelOutput out;
  out.reconstruction = reconstructive_->forward(input);
  const auto h = input.size(2);
  const auto w = input.size(3);
  if (unet_) {
    out.probabilities = unet_->forward(torch::cat({input, out.reconstruction.image}, 1));
    out.heatmap = anomaly_channel(out.probabilities);
  } else {
    auto d = discriminative_->forward(out.reconstruction.encoder, out.reconstruction.decoder, h, w);
    out.probabilities = std::move(d.probabilities);
    out.heatmap = std::move(d.heatmap);
    out.side_outputs = std::move(d.side_outputs);
  }
  return out;
}

AnomalyModel build_variant(const TrainConfig& config) { return build_variant(model_options(config)); }

AnomalyModel build_variant(const ModelOptions& options) { return AnomalyModel(options); }

std::int64_t parameter_count(const torch::nn::Module& module) {
  std::int64_t total = 0;
  for (const auto& p : module.parameters()) total += p.numel();
  return total;
}

std::int64_t parameter_count(const torch::nn::Module& module, std::string_view prefix) {
  std::int64_t total = 0;
  for (const auto& item : module.named_parameters()) {
    if (std::string_view(item.key()).starts_with(prefix)) total += item.value().numel();
  }
  return total;
}

std::size_t copy_matching_state(const torch::nn::Module& source, torch::nn::Module& target) {
  torch::NoGradGuard no_grad;
  std::size_t copied = 0;
  auto copy = [&](const torch::OrderedDict<std::string, torch::Tensor>& from,
                  torch::OrderedDict<std::string, torch::Tensor> to) {
    for (auto& item : to) {
      const auto* src = from.find(item.key());
      if (src == nullptr || src->sizes() != item.value().sizes()) continue;
      item.value().copy_(*src);
      ++copied;
    }
  };
  copy(source.named_parameters(), target.named_parameters());
  copy(source.named_buffers(), target.named_buffers());
  return copied;
}

}  // namespace pouta

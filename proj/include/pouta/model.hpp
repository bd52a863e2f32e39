#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <torch/torch.h>

#include "pouta/config.hpp"
#include "pouta/discriminative.hpp"
#include "pouta/reconstructive.hpp"
#include "pouta/variant.hpp"

namespace pouta {

struct ModelOptions {
  Variant variant = Variant::full;
  LevelWidths widths{64, 128, 256, 512};
  std::int64_t image_size = 224;
  std::int64_t aggregate_channels = 64;
  std::int64_t in_channels = 3;
};

ModelOptions model_options(const TrainConfig& config);

struct ModelOutput {
  Reconstruction reconstruction;
  torch::Tensor probabilities;  // B x 2 x H x W
  torch::Tensor heatmap;        // B x 1 x H x W
  std::vector<torch::Tensor> side_outputs;
};

// Reconstructive network plus the discriminator selected by the variant.
// Submodule names are shared across variants so that weights of a smaller
// variant are a named subset of a larger one.
class AnomalyModelImpl : public torch::nn::Module {
 public:
  explicit AnomalyModelImpl(ModelOptions options);

  ModelOutput forward(const torch::Tensor& input);

  Variant variant() const { return options_.variant; }
  const ModelOptions& options() const { return options_; }
  ReconstructiveNet reconstructive() const { return reconstructive_; }
  DiscriminativeNet discriminative() const { return discriminative_; }

 private:
  ModelOptions options_;
  ReconstructiveNet reconstructive_{nullptr};
  DiscriminativeNet discriminative_{nullptr};
  UNetDiscriminator unet_{nullptr};
};
TORCH_MODULE(AnomalyModel);

AnomalyModel build_variant(const TrainConfig& config);
AnomalyModel build_variant(const ModelOptions& options);

std::int64_t parameter_count(const torch::nn::Module& module);
// Parameters whose qualified name starts with `prefix`.
std::int64_t parameter_count(const torch::nn::Module& module, std::string_view prefix);

// Copies every parameter and buffer of `source` whose name and shape exist in
// `target`. Returns how many tensors were copied.
std::size_t copy_matching_state(const torch::nn::Module& source, torch::nn::Module& target);

}  // namespace pouta

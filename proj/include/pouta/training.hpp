#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <vector>

#include <torch/torch.h>

#include "pouta/checkpoint.hpp"
#include "pouta/config.hpp"
#include "pouta/image.hpp"
#include "pouta/model.hpp"
#include "pouta/synthesis.hpp"

namespace pouta {

// Piecewise-constant schedule: base_lr times decay_factor for every decay
// epoch already reached.
double lr_at_epoch(int epoch, const TrainConfig& config);

// k distinct indices drawn uniformly from [0, pool_size), returned sorted.
std::vector<std::size_t> few_shot_subset(std::size_t pool_size, std::size_t k, std::uint64_t seed);

template <typename T>
std::vector<T> few_shot_subset(const std::vector<T>& pool, std::size_t k, std::uint64_t seed) {
  std::vector<T> out;
  for (std::size_t i : few_shot_subset(pool.size(), k, seed)) out.push_back(pool[i]);
  return out;
}

// One training batch in network layout.
struct Batch {
  torch::Tensor input;     // B x 3 x H x W, I_in
  torch::Tensor original;  // B x 3 x H x W, I_ori
  torch::Tensor mask;      // B x 1 x H x W in {0, 1}
};

torch::Tensor image_to_tensor(const Image& image);           // 3 x H x W
torch::Tensor mask_to_tensor(const Mask& mask);              // 1 x H x W
ScalarField tensor_to_field(const torch::Tensor& map);       // H x W or 1 x H x W
Batch collate(const std::vector<SyntheticSample>& samples);

struct LossBreakdown {
  torch::Tensor total;
  torch::Tensor reconstruction;
  torch::Tensor prediction;
  torch::Tensor supervision;  // zero for variants without side heads; mss_loss is not evaluated then
};

LossBreakdown compute_losses(const ModelOutput& output, const Batch& batch, const LossWeights& weights,
                             bool supervised);

struct StepRecord {
  int epoch = 0;
  int step = 0;
  double lr = 0.0;
  double total = 0.0;
  double reconstruction = 0.0;
  double prediction = 0.0;
  double supervision = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<StepRecord> steps;
  double final_loss = 0.0;
  std::uint64_t mss_evaluations = 0;
};

struct TrainOptions {
  std::ostream* log = nullptr;
  // Written atomically at the end when non-empty, with a sibling <name>.loss.csv.
  std::filesystem::path checkpoint_path;
  // Upper bound on synthesis threads; 0 reads POUTA_NUM_WORKERS (default 1).
  int workers = 0;
};

// Joint single-stage training of the full graph on synthetic anomalies.
TrainResult train(const TrainConfig& config, const std::vector<Image>& images, const std::vector<Image>& textures,
                  const TrainOptions& options = {});

// Loads <root>/<category>/train/good and the texture directory, then trains.
TrainResult train(const TrainConfig& config, const std::filesystem::path& dataset_root, const std::string& category,
                  const std::filesystem::path& texture_root, const TrainOptions& options = {});

int worker_count(int requested);

}  // namespace pouta

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pouta/objectives.hpp"
#include "pouta/synthesis.hpp"
#include "pouta/variant.hpp"

namespace pouta {

struct TrainConfig {
  int epochs = 600;
  int batch_size = 8;
  double base_lr = 2e-4;
  std::vector<int> lr_decay_epochs{480, 540};
  double lr_decay_factor = 0.2;
  int image_size = 224;
  Variant variant = Variant::full;
  std::optional<int> k_shot;
  // When > 0 and k_shot is set, replaces `epochs` and rescales the decay points.
  int few_shot_epochs = 0;
  // Stops after this many optimizer steps when > 0.
  int max_steps = 0;
  std::uint64_t seed = 0;
  LossWeights loss;

  int base_width = 64;
  int aggregate_channels = 64;

  SynthesisConfig synthesis;
  std::string texture_dir;

  void validate() const;
};

// Flat "section.key" -> value view; the on-disk format is INI with sections.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap to_map(const TrainConfig& config);
// Unknown keys are rejected; missing keys keep their defaults.
void apply_overrides(TrainConfig& config, const ConfigMap& values);
TrainConfig config_from_map(const ConfigMap& values);

std::string to_ini(const TrainConfig& config);
TrainConfig parse_ini(const std::string& text);
ConfigMap read_ini_map(const std::filesystem::path& path);
TrainConfig load_config(const std::filesystem::path& path);

// Effective schedule after few-shot adjustments.
TrainConfig effective_schedule(const TrainConfig& config);

}  // namespace pouta

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pouta/image.hpp"
#include "pouta/synthesis.hpp"

namespace pouta {

// Procedural stand-in for a real inspection dataset: one texture family of
// striped or checkered images, a pool of unrelated textures, and a test split
// whose anomalies come from the synthesizer.
enum class ToyPattern { stripes, checker };

struct ToyFixtureOptions {
  std::string category = "toy";
  ToyPattern pattern = ToyPattern::stripes;
  int size = 64;
  int train_count = 32;
  int test_normal = 8;
  int test_anomalous = 8;
  int texture_count = 16;
  std::uint64_t seed = 0;
  // Test anomalies use a visibly blended opacity and a minimum area.
  double test_opacity_max = 0.5;
  double test_min_fraction = 0.02;
};

Image toy_pattern(int size, ToyPattern pattern, std::uint64_t seed);
Image toy_texture(int size, std::uint64_t seed);

struct ToyFixture {
  std::filesystem::path dataset_root;  // contains <category>/...
  std::filesystem::path texture_dir;
  std::string category;
};

// Writes <root>/data/<category>/{train/good,test/good,test/synthetic,ground_truth/synthetic}
// and <root>/textures.
ToyFixture write_toy_fixture(const std::filesystem::path& root, const ToyFixtureOptions& options = {});

}  // namespace pouta

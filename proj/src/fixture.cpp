#include "pouta/fixture.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "pouta/errors.hpp"
#include "pouta/io.hpp"
#include "pouta/random.hpp"

namespace pouta {

Image toy_pattern(int size, ToyPattern pattern, std::uint64_t seed) {
  Rng rng(seed);
  const double period = rng.uniform(7.0, 9.0);
  const double angle = rng.uniform(-0.15, 0.15);
  const double phase_x = rng.uniform(0.0, period);
  const double phase_y = rng.uniform(0.0, period);
  const double shade = rng.uniform(-0.04, 0.04);
  const std::array<float, 3> dark{0.20f, 0.25f, 0.35f};
  const std::array<float, 3> light{0.80f, 0.75f, 0.60f};
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Image image(size, size, 3);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double u = c * x - s * y + phase_x;
      const double v = s * x + c * y + phase_y;
      double t = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * v / period);
      if (pattern == ToyPattern::checker) {
        const bool odd = (static_cast<long>(std::floor(u / period)) + static_cast<long>(std::floor(v / period))) % 2 != 0;
        t = odd ? 1.0 : 0.0;
      }
      const double noise = rng.uniform(-0.03, 0.03);
      for (int ch = 0; ch < 3; ++ch) {
        const double value = dark[ch] + t * (light[ch] - dark[ch]) + shade + noise;
        image.at(y, x, ch) = static_cast<float>(std::clamp(value, 0.0, 1.0));
      }
    }
  }
  return image;
}

Image toy_texture(int size, std::uint64_t seed) {
  Rng rng(seed);
  Image image(size, size, 3);
  for (int ch = 0; ch < 3; ++ch) {
    const ScalarField noise = perlin_noise(size, size, FrequencyRange{1, 4}, rng.next());
    const double offset = rng.uniform(0.2, 0.8);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        image.at(y, x, ch) = static_cast<float>(std::clamp(offset + 0.6 * noise.at(y, x), 0.0, 1.0));
      }
    }
  }
  return image;
}

ToyFixture write_toy_fixture(const std::filesystem::path& root, const ToyFixtureOptions& o) {
  if (o.size < 16 || o.size % 16 != 0) throw ArgumentError("toy fixture: size must be a multiple of 16");
  if (o.train_count < 1 || o.test_normal < 1 || o.test_anomalous < 1) {
    throw ArgumentError("toy fixture: every split needs at least one image");
  }
  ToyFixture fx;
  fx.dataset_root = root / "data";
  fx.texture_dir = root / "textures";
  fx.category = o.category;
  const auto base = fx.dataset_root / o.category;

  std::vector<Image> textures;
  for (int i = 0; i < o.texture_count; ++i) {
    textures.push_back(toy_texture(o.size, hash_combine(o.seed, 0x7465787475726500ULL + static_cast<std::uint64_t>(i))));
    write_image(fx.texture_dir / fmt::format("texture_{:03d}.png", i), textures.back());
  }

  std::uint64_t stream = 0;
  auto next_pattern = [&] { return toy_pattern(o.size, o.pattern, hash_combine(o.seed, stream++)); };
  for (int i = 0; i < o.train_count; ++i) write_image(base / "train" / "good" / fmt::format("{:03d}.png", i), next_pattern());
  for (int i = 0; i < o.test_normal; ++i) write_image(base / "test" / "good" / fmt::format("{:03d}.png", i), next_pattern());

  SynthesisConfig cfg;
  cfg.normal_fraction = 0.0;
  cfg.opacity_max = o.test_opacity_max;
  const AnomalySynthesizer synth(cfg, textures);
  for (int i = 0; i < o.test_anomalous; ++i) {
    const Image original = next_pattern();
    SyntheticSample sample;
    for (std::uint64_t attempt = 0; attempt < 256; ++attempt) {
      sample = synth.sample_anomalous(original, hash_combine(o.seed ^ 0x616e6f6dULL, (static_cast<std::uint64_t>(i) << 16) + attempt));
      if (sample.is_anomalous && sample.mask.foreground_fraction() >= o.test_min_fraction) break;
    }
    if (!sample.is_anomalous) throw std::runtime_error("toy fixture: could not draw an anomaly mask");
    write_image(base / "test" / "synthetic" / fmt::format("{:03d}.png", i), sample.input);
    write_mask(base / "ground_truth" / "synthetic" / fmt::format("{:03d}_mask.png", i), sample.mask);
  }
  return fx;
}

}  // namespace pouta

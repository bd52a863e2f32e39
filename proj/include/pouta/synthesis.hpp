#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pouta/image.hpp"

namespace pouta {

// Inclusive range of octave exponents k; the lattice frequency per axis is 2^k.
struct FrequencyRange {
  int min_exponent = 0;
  int max_exponent = 5;
};

// Smooth 2-D gradient noise over an H x W grid. Per-axis frequencies are drawn
// from `range` and the field is rotated by a random angle, all from `seed`.
ScalarField perlin_noise(int height, int width, FrequencyRange range, std::uint64_t seed);

// Thresholded Perlin noise. May come back empty; callers that need a
// foreground resample with a different seed.
Mask generate_perlin_mask(int height, int width, FrequencyRange range, double threshold,
                          std::uint64_t seed);

enum class Transform { identity, translation, rotation };

std::string to_string(Transform transform);
Transform parse_transform(const std::string& name);

// Geometric transform of the source image. Translation is a cyclic shift,
// rotation is about the centre with reflected borders.
Image apply_transform(const Image& image, Transform transform, std::uint64_t seed);

// mix * T(original) + (1 - mix) * texture, clamped to [0, 1]. The texture is
// resized to the original's dimensions first.
Image build_augmented_texture(const Image& original, const Image& texture, Transform transform,
                              double mix, std::uint64_t seed);

// (1 - M) * original + M * (opacity * original + (1 - opacity) * augmented).
// Pixels outside the mask are copied from the original bit for bit.
Image synthesize_anomaly(const Image& original, const Image& augmented, const Mask& mask,
                         double opacity);

struct SyntheticSample {
  Image original;
  Image input;
  Mask mask;
  bool is_anomalous = false;
  double opacity = 1.0;
  std::uint64_t seed = 0;
};

struct SynthesisConfig {
  FrequencyRange frequency{0, 5};
  double threshold = 0.5;
  double opacity_min = 0.15;
  double opacity_max = 1.0;
  double mix_min = 0.0;
  double mix_max = 0.5;
  // Share of samples emitted with an empty mask (the negative class).
  double normal_fraction = 0.5;
  int mask_attempts = 8;
  std::vector<Transform> transforms{Transform::identity, Transform::translation,
                                    Transform::rotation};

  void validate() const;
};

// Draws self-supervised (original, input, mask) triples. Stateless apart from
// the texture pool, so one instance may be shared across threads.
class AnomalySynthesizer {
 public:
  explicit AnomalySynthesizer(SynthesisConfig config, std::vector<Image> textures = {});

  SyntheticSample sample(const Image& original, std::uint64_t seed) const;
  // Always produces a non-empty mask unless every attempt came back empty,
  // in which case the sample is reported as normal.
  SyntheticSample sample_anomalous(const Image& original, std::uint64_t seed) const;

  const SynthesisConfig& config() const { return config_; }
  std::size_t texture_count() const { return textures_.size(); }

 private:
  SynthesisConfig config_;
  std::vector<Image> textures_;
};

}  // namespace pouta

#include "pouta/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <opencv2/imgproc.hpp>

#include "pouta/errors.hpp"
#include "pouta/random.hpp"

namespace pouta {
namespace {

constexpr double kPi = std::numbers::pi;

double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

// Unit gradient at an integer lattice point; hashing makes the lattice unbounded,
// which rotated sampling needs.
struct Gradient {
  double gx;
  double gy;
};

Gradient lattice_gradient(std::uint64_t grid_seed, std::int64_t ix, std::int64_t iy) {
  const auto key = hash_combine(hash_combine(grid_seed, static_cast<std::uint64_t>(ix)),
                                static_cast<std::uint64_t>(iy));
  const double angle = 2.0 * kPi * static_cast<double>(key >> 11) * 0x1.0p-53;
  return {std::cos(angle), std::sin(angle)};
}

double gradient_noise(std::uint64_t grid_seed, double x, double y) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const auto ix = static_cast<std::int64_t>(fx);
  const auto iy = static_cast<std::int64_t>(fy);
  const double dx = x - fx;
  const double dy = y - fy;
  auto dot = [&](std::int64_t ox, std::int64_t oy) {
    const Gradient g = lattice_gradient(grid_seed, ix + ox, iy + oy);
    return g.gx * (dx - static_cast<double>(ox)) + g.gy * (dy - static_cast<double>(oy));
  };
  const double u = fade(dx);
  const double v = fade(dy);
  const double top = std::lerp(dot(0, 0), dot(1, 0), u);
  const double bottom = std::lerp(dot(0, 1), dot(1, 1), u);
  return std::numbers::sqrt2 * std::lerp(top, bottom, v);
}

void require_same_size(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b)) throw ArgumentError(std::string(what) + ": image shapes differ");
}

}  // namespace

ScalarField perlin_noise(int height, int width, FrequencyRange range, std::uint64_t seed) {
  if (height < 16 || width < 16) throw ArgumentError("perlin_noise: height and width must be >= 16");
  if (range.min_exponent < 0 || range.max_exponent > 6 || range.min_exponent > range.max_exponent) {
    throw ArgumentError("perlin_noise: frequency exponents must satisfy 0 <= min <= max <= 6");
  }
  Rng rng(seed);
  const double res_y = std::ldexp(1.0, static_cast<int>(rng.uniform_int(range.min_exponent, range.max_exponent)));
  const double res_x = std::ldexp(1.0, static_cast<int>(rng.uniform_int(range.min_exponent, range.max_exponent)));
  const double angle = rng.uniform(-0.5 * kPi, 0.5 * kPi);
  const std::uint64_t grid_seed = rng.next();

  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const double cy = 0.5 * height;
  const double cx = 0.5 * width;
  ScalarField field(height, width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double u = x + 0.5 - cx;
      const double v = y + 0.5 - cy;
      const double rx = c * u - s * v + cx;
      const double ry = s * u + c * v + cy;
      field.at(y, x) = static_cast<float>(gradient_noise(grid_seed, rx / width * res_x, ry / height * res_y));
    }
  }
  return field;
}

Mask generate_perlin_mask(int height, int width, FrequencyRange range, double threshold,
                          std::uint64_t seed) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ArgumentError("generate_perlin_mask: threshold must lie in (0, 1)");
  const ScalarField noise = perlin_noise(height, width, range, seed);
  Mask mask(height, width);
  for (std::size_t i = 0; i < noise.data.size(); ++i) mask.data[i] = noise.data[i] > threshold ? 1 : 0;
  return mask;
}

std::string to_string(Transform transform) {
  switch (transform) {
    case Transform::identity: return "identity";
    case Transform::translation: return "translation";
    case Transform::rotation: return "rotation";
  }
  return "identity";
}

Transform parse_transform(const std::string& name) {
  if (name == "identity") return Transform::identity;
  if (name == "translation") return Transform::translation;
  if (name == "rotation") return Transform::rotation;
  throw ArgumentError("unknown transform '" + name + "' (expected identity, translation or rotation)");
}

Image apply_transform(const Image& image, Transform transform, std::uint64_t seed) {
  Rng rng(seed);
  switch (transform) {
    case Transform::identity:
      return image;
    case Transform::translation: {
      const auto dy = static_cast<int>(rng.uniform_int(image.height / 4, (3 * image.height) / 4));
      const auto dx = static_cast<int>(rng.uniform_int(image.width / 4, (3 * image.width) / 4));
      Image out(image.height, image.width, image.channels);
      for (int y = 0; y < image.height; ++y) {
        const int sy = (y + dy) % image.height;
        for (int x = 0; x < image.width; ++x) {
          const int sx = (x + dx) % image.width;
          for (int c = 0; c < image.channels; ++c) out.at(y, x, c) = image.at(sy, sx, c);
        }
      }
      return out;
    }
    case Transform::rotation: {
      const double degrees = rng.uniform(-90.0, 90.0);
      cv::Mat src(image.height, image.width, CV_32FC(image.channels), const_cast<float*>(image.data.data()));
      const cv::Mat rot = cv::getRotationMatrix2D(cv::Point2f(0.5f * image.width, 0.5f * image.height), degrees, 1.0);
      Image out(image.height, image.width, image.channels);
      cv::Mat dst(image.height, image.width, CV_32FC(image.channels), out.data.data());
      cv::warpAffine(src, dst, rot, dst.size(), cv::INTER_LINEAR, cv::BORDER_REFLECT_101);
      for (float& v : out.data) v = std::clamp(v, 0.0f, 1.0f);
      return out;
    }
  }
  return image;
}

Image build_augmented_texture(const Image& original, const Image& texture, Transform transform,
                              double mix, std::uint64_t seed) {
  if (!(mix >= 0.0 && mix <= 1.0)) throw ArgumentError("build_augmented_texture: mix must lie in [0, 1]");
  Image tex = texture;
  if (tex.channels != original.channels) tex = to_rgb(tex);
  tex = resize(tex, original.height, original.width);
  if (!tex.same_shape(original)) throw std::logic_error("build_augmented_texture: texture shape mismatch after resize");

  const Image moved = apply_transform(original, transform, seed);
  const auto m = static_cast<float>(mix);
  Image out(original.height, original.width, original.channels);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = std::clamp(m * moved.data[i] + (1.0f - m) * tex.data[i], 0.0f, 1.0f);
  }
  return out;
}

Image synthesize_anomaly(const Image& original, const Image& augmented, const Mask& mask, double opacity) {
  require_same_size(original, augmented, "synthesize_anomaly");
  if (mask.height != original.height || mask.width != original.width) {
    throw ArgumentError("synthesize_anomaly: mask size differs from image size");
  }
  if (!(opacity >= 0.0 && opacity <= 1.0)) throw ArgumentError("synthesize_anomaly: opacity must lie in [0, 1]");

  const auto beta = static_cast<float>(opacity);
  Image out = original;
  const int channels = original.channels;
  for (std::size_t p = 0; p < original.pixel_count(); ++p) {
    if (mask.data[p] == 0) continue;
    const float m = 1.0f;
    for (int c = 0; c < channels; ++c) {
      const std::size_t i = p * channels + c;
      const float o = original.data[i];
      const float a = augmented.data[i];
      out.data[i] = std::clamp((1.0f - m) * o + m * (beta * o + (1.0f - beta) * a), 0.0f, 1.0f);
    }
  }
  return out;
}

void SynthesisConfig::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ArgumentError("synthesis.threshold must lie in (0, 1)");
  if (!(opacity_min >= 0.0 && opacity_min <= opacity_max && opacity_max <= 1.0)) {
    throw ArgumentError("synthesis opacity range must satisfy 0 <= min <= max <= 1");
  }
  if (!(mix_min >= 0.0 && mix_min <= mix_max && mix_max <= 1.0)) {
    throw ArgumentError("synthesis mix range must satisfy 0 <= min <= max <= 1");
  }
  if (!(normal_fraction >= 0.0 && normal_fraction <= 1.0)) {
    throw ArgumentError("synthesis.normal_fraction must lie in [0, 1]");
  }
  if (mask_attempts < 1) throw ArgumentError("synthesis.mask_attempts must be >= 1");
  if (transforms.empty()) throw ArgumentError("synthesis.transforms must not be empty");
  if (frequency.min_exponent < 0 || frequency.max_exponent > 6 || frequency.min_exponent > frequency.max_exponent) {
    throw ArgumentError("synthesis frequency exponents must satisfy 0 <= min <= max <= 6");
  }
}

AnomalySynthesizer::AnomalySynthesizer(SynthesisConfig config, std::vector<Image> textures)
    : config_(std::move(config)), textures_(std::move(textures)) {
  config_.validate();
}

SyntheticSample AnomalySynthesizer::sample(const Image& original, std::uint64_t seed) const {
  Rng rng(hash_combine(seed, 0x6e6f726d));
  if (rng.uniform() < config_.normal_fraction) {
    SyntheticSample s;
    s.original = original;
    s.input = original;
    s.mask = Mask(original.height, original.width);
    s.is_anomalous = false;
    s.opacity = 1.0;
    s.seed = seed;
    return s;
  }
  return sample_anomalous(original, seed);
}

SyntheticSample AnomalySynthesizer::sample_anomalous(const Image& original, std::uint64_t seed) const {
  Rng rng(seed);
  SyntheticSample s;
  s.original = original;
  s.seed = seed;

  for (int attempt = 0; attempt < config_.mask_attempts; ++attempt) {
    s.mask = generate_perlin_mask(original.height, original.width, config_.frequency, config_.threshold, rng.next());
    if (!s.mask.empty_foreground()) break;
  }
  if (s.mask.empty_foreground()) {
    s.input = original;
    s.is_anomalous = false;
    s.opacity = 1.0;
    return s;
  }

  Image augmented;
  if (textures_.empty()) {
    // Without a texture pool the anomaly is a displaced copy of the image itself,
    // so identity is skipped when anything else is allowed.
    std::vector<Transform> moving;
    for (Transform t : config_.transforms) {
      if (t != Transform::identity) moving.push_back(t);
    }
    const auto& pool = moving.empty() ? config_.transforms : moving;
    const Transform t = pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))];
    augmented = apply_transform(original, t, rng.next());
  } else {
    const auto& texture = textures_[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(textures_.size()) - 1))];
    const Transform t = config_.transforms[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(config_.transforms.size()) - 1))];
    const double mix = rng.uniform(config_.mix_min, config_.mix_max);
    augmented = build_augmented_texture(original, texture, t, mix, rng.next());
  }

  s.opacity = rng.uniform(config_.opacity_min, config_.opacity_max);
  s.input = synthesize_anomaly(original, augmented, s.mask, s.opacity);
  s.is_anomalous = true;
  return s;
}

}  // namespace pouta

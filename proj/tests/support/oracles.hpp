#pragma once

// Reference implementations used as test oracles. Deliberately naive: plain
// loops, no shared code with the library routines they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include <torch/torch.h>

#include "pouta/image.hpp"
#include "pouta/random.hpp"

namespace oracle {

inline float blend(float original, float augmented, float mask, float beta) {
  const float v = (1.0f - mask) * original + mask * (beta * original + (1.0f - beta) * augmented);
  return std::clamp(v, 0.0f, 1.0f);
}

// contrast: B x C x H x W, spatial: B x 1 x H x W, channel: B x C x 1 x 1.
inline torch::Tensor guidance_product(const torch::Tensor& contrast, const torch::Tensor& spatial,
                                      const torch::Tensor& channel) {
  const auto f = contrast.to(torch::kDouble).contiguous();
  const auto s = spatial.to(torch::kDouble).contiguous();
  const auto c = channel.to(torch::kDouble).contiguous();
  auto out = torch::empty_like(f);
  auto fa = f.accessor<double, 4>();
  auto sa = s.accessor<double, 4>();
  auto ca = c.accessor<double, 4>();
  auto oa = out.accessor<double, 4>();
  for (int64_t b = 0; b < f.size(0); ++b)
    for (int64_t k = 0; k < f.size(1); ++k)
      for (int64_t y = 0; y < f.size(2); ++y)
        for (int64_t x = 0; x < f.size(3); ++x) oa[b][k][y][x] = sa[b][0][y][x] * fa[b][k][y][x] * ca[b][k][0][0];
  return out;
}

// Max over every window position of the zero-padded 21 x 21 mean.
inline double pooled_max(const pouta::ScalarField& field, int kernel = 21) {
  const int r = kernel / 2;
  double best = -1e300;
  for (int cy = 0; cy < field.height; ++cy) {
    for (int cx = 0; cx < field.width; ++cx) {
      double sum = 0.0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const int y = cy + dy;
          const int x = cx + dx;
          if (y < 0 || x < 0 || y >= field.height || x >= field.width) continue;
          sum += field.at(y, x);
        }
      }
      best = std::max(best, sum / (static_cast<double>(kernel) * kernel));
    }
  }
  return best;
}

// P(pos > neg) + 0.5 P(pos == neg) over all pairs.
inline double pairwise_auroc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

// Walks the precision/recall curve cutoff by cutoff, recounting from scratch.
inline double pr_curve_ap(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  double total_pos = 0.0;
  for (auto l : labels) total_pos += l;
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t k = 1; k <= order.size(); ++k) {
    double tp = 0.0;
    for (std::size_t i = 0; i < k; ++i) tp += labels[order[i]];
    const double recall = tp / total_pos;
    const double precision = tp / static_cast<double>(k);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  bool all_analytic_zero = true;
};

// Compares analytic gradients of `loss` against central differences on up to
// `per_tensor` randomly chosen coordinates of each tensor. The error of a
// tensor is ||g_a - g_fd|| / max(||g_a||, ||g_fd||) over its sampled
// coordinates; the result keeps the worst tensor.
inline GradCheckResult gradcheck(const std::function<torch::Tensor()>& loss, std::vector<torch::Tensor> tensors,
                                 std::size_t per_tensor, std::uint64_t seed, double eps = 1e-6) {
  for (auto& t : tensors) {
    if (t.grad().defined()) t.mutable_grad().zero_();
  }
  loss().backward();
  pouta::Rng rng(seed);
  GradCheckResult result;
  torch::NoGradGuard no_grad;
  for (auto& t : tensors) {
    auto flat = t.view({-1});
    auto grad = t.grad().reshape({-1});
    const auto n = static_cast<std::size_t>(flat.numel());
    std::vector<std::int64_t> picks;
    if (n <= per_tensor) {
      picks.resize(n);
      std::iota(picks.begin(), picks.end(), 0);
    } else {
      for (std::size_t i = 0; i < per_tensor; ++i) picks.push_back(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
    }
    double diff_sq = 0.0, a_sq = 0.0, f_sq = 0.0;
    for (auto idx : picks) {
      const double original = flat[idx].item<double>();
      flat[idx] = original + eps;
      const double up = loss().item<double>();
      flat[idx] = original - eps;
      const double down = loss().item<double>();
      flat[idx] = original;
      const double fd = (up - down) / (2.0 * eps);
      const double an = grad[idx].item<double>();
      diff_sq += (an - fd) * (an - fd);
      a_sq += an * an;
      f_sq += fd * fd;
      if (an != 0.0) result.all_analytic_zero = false;
    }
    result.coordinates += picks.size();
    const double scale = std::sqrt(std::max(a_sq, f_sq));
    if (scale > 0.0) result.max_relative_error = std::max(result.max_relative_error, std::sqrt(diff_sq) / scale);
  }
  return result;
}

}  // namespace oracle

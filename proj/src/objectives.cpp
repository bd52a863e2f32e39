#include "pouta/objectives.hpp"

#include <atomic>
#include <string>

#include "pouta/errors.hpp"

namespace pouta {
namespace {

std::atomic<std::uint64_t> g_mss_evaluations{0};

void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* op) {
  if (a.sizes() != b.sizes()) {
    throw ArgumentError(std::string(op) + ": shape mismatch " + torch::str(a.sizes()) + " vs " + torch::str(b.sizes()));
  }
}

}  // namespace

void LossWeights::validate() const {
  for (double l : lambda) {
    if (!(l >= 0.0)) throw ArgumentError("loss weights: every lambda must be >= 0");
  }
  if (!(focal_gamma >= 0.0)) throw ArgumentError("loss weights: focal_gamma must be >= 0");
  if (!(focal_alpha >= 0.0)) throw ArgumentError("loss weights: focal_alpha must be >= 0");
}

torch::Tensor focal_loss(const torch::Tensor& prediction, const torch::Tensor& target, double gamma, double alpha) {
  require_same_shape(prediction, target, "focal_loss");
  if (!torch::isfinite(prediction).all().item<bool>() || !torch::isfinite(target).all().item<bool>()) {
    throw NumericError("focal_loss: prediction or target contains NaN/Inf");
  }
  const auto p = prediction.clamp(kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
  const auto positive = target > 0.5;
  const auto p_t = torch::where(positive, p, 1.0 - p);
  return (-alpha * torch::pow(1.0 - p_t, gamma) * torch::log(p_t)).mean();
}

torch::Tensor l1_term(const torch::Tensor& prediction, const torch::Tensor& target) {
  require_same_shape(prediction, target, "l1_term");
  return (prediction - target).abs().mean();
}

torch::Tensor semantic_supervision_loss(const torch::Tensor& prediction, const torch::Tensor& target,
                                        const LossWeights& weights) {
  return focal_loss(prediction, target, weights.focal_gamma, weights.focal_alpha) + l1_term(prediction, target);
}

torch::Tensor mss_loss(const std::array<torch::Tensor, 4>& terms, const LossWeights& weights) {
  g_mss_evaluations.fetch_add(1, std::memory_order_relaxed);
  torch::Tensor sum = terms[0] * weights.lambda[0];
  for (std::size_t i = 1; i < 4; ++i) sum = sum + terms[i] * weights.lambda[i];
  return sum;
}

torch::Tensor total_loss(const torch::Tensor& reconstruction, const torch::Tensor& prediction,
                         const torch::Tensor& supervision) {
  return reconstruction + prediction + supervision;
}

std::uint64_t mss_loss_evaluations() { return g_mss_evaluations.load(std::memory_order_relaxed); }

}  // namespace pouta

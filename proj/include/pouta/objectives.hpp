#pragma once

#include <array>
#include <cstdint>

#include <torch/torch.h>

namespace pouta {

struct LossWeights {
  // lambda[0] weights the finest supervision head.
  std::array<double, 4> lambda{0.4, 0.3, 0.2, 0.1};
  double focal_gamma = 2.0;
  double focal_alpha = 1.0;

  void validate() const;
};

inline constexpr double kProbabilityEpsilon = 1e-7;

// Mean over all elements of -alpha * (1 - p_t)^gamma * log(p_t), where p_t is
// the anomaly probability on foreground pixels and its complement elsewhere.
// Probabilities are clamped to [eps, 1 - eps].
torch::Tensor focal_loss(const torch::Tensor& prediction, const torch::Tensor& target, double gamma = 2.0,
                         double alpha = 1.0);

// Mean absolute difference.
torch::Tensor l1_term(const torch::Tensor& prediction, const torch::Tensor& target);

// focal + L1 on one anomaly map. Also serves as the loss of the final prediction.
torch::Tensor semantic_supervision_loss(const torch::Tensor& prediction, const torch::Tensor& target,
                                        const LossWeights& weights = {});

// sum_i lambda_i * terms_i.
torch::Tensor mss_loss(const std::array<torch::Tensor, 4>& terms, const LossWeights& weights);

torch::Tensor total_loss(const torch::Tensor& reconstruction, const torch::Tensor& prediction,
                         const torch::Tensor& supervision);

// Number of mss_loss evaluations in this process; lets tests assert which
// graphs never touch the supervision term.
std::uint64_t mss_loss_evaluations();

}  // namespace pouta

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "pouta/checkpoint.hpp"
#include "pouta/image.hpp"
#include "pouta/io.hpp"
#include "pouta/metrics.hpp"
#include "pouta/model.hpp"

namespace pouta {

struct ScoreReport {
  double image_score = 0.0;
  ScalarField heatmap;
  std::string source_path;
  double latency_ms = 0.0;
};

// Eval-mode model restored from a checkpoint. Scoring never mutates the
// network, so one detector may serve concurrent callers.
class Detector {
 public:
  explicit Detector(const Checkpoint& checkpoint);
  explicit Detector(AnomalyModel model);

  // Image is resized to the training resolution first.
  ScoreReport score(const Image& image) const;
  // Heatmaps for a B x 3 x S x S batch; B x S x S.
  torch::Tensor heatmaps(const torch::Tensor& batch) const;

  Variant variant() const { return model_->variant(); }
  int image_size() const { return static_cast<int>(model_->options().image_size); }
  const AnomalyModel& model() const { return model_; }

 private:
  AnomalyModel model_;
};

ScoreReport infer(const Detector& detector, const std::filesystem::path& image_path);

struct InferenceArtifacts {
  std::filesystem::path heatmap;
  std::filesystem::path overlay;
  std::filesystem::path json;
};

// Writes <stem>_heatmap.png, <stem>_heatmap_overlay.png and <stem>.json into out_dir.
InferenceArtifacts write_inference(const ScoreReport& report, const Image& original, Variant variant,
                                   const std::filesystem::path& out_dir);
std::string score_json(const ScoreReport& report, const std::filesystem::path& heatmap_path, Variant variant);

// Scores every test image (in canonical path order), then computes image
// AUROC over S and pixel AUROC / AP over all heatmap pixels.
MetricsReport evaluate_category(const Detector& detector, const DatasetIndex& index);

// Repeated single-image inference after warm-up runs.
LatencyStats benchmark(const Detector& detector, const Image& image, int iterations, int warmup = 10);

}  // namespace pouta

#include "pouta/inference.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>

#include <json.hpp>

#include "pouta/errors.hpp"
#include "pouta/training.hpp"

namespace pouta {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

}  // namespace

Detector::Detector(const Checkpoint& checkpoint) : model_(restore_model(checkpoint)) {}

Detector::Detector(AnomalyModel model) : model_(std::move(model)) { model_->eval(); }

torch::Tensor Detector::heatmaps(const torch::Tensor& batch) const {
  torch::NoGradGuard no_grad;
  AnomalyModel model = model_;
  return model->forward(batch).heatmap.squeeze(1);
}

ScoreReport Detector::score(const Image& image) const {
  const Image input = resize(to_rgb(image), image_size(), image_size());
  const auto start = Clock::now();
  const auto map = heatmaps(image_to_tensor(input).unsqueeze(0));
  ScoreReport report;
  report.heatmap = tensor_to_field(map);
  report.image_score = image_score(report.heatmap);
  report.latency_ms = elapsed_ms(start);
  return report;
}

ScoreReport infer(const Detector& detector, const std::filesystem::path& image_path) {
  const Image image = read_image(image_path);
  ScoreReport report = detector.score(image);
  report.source_path = image_path.string();
  return report;
}

std::string score_json(const ScoreReport& report, const std::filesystem::path& heatmap_path, Variant variant) {
  nlohmann::json j;
  j["image_score"] = report.image_score;
  j["heatmap_path"] = heatmap_path.string();
  j["variant"] = to_string(variant);
  j["latency_ms"] = report.latency_ms;
  j["source_path"] = report.source_path;
  return j.dump(2);
}

InferenceArtifacts write_inference(const ScoreReport& report, const Image& original, Variant variant,
                                   const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  const std::string stem =
      report.source_path.empty() ? std::string("image") : std::filesystem::path(report.source_path).stem().string();
  InferenceArtifacts out;
  out.heatmap = out_dir / (stem + "_heatmap.png");
  out.overlay = render_heatmap(report.heatmap, original, out.heatmap);
  out.json = out_dir / (stem + ".json");
  std::ofstream json(out.json);
  if (!json) throw IoError("cannot write " + out.json.string());
  json << score_json(report, out.heatmap, variant) << "\n";
  return out;
}

MetricsReport evaluate_category(const Detector& detector, const DatasetIndex& index) {
  if (index.test.empty()) throw IoError("evaluate_category: test split of '" + index.category + "' is empty");
  std::vector<DatasetEntry> entries = index.test;
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.image < b.image; });

  const bool pixel = index.has_all_masks();
  const int size = detector.image_size();
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  std::vector<float> pixel_scores;
  std::vector<std::uint8_t> pixel_labels;
  double latency_total = 0.0;
  for (const auto& e : entries) {
    const Image image = load_image(e.image, size);
    const ScoreReport r = detector.score(image);
    latency_total += r.latency_ms;
    scores.push_back(r.image_score);
    labels.push_back(e.label == Label::anomalous ? 1 : 0);
    if (pixel) {
      const Mask mask = e.mask ? read_mask(*e.mask, size) : Mask(size, size);
      pixel_scores.insert(pixel_scores.end(), r.heatmap.data.begin(), r.heatmap.data.end());
      pixel_labels.insert(pixel_labels.end(), mask.data.begin(), mask.data.end());
    }
  }

  MetricsReport report;
  report.category = index.category;
  report.n_images = entries.size();
  report.image_auroc = auroc(std::span<const double>(scores), labels);
  report.mean_latency_ms = latency_total / static_cast<double>(entries.size());
  if (pixel && std::any_of(pixel_labels.begin(), pixel_labels.end(), [](auto v) { return v != 0; })) {
    report.has_pixel_metrics = true;
    report.pixel_auroc = auroc(std::span<const float>(pixel_scores), pixel_labels);
    report.pixel_ap = average_precision(std::span<const float>(pixel_scores), pixel_labels);
  }
  return report;
}

LatencyStats benchmark(const Detector& detector, const Image& image, int iterations, int warmup) {
  if (iterations < 1) throw ArgumentError("benchmark: iterations must be >= 1");
  const Image input = resize(to_rgb(image), detector.image_size(), detector.image_size());
  const auto batch = image_to_tensor(input).unsqueeze(0);
  for (int i = 0; i < warmup; ++i) (void)detector.heatmaps(batch);
  std::vector<double> samples;
  samples.reserve(static_cast<std::size_t>(iterations));
  for (int i = 0; i < iterations; ++i) {
    const auto start = Clock::now();
    (void)detector.heatmaps(batch);
    samples.push_back(elapsed_ms(start));
  }
  return summarize_latency(std::move(samples));
}

}  // namespace pouta

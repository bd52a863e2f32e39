#include "pouta/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "pouta/errors.hpp"

namespace pouta {
namespace {

template <typename T>
void check_inputs(std::span<const T> scores, std::span<const std::uint8_t> labels, const char* op) {
  if (scores.size() != labels.size()) {
    throw ArgumentError(std::string(op) + ": scores and labels differ in length");
  }
  for (T s : scores) {
    if (!std::isfinite(static_cast<double>(s))) throw NumericError(std::string(op) + ": non-finite score");
  }
}

template <typename T>
double auroc_impl(std::span<const T> scores, std::span<const std::uint8_t> labels) {
  check_inputs(scores, labels, "auroc");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (auto l : labels) n_pos += l != 0 ? 1 : 0;
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw UndefinedMetricError("auroc: both classes must be present");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of (1-based, tie-averaged) ranks of the positives.
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    std::size_t pos_in_group = 0;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      pos_in_group += labels[order[j]] != 0 ? 1 : 0;
      ++j;
    }
    const double mean_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    rank_sum += mean_rank * static_cast<double>(pos_in_group);
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  const double u = rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

template <typename T>
double ap_impl(std::span<const T> scores, std::span<const std::uint8_t> labels) {
  check_inputs(scores, labels, "average_precision");
  std::size_t n_pos = 0;
  for (auto l : labels) n_pos += l != 0 ? 1 : 0;
  if (n_pos == 0) throw UndefinedMetricError("average_precision: no positive labels");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  // Recall only moves at positives, by 1/n_pos each time.
  double sum_precision = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (labels[order[k]] == 0) continue;
    ++hits;
    sum_precision += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  return sum_precision / static_cast<double>(n_pos);
}

// Window means in double; row-major H x W.
std::vector<double> window_means(const ScalarField& heatmap, int kernel) {
  if (kernel < 1 || kernel % 2 == 0) throw ArgumentError("box_filter: kernel must be a positive odd number");
  if (heatmap.height < kernel || heatmap.width < kernel) {
    throw ArgumentError("image_score: heatmap " + std::to_string(heatmap.height) + "x" + std::to_string(heatmap.width) +
                        " is smaller than the " + std::to_string(kernel) + "x" + std::to_string(kernel) + " kernel");
  }
  const int h = heatmap.height;
  const int w = heatmap.width;
  const int r = kernel / 2;

  // Horizontal then vertical window sums, accumulated in double.
  std::vector<double> rows(static_cast<std::size_t>(h) * w, 0.0);
  for (int y = 0; y < h; ++y) {
    std::vector<double> prefix(static_cast<std::size_t>(w) + 1, 0.0);
    for (int x = 0; x < w; ++x) prefix[x + 1] = prefix[x] + static_cast<double>(heatmap.at(y, x));
    for (int x = 0; x < w; ++x) {
      const int lo = std::max(0, x - r);
      const int hi = std::min(w, x + r + 1);
      rows[static_cast<std::size_t>(y) * w + x] = prefix[hi] - prefix[lo];
    }
  }
  std::vector<double> out(static_cast<std::size_t>(h) * w);
  const double area = static_cast<double>(kernel) * kernel;
  std::vector<double> prefix(static_cast<std::size_t>(h) + 1, 0.0);
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) prefix[y + 1] = prefix[y] + rows[static_cast<std::size_t>(y) * w + x];
    for (int y = 0; y < h; ++y) {
      const int lo = std::max(0, y - r);
      const int hi = std::min(h, y + r + 1);
      out[static_cast<std::size_t>(y) * w + x] = (prefix[hi] - prefix[lo]) / area;
    }
  }
  return out;
}

}  // namespace

ScalarField box_filter(const ScalarField& heatmap, int kernel) {
  const auto means = window_means(heatmap, kernel);
  ScalarField out(heatmap.height, heatmap.width);
  std::transform(means.begin(), means.end(), out.data.begin(), [](double v) { return static_cast<float>(v); });
  return out;
}

double image_score(const ScalarField& heatmap, int kernel) {
  const auto means = window_means(heatmap, kernel);
  return *std::max_element(means.begin(), means.end());
}

double auroc(std::span<const double> scores, std::span<const std::uint8_t> labels) { return auroc_impl(scores, labels); }
double auroc(std::span<const float> scores, std::span<const std::uint8_t> labels) { return auroc_impl(scores, labels); }

double average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  return ap_impl(scores, labels);
}
double average_precision(std::span<const float> scores, std::span<const std::uint8_t> labels) {
  return ap_impl(scores, labels);
}

LatencyStats summarize_latency(std::vector<double> samples_ms) {
  LatencyStats stats;
  if (samples_ms.empty()) return stats;
  std::sort(samples_ms.begin(), samples_ms.end());
  const double n = static_cast<double>(samples_ms.size());
  stats.samples = samples_ms.size();
  stats.mean_ms = std::accumulate(samples_ms.begin(), samples_ms.end(), 0.0) / n;
  stats.min_ms = samples_ms.front();
  stats.max_ms = samples_ms.back();
  const std::size_t mid = samples_ms.size() / 2;
  stats.median_ms = samples_ms.size() % 2 == 1 ? samples_ms[mid] : 0.5 * (samples_ms[mid - 1] + samples_ms[mid]);
  double var = 0.0;
  for (double s : samples_ms) var += (s - stats.mean_ms) * (s - stats.mean_ms);
  stats.stddev_ms = std::sqrt(var / n);
  return stats;
}

std::string report_csv_header() {
  std::ostringstream out;
  for (std::size_t i = 0; i < kReportColumns.size(); ++i) out << (i ? "," : "") << kReportColumns[i];
  return out.str();
}

std::string report_csv_row(const MetricsReport& r) {
  const std::string pixel_auroc = r.has_pixel_metrics ? fmt::format("{:.6f}", r.pixel_auroc) : "nan";
  const std::string pixel_ap = r.has_pixel_metrics ? fmt::format("{:.6f}", r.pixel_ap) : "nan";
  return fmt::format("{},{},{:.6f},{},{},{:.3f}", r.category, r.n_images, r.image_auroc, pixel_auroc, pixel_ap,
                     r.mean_latency_ms);
}

}  // namespace pouta

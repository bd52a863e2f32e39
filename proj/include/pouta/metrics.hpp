#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pouta/image.hpp"

namespace pouta {

inline constexpr int kScoreKernel = 21;

// Mean filter of side `kernel` (stride 1, zero padding, output same size as
// input, divisor always kernel^2), then the maximum over all positions.
ScalarField box_filter(const ScalarField& heatmap, int kernel = kScoreKernel);
double image_score(const ScalarField& heatmap, int kernel = kScoreKernel);

// Mann-Whitney estimate of P(positive > negative) with ties counted as 1/2.
double auroc(std::span<const double> scores, std::span<const std::uint8_t> labels);
double auroc(std::span<const float> scores, std::span<const std::uint8_t> labels);

// sum_k (R_k - R_{k-1}) P_k over the list ranked by descending score; equal
// scores keep their input order.
double average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels);
double average_precision(std::span<const float> scores, std::span<const std::uint8_t> labels);

struct LatencyStats {
  double mean_ms = 0.0;
  double median_ms = 0.0;
  double min_ms = 0.0;
  double max_ms = 0.0;
  double stddev_ms = 0.0;
  std::size_t samples = 0;
};

LatencyStats summarize_latency(std::vector<double> samples_ms);

struct MetricsReport {
  std::string category;
  double image_auroc = 0.0;
  // Pixel metrics are absent when the split has no ground-truth masks.
  bool has_pixel_metrics = false;
  double pixel_auroc = 0.0;
  double pixel_ap = 0.0;
  double mean_latency_ms = 0.0;
  std::size_t n_images = 0;
};

inline const std::vector<std::string> kReportColumns{"category", "n_images", "image_auroc", "pixel_auroc", "pixel_ap",
                                                     "mean_latency_ms"};

std::string report_csv_header();
std::string report_csv_row(const MetricsReport& report);

}  // namespace pouta

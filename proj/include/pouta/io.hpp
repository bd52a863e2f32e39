#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pouta/image.hpp"

namespace pouta {

namespace fs = std::filesystem;

// Decodes any OpenCV-readable image to RGB in [0, 1]; grayscale is promoted.
Image read_image(const fs::path& path);
// read_image + bilinear resize to size x size.
Image load_image(const fs::path& path, int size);
// Any nonzero pixel is foreground; nearest-neighbour resize when size > 0.
Mask read_mask(const fs::path& path, int size = 0);

void write_image(const fs::path& path, const Image& image);
void write_mask(const fs::path& path, const Mask& mask);
// 8-bit grayscale, linear [0, 1] -> [0, 255] with rounding.
void write_heatmap(const fs::path& path, const ScalarField& heatmap);
ScalarField read_heatmap(const fs::path& path);

// Writes the raw heatmap to `path` and a colour overlay (JET map blended at 0.5
// over the original) next to it as <stem>_overlay.png. Returns the overlay path.
fs::path render_heatmap(const ScalarField& heatmap, const Image& original, const fs::path& path);

enum class Label { normal, anomalous };

struct DatasetEntry {
  fs::path image;
  std::optional<fs::path> mask;  // absent for normal images and mask-less anomalies
  Label label = Label::normal;
  std::string defect_type;
};

struct DatasetIndex {
  std::string category;
  std::vector<DatasetEntry> train;
  std::vector<DatasetEntry> test;

  // True when every anomalous test entry carries a mask.
  bool has_all_masks() const;
};

enum class Split { train, test, both };

// MVTec layout: <root>/<category>/{train/good, test/<defect>, ground_truth/<defect>/<stem>_mask.png}.
// Entries are sorted lexicographically.
DatasetIndex load_dataset(const fs::path& root, const std::string& category, Split split = Split::both);

std::vector<fs::path> list_images(const fs::path& dir);
std::vector<Image> load_images(const std::vector<DatasetEntry>& entries, int size);
// Every image in a directory, e.g. a texture pool. Missing directory yields an empty pool.
std::vector<Image> load_image_dir(const fs::path& dir, int size);

// Rewrites other benchmark layouts into the MVTec convention.
// VisA: <src>/split_csv/1cls.csv (object,split,label,image,mask).
void convert_visa(const fs::path& source_root, const fs::path& target_root);
// DAGM: <src>/Class<n>/{Train,Test}/*.PNG with Label/<stem>_label.PNG.
void convert_dagm(const fs::path& source_root, const fs::path& target_root);

}  // namespace pouta

#include "pouta/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "pouta/errors.hpp"

namespace pouta {
namespace {

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp" || ext == ".tif" || ext == ".tiff";
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
}

void write_mat(const fs::path& path, const cv::Mat& mat) {
  ensure_parent(path);
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), mat);
  } catch (const cv::Exception& e) {
    throw IoError("cannot write " + path.string() + ": " + e.what());
  }
  if (!ok) throw IoError("cannot write " + path.string());
}

cv::Mat read_mat(const fs::path& path, int flags) {
  if (!fs::exists(path)) throw IoError("no such file: " + path.string());
  cv::Mat mat = cv::imread(path.string(), flags);
  if (mat.empty()) throw IoError("cannot decode image " + path.string());
  return mat;
}

std::uint8_t to_byte(float v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)); }

}  // namespace

Image read_image(const fs::path& path) {
  cv::Mat mat = read_mat(path, cv::IMREAD_COLOR | cv::IMREAD_ANYDEPTH);
  cv::Mat rgb;
  cv::cvtColor(mat, rgb, cv::COLOR_BGR2RGB);
  cv::Mat f;
  const double scale = rgb.depth() == CV_16U ? 1.0 / 65535.0 : 1.0 / 255.0;
  rgb.convertTo(f, CV_32FC3, scale);
  Image image(f.rows, f.cols, 3);
  std::memcpy(image.data.data(), f.ptr<float>(), image.data.size() * sizeof(float));
  return image;
}

Image load_image(const fs::path& path, int size) { return resize(read_image(path), size, size); }

Mask read_mask(const fs::path& path, int size) {
  cv::Mat mat = read_mat(path, cv::IMREAD_GRAYSCALE);
  Mask mask(mat.rows, mat.cols);
  for (int y = 0; y < mat.rows; ++y) {
    const auto* row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < mat.cols; ++x) mask.at(y, x) = row[x] != 0 ? 1 : 0;
  }
  return size > 0 ? resize(mask, size, size) : mask;
}

void write_image(const fs::path& path, const Image& image) {
  const Image rgb = to_rgb(image);
  cv::Mat mat(rgb.height, rgb.width, CV_8UC3);
  for (int y = 0; y < rgb.height; ++y) {
    auto* row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < rgb.width; ++x) {
      row[3 * x + 0] = to_byte(rgb.at(y, x, 2));
      row[3 * x + 1] = to_byte(rgb.at(y, x, 1));
      row[3 * x + 2] = to_byte(rgb.at(y, x, 0));
    }
  }
  write_mat(path, mat);
}

void write_mask(const fs::path& path, const Mask& mask) {
  cv::Mat mat(mask.height, mask.width, CV_8UC1);
  for (int y = 0; y < mask.height; ++y) {
    auto* row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < mask.width; ++x) row[x] = mask.at(y, x) ? 255 : 0;
  }
  write_mat(path, mat);
}

void write_heatmap(const fs::path& path, const ScalarField& heatmap) {
  cv::Mat mat(heatmap.height, heatmap.width, CV_8UC1);
  for (int y = 0; y < heatmap.height; ++y) {
    auto* row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < heatmap.width; ++x) row[x] = to_byte(heatmap.at(y, x));
  }
  write_mat(path, mat);
}

ScalarField read_heatmap(const fs::path& path) {
  cv::Mat mat = read_mat(path, cv::IMREAD_GRAYSCALE);
  ScalarField field(mat.rows, mat.cols);
  for (int y = 0; y < mat.rows; ++y) {
    const auto* row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < mat.cols; ++x) field.at(y, x) = static_cast<float>(row[x]) / 255.0f;
  }
  return field;
}

fs::path render_heatmap(const ScalarField& heatmap, const Image& original, const fs::path& path) {
  write_heatmap(path, heatmap);

  cv::Mat gray(heatmap.height, heatmap.width, CV_8UC1);
  for (int y = 0; y < heatmap.height; ++y) {
    for (int x = 0; x < heatmap.width; ++x) gray.at<std::uint8_t>(y, x) = to_byte(heatmap.at(y, x));
  }
  cv::Mat colour;
  cv::applyColorMap(gray, colour, cv::COLORMAP_JET);

  const Image base = resize(to_rgb(original), heatmap.height, heatmap.width);
  cv::Mat under(heatmap.height, heatmap.width, CV_8UC3);
  for (int y = 0; y < base.height; ++y) {
    auto* row = under.ptr<std::uint8_t>(y);
    for (int x = 0; x < base.width; ++x) {
      row[3 * x + 0] = to_byte(base.at(y, x, 2));
      row[3 * x + 1] = to_byte(base.at(y, x, 1));
      row[3 * x + 2] = to_byte(base.at(y, x, 0));
    }
  }
  cv::Mat overlay;
  cv::addWeighted(colour, 0.5, under, 0.5, 0.0, overlay);
  const fs::path overlay_path = path.parent_path() / (path.stem().string() + "_overlay.png");
  write_mat(overlay_path, overlay);
  return overlay_path;
}

bool DatasetIndex::has_all_masks() const {
  return std::all_of(test.begin(), test.end(),
                     [](const DatasetEntry& e) { return e.label == Label::normal || e.mask.has_value(); });
}

std::vector<fs::path> list_images(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

DatasetIndex load_dataset(const fs::path& root, const std::string& category, Split split) {
  const fs::path base = root / category;
  if (!fs::is_directory(base)) throw IoError("dataset category directory not found: " + base.string());
  DatasetIndex index;
  index.category = category;

  if (split != Split::test) {
    const fs::path good = base / "train" / "good";
    if (!fs::is_directory(good)) throw IoError("missing training split: " + good.string());
    for (const auto& p : list_images(good)) index.train.push_back({p, std::nullopt, Label::normal, "good"});
  }

  if (split != Split::train) {
    const fs::path test = base / "test";
    if (!fs::is_directory(test)) throw IoError("missing test split: " + test.string());
    std::vector<fs::path> defect_dirs;
    for (const auto& entry : fs::directory_iterator(test)) {
      if (entry.is_directory()) defect_dirs.push_back(entry.path());
    }
    std::sort(defect_dirs.begin(), defect_dirs.end());
    for (const auto& dir : defect_dirs) {
      const std::string defect = dir.filename().string();
      const bool normal = defect == "good";
      const fs::path mask_dir = base / "ground_truth" / defect;
      const bool has_masks = !normal && fs::is_directory(mask_dir);
      for (const auto& p : list_images(dir)) {
        DatasetEntry e{p, std::nullopt, normal ? Label::normal : Label::anomalous, defect};
        if (has_masks) {
          const fs::path mask = mask_dir / (p.stem().string() + "_mask.png");
          if (!fs::exists(mask)) {
            throw IoError("image " + p.string() + " has no matching mask " + mask.string());
          }
          e.mask = mask;
        }
        index.test.push_back(std::move(e));
      }
    }
  }
  return index;
}

std::vector<Image> load_images(const std::vector<DatasetEntry>& entries, int size) {
  std::vector<Image> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(load_image(e.image, size));
  return out;
}

std::vector<Image> load_image_dir(const fs::path& dir, int size) {
  std::vector<Image> out;
  if (dir.empty()) return out;
  if (!fs::is_directory(dir)) throw IoError("texture directory not found: " + dir.string());
  for (const auto& p : list_images(dir)) out.push_back(load_image(p, size));
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    out.push_back(cell);
  }
  return out;
}

void copy_as_png(const fs::path& from, const fs::path& to) {
  cv::Mat mat = read_mat(from, cv::IMREAD_UNCHANGED);
  write_mat(to, mat);
}

void copy_mask_as_png(const fs::path& from, const fs::path& to) {
  cv::Mat mat = read_mat(from, cv::IMREAD_GRAYSCALE);
  cv::Mat binary = mat > 0;
  write_mat(to, binary);
}

}  // namespace

void convert_visa(const fs::path& source_root, const fs::path& target_root) {
  const fs::path csv = source_root / "split_csv" / "1cls.csv";
  std::ifstream in(csv);
  if (!in) throw IoError("VisA split file not found: " + csv.string());
  std::string line;
  std::getline(in, line);
  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* required : {"object", "split", "label", "image", "mask"}) {
    if (!col.contains(required)) throw IoError(csv.string() + ": missing column '" + required + "'");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    auto cell = [&](const char* name) { return col[name] < cells.size() ? cells[col[name]] : std::string(); };
    const std::string object = cell("object");
    const std::string split = cell("split");
    const bool anomalous = cell("label") == "anomaly";
    const fs::path image = source_root / cell("image");
    const std::string stem = image.stem().string();
    if (split == "train") {
      if (anomalous) continue;
      copy_as_png(image, target_root / object / "train" / "good" / (stem + ".png"));
    } else {
      const std::string defect = anomalous ? "anomaly" : "good";
      copy_as_png(image, target_root / object / "test" / defect / (stem + ".png"));
      if (anomalous && !cell("mask").empty()) {
        copy_mask_as_png(source_root / cell("mask"), target_root / object / "ground_truth" / defect / (stem + "_mask.png"));
      }
    }
  }
}

void convert_dagm(const fs::path& source_root, const fs::path& target_root) {
  std::vector<fs::path> classes;
  for (const auto& entry : fs::directory_iterator(source_root)) {
    if (entry.is_directory() && entry.path().filename().string().rfind("Class", 0) == 0) classes.push_back(entry.path());
  }
  if (classes.empty()) throw IoError("no DAGM Class* directories under " + source_root.string());
  std::sort(classes.begin(), classes.end());
  for (const auto& cls : classes) {
    const std::string category = cls.filename().string();
    for (const char* split : {"Train", "Test"}) {
      const fs::path dir = cls / split;
      if (!fs::is_directory(dir)) throw IoError("missing DAGM split: " + dir.string());
      const fs::path labels = dir / "Label";
      for (const auto& p : list_images(dir)) {
        const std::string stem = p.stem().string();
        const fs::path label = labels / (stem + "_label" + p.extension().string());
        const bool anomalous = fs::exists(label);
        if (std::string(split) == "Train") {
          if (!anomalous) copy_as_png(p, target_root / category / "train" / "good" / (stem + ".png"));
          continue;
        }
        const std::string defect = anomalous ? "defect" : "good";
        copy_as_png(p, target_root / category / "test" / defect / (stem + ".png"));
        if (anomalous) copy_mask_as_png(label, target_root / category / "ground_truth" / defect / (stem + "_mask.png"));
      }
    }
  }
}

}  // namespace pouta

#include "prelude.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pouta/checkpoint.hpp"
#include "pouta/cli.hpp"
#include "pouta/inference.hpp"
#include "pouta/io.hpp"
#include "pouta/metrics.hpp"
#include "pouta/training.hpp"

#include "oracles.hpp"

using namespace pouta;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli_dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
  return cells;
}

// One 200-step run through the command line, shared by every case below.
struct Trained {
  fs::path root;
  fs::path data;
  fs::path checkpoint;
  fs::path report;
  Run fixture, synthesize, train, eval;

  Trained() {
    root = fs::temp_directory_path() / "pouta_smoke";
    fs::remove_all(root);
    fs::create_directories(root);
    data = root / "data";
    checkpoint = root / "model.ckpt";
    report = root / "report.csv";
    fixture = run({"fixture", "--out", root.string(), "--seed", "1"});
    synthesize = run({"synthesize", "--input-dir", (data / "toy/train/good").string(), "--texture-dir",
                      (root / "textures").string(), "--out-dir", (root / "synth").string(), "--count", "6",
                      "--seed", "3", "--image-size", "64"});
    train = run({"train", "--data-root", data.string(), "--category", "toy", "--texture-dir",
                 (root / "textures").string(), "--out", checkpoint.string(), "--image-size", "64",
                 "--batch-size", "8", "--max-steps", "200", "--seed", "0", "--quiet"});
    eval = run({"eval", "--checkpoint", checkpoint.string(), "--data-root", data.string(), "--category", "toy",
                "--report", report.string()});
  }
};

const Trained& trained() {
  static const Trained t;
  return t;
}

const Detector& detector() {
  static const Detector d(load_checkpoint(trained().checkpoint));
  return d;
}

DatasetIndex test_index() { return load_dataset(trained().data, "toy", Split::test); }

}  // namespace

TEST_SUITE("smoke") {

TEST_CASE("command line path: fixture, synthesize, train, eval") {
  const auto& t = trained();
  CHECK_MESSAGE(t.fixture.code == 0, t.fixture.err);
  CHECK_MESSAGE(t.synthesize.code == 0, t.synthesize.err);
  REQUIRE_MESSAGE(t.train.code == 0, t.train.err);
  REQUIRE_MESSAGE(t.eval.code == 0, t.eval.err);
  CHECK(fs::exists(t.checkpoint));

  const auto manifest = read_lines(t.root / "synth/manifest.csv");
  CHECK(manifest.size() == 7);

  const auto lines = read_lines(t.report);
  REQUIRE(lines.size() == 2);
  CHECK(lines[0] == "category,n_images,image_auroc,pixel_auroc,pixel_ap,mean_latency_ms");
  const auto row = split_csv(lines[1]);
  REQUIRE(row.size() == 6);
  CHECK(row[0] == "toy");
  CHECK(row[1] == "16");
}

TEST_CASE("loss falls by at least half over 200 steps") {
  const auto lines = read_lines(fs::path(trained().checkpoint.string() + ".loss.csv"));
  REQUIRE(lines.size() == 201);
  auto total = [&](std::size_t i) { return std::stod(split_csv(lines[i])[3]); };
  double first = 0.0, last = 0.0;
  for (std::size_t i = 1; i <= 10; ++i) first += total(i) / 10.0;
  for (std::size_t i = lines.size() - 10; i < lines.size(); ++i) last += total(i) / 10.0;
  MESSAGE("first ", first, " last ", last);
  CHECK(last <= 0.5 * first);
}

TEST_CASE("reconstruction stays closer to normal images than to anomalous regions") {
  const auto index = test_index();
  const int size = detector().image_size();
  AnomalyModel model = detector().model();
  torch::NoGradGuard no_grad;
  double normal_err = 0.0, anomalous_err = 0.0;
  int normal_n = 0;
  double anomalous_n = 0.0;
  for (const auto& e : index.test) {
    const auto input = image_to_tensor(load_image(e.image, size)).unsqueeze(0);
    const auto recon = model->forward(input).reconstruction.image;
    const auto diff = (recon - input).abs().mean(1);  // 1 x H x W
    if (e.label == Label::normal) {
      normal_err += diff.mean().item<double>();
      ++normal_n;
    } else {
      const auto mask = mask_to_tensor(read_mask(*e.mask, size)).to(torch::kFloat);
      anomalous_err += (diff * mask).sum().item<double>();
      anomalous_n += mask.sum().item<double>();
    }
  }
  REQUIRE(normal_n > 0);
  REQUIRE(anomalous_n > 0);
  normal_err /= normal_n;
  anomalous_err /= anomalous_n;
  MESSAGE("normal ", normal_err, " anomalous region ", anomalous_err);
  CHECK(normal_err < anomalous_err);
}

TEST_CASE("heatmap is higher inside held-out masks than outside") {
  const auto index = test_index();
  for (const auto& e : index.test) {
    if (e.label != Label::anomalous) continue;
    const auto report = detector().score(load_image(e.image, detector().image_size()));
    const auto mask = read_mask(*e.mask, detector().image_size());
    double in = 0.0, out = 0.0;
    int n_in = 0, n_out = 0;
    for (int y = 0; y < mask.height; ++y) {
      for (int x = 0; x < mask.width; ++x) {
        if (mask.at(y, x)) {
          in += report.heatmap.at(y, x);
          ++n_in;
        } else {
          out += report.heatmap.at(y, x);
          ++n_out;
        }
      }
    }
    REQUIRE(n_in > 0);
    CHECK_MESSAGE(in / n_in > out / n_out, e.image.string());
  }
}

TEST_CASE("image AUROC on two normal and two anomalous images") {
  auto index = test_index();
  std::vector<DatasetEntry> picked;
  int normals = 0, anomalies = 0;
  for (const auto& e : index.test) {
    if (e.label == Label::normal && normals < 2) {
      picked.push_back(e);
      ++normals;
    } else if (e.label == Label::anomalous && anomalies < 2) {
      picked.push_back(e);
      ++anomalies;
    }
  }
  REQUIRE(picked.size() == 4);
  index.test = picked;
  CHECK(evaluate_category(detector(), index).image_auroc == 1.0);
}

TEST_CASE("evaluation does not depend on the order of the test list") {
  auto index = test_index();
  const auto a = evaluate_category(detector(), index);
  std::mt19937 rng(7);
  std::shuffle(index.test.begin(), index.test.end(), rng);
  const auto b = evaluate_category(detector(), index);
  CHECK(a.n_images == b.n_images);
  CHECK(a.image_auroc == b.image_auroc);
  CHECK(a.pixel_auroc == b.pixel_auroc);
  CHECK(a.pixel_ap == b.pixel_ap);
}

TEST_CASE("anomalous images outscore normal ones in at least 90% of pairs") {
  std::vector<double> normal, anomalous;
  for (const auto& e : test_index().test) {
    const double s = infer(detector(), e.image).image_score;
    (e.label == Label::normal ? normal : anomalous).push_back(s);
  }
  REQUIRE(!normal.empty());
  REQUIRE(!anomalous.empty());
  int wins = 0;
  for (double a : anomalous)
    for (double n : normal) wins += a > n ? 1 : 0;
  const double fraction = static_cast<double>(wins) / static_cast<double>(normal.size() * anomalous.size());
  MESSAGE("ordered pairs ", fraction);
  CHECK(fraction >= 0.9);
}

TEST_CASE("infer output: JSON score matches the saved heatmap, scoring is repeatable") {
  const auto& t = trained();
  const auto index = test_index();
  const auto it = std::find_if(index.test.begin(), index.test.end(),
                               [](const DatasetEntry& e) { return e.label == Label::anomalous; });
  REQUIRE(it != index.test.end());
  const auto out_dir = t.root / "infer";
  const auto r = run({"infer", "--checkpoint", t.checkpoint.string(), "--image", it->image.string(), "--out-dir",
                      out_dir.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);

  const auto json = nlohmann::json::parse(r.out);
  const double reported = json.at("image_score").get<double>();
  CHECK(json.at("variant").get<std::string>() == "full");
  const fs::path heatmap_path = json.at("heatmap_path").get<std::string>();
  REQUIRE(fs::exists(heatmap_path));
  CHECK(fs::exists(out_dir / (it->image.stem().string() + ".json")));
  const double recomputed = image_score(read_heatmap(heatmap_path));
  CHECK(std::abs(recomputed - reported) <= 1.0 / 255.0);

  const auto image = load_image(it->image, detector().image_size());
  const auto first = detector().score(image);
  const auto second = detector().score(image);
  CHECK(first.image_score == second.image_score);
  CHECK(first.heatmap.data == second.heatmap.data);
}

}

#include "pouta/cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "pouta/checkpoint.hpp"
#include "pouta/config.hpp"
#include "pouta/errors.hpp"
#include "pouta/fixture.hpp"
#include "pouta/inference.hpp"
#include "pouta/io.hpp"
#include "pouta/random.hpp"
#include "pouta/training.hpp"

namespace pouta {
namespace {

struct SynthesizeArgs {
  std::string input_dir;
  std::string texture_dir;
  std::string out_dir;
  int count = 0;
  std::uint64_t seed = 0;
  int image_size = 224;
  std::string config;
};

struct TrainArgs {
  std::string data_root;
  std::string category;
  std::string texture_dir;
  std::string out;
  std::string config;
  std::vector<std::string> set;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<int> max_steps;
  std::optional<int> batch_size;
  std::optional<int> image_size;
  std::optional<int> base_width;
  std::optional<int> k_shot;
  std::optional<double> lr;
  std::optional<std::string> variant;
  int workers = 0;
  bool quiet = false;
};

struct InferArgs {
  std::string checkpoint;
  std::string image;
  std::string out_dir = ".";
};

struct EvalArgs {
  std::string checkpoint;
  std::string data_root;
  std::vector<std::string> categories;
  std::string report;
};

struct BenchArgs {
  std::string checkpoint;
  int iterations = 100;
  int warmup = 10;
  std::string image;
};

struct ConvertArgs {
  std::string format;
  std::string source;
  std::string target;
};

struct FixtureArgs {
  std::string out;
  std::uint64_t seed = 0;
  int size = 64;
  int train = 32;
  int test_normal = 8;
  int test_anomalous = 8;
  std::string pattern = "stripes";
};

TrainConfig train_config(const TrainArgs& a) {
  ConfigMap values;
  if (!a.config.empty()) values = read_ini_map(a.config);
  for (const auto& kv : a.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ArgumentError("--set expects key=value, got '" + kv + "'");
    values[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  if (a.seed) values["train.seed"] = std::to_string(*a.seed);
  if (a.epochs) values["train.epochs"] = std::to_string(*a.epochs);
  if (a.max_steps) values["train.max_steps"] = std::to_string(*a.max_steps);
  if (a.batch_size) values["train.batch_size"] = std::to_string(*a.batch_size);
  if (a.image_size) values["train.image_size"] = std::to_string(*a.image_size);
  if (a.base_width) values["model.base_width"] = std::to_string(*a.base_width);
  if (a.k_shot) values["train.k_shot"] = std::to_string(*a.k_shot);
  if (a.lr) values["train.base_lr"] = fmt::format("{}", *a.lr);
  if (a.variant) values["train.variant"] = *a.variant;
  if (!a.texture_dir.empty()) values["data.texture_dir"] = a.texture_dir;
  TrainConfig config = config_from_map(values);
  // A shortened run keeps decay points that would otherwise fall outside it.
  if (a.epochs && !values.contains("train.lr_decay_epochs")) {
    std::erase_if(config.lr_decay_epochs, [&](int e) { return e >= config.epochs; });
  }
  config.validate();
  return config;
}

void run_synthesize(const SynthesizeArgs& a, std::ostream& out) {
  if (a.count < 1) throw ArgumentError("--count must be >= 1");
  TrainConfig config;
  if (!a.config.empty()) config = load_config(a.config);
  const auto sources = list_images(a.input_dir);
  if (sources.empty()) throw IoError("no images found in " + a.input_dir);
  std::vector<Image> images;
  for (const auto& p : sources) images.push_back(load_image(p, a.image_size));
  const auto textures = load_image_dir(a.texture_dir, a.image_size);
  const AnomalySynthesizer synth(config.synthesis, textures);

  const fs::path out_dir(a.out_dir);
  fs::create_directories(out_dir);
  std::ofstream manifest(out_dir / "manifest.csv");
  if (!manifest) throw IoError("cannot write " + (out_dir / "manifest.csv").string());
  manifest << "name,seed,beta,is_anomalous\n";
  for (int i = 0; i < a.count; ++i) {
    const auto index = static_cast<std::size_t>(i) % images.size();
    const std::uint64_t seed = sample_seed(a.seed, 0, static_cast<std::uint64_t>(i));
    const SyntheticSample s = synth.sample(images[index], seed);
    const std::string name = fmt::format("{:05d}_{}", i, sources[index].stem().string());
    write_image(out_dir / (name + "_img.png"), s.input);
    write_mask(out_dir / (name + "_mask.png"), s.mask);
    fmt::print(manifest, "{},{},{:.6f},{}\n", name, seed, s.opacity, s.is_anomalous ? 1 : 0);
  }
  fmt::print(out, "wrote {} samples to {}\n", a.count, out_dir.string());
}

void run_train(const TrainArgs& a, std::ostream& out) {
  const TrainConfig config = train_config(a);
  TrainOptions options;
  options.log = a.quiet ? nullptr : &out;
  options.checkpoint_path = a.out;
  options.workers = a.workers;
  const auto result = train(config, a.data_root, a.category, config.texture_dir, options);
  fmt::print(out, "final_loss {:.8f}\ncheckpoint {}\n", result.final_loss, a.out);
}

void run_infer(const InferArgs& a, std::ostream& out) {
  const Detector detector(load_checkpoint(a.checkpoint));
  const ScoreReport report = infer(detector, a.image);
  const Image original = read_image(a.image);
  const auto artifacts = write_inference(report, original, detector.variant(), a.out_dir);
  out << score_json(report, artifacts.heatmap, detector.variant()) << "\n";
}

void run_eval(const EvalArgs& a, std::ostream& out) {
  const Detector detector(load_checkpoint(a.checkpoint));
  std::vector<MetricsReport> reports;
  for (const auto& category : a.categories) {
    reports.push_back(evaluate_category(detector, load_dataset(a.data_root, category, Split::test)));
  }
  std::string csv = report_csv_header() + "\n";
  for (const auto& r : reports) csv += report_csv_row(r) + "\n";
  out << csv;
  if (!a.report.empty()) {
    std::ofstream file(a.report);
    if (!file) throw IoError("cannot write report " + a.report);
    file << csv;
  }
  for (const auto& r : reports) {
    if (!r.has_pixel_metrics) fmt::print(out, "note: {} has no ground-truth masks; pixel metrics omitted\n", r.category);
  }
}

void run_bench(const BenchArgs& a, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const Detector detector(ck);
  Image image;
  if (a.image.empty()) {
    image = Image(detector.image_size(), detector.image_size(), 3);
    Rng rng(0);
    for (float& v : image.data) v = static_cast<float>(rng.uniform());
  } else {
    image = read_image(a.image);
  }
  const auto stats = benchmark(detector, image, a.iterations, a.warmup);
  fmt::print(out, "variant {}\nparameters {}\nimage_size {}\niterations {}\nwarmup {}\n", to_string(detector.variant()),
             parameter_count(*detector.model()), detector.image_size(), stats.samples, a.warmup);
  fmt::print(out, "mean_ms {:.3f}\nmedian_ms {:.3f}\nmin_ms {:.3f}\nmax_ms {:.3f}\nstddev_ms {:.3f}\n", stats.mean_ms,
             stats.median_ms, stats.min_ms, stats.max_ms, stats.stddev_ms);
}

void run_convert(const ConvertArgs& a, std::ostream& out) {
  if (a.format == "visa") convert_visa(a.source, a.target);
  else if (a.format == "dagm") convert_dagm(a.source, a.target);
  else throw ArgumentError("unknown format '" + a.format + "'");
  fmt::print(out, "converted {} layout from {} into {}\n", a.format, a.source, a.target);
}

void run_fixture(const FixtureArgs& a, std::ostream& out) {
  ToyFixtureOptions o;
  o.seed = a.seed;
  o.size = a.size;
  o.train_count = a.train;
  o.test_normal = a.test_normal;
  o.test_anomalous = a.test_anomalous;
  o.pattern = a.pattern == "checker" ? ToyPattern::checker : ToyPattern::stripes;
  const auto fx = write_toy_fixture(a.out, o);
  fmt::print(out, "dataset_root {}\ncategory {}\ntexture_dir {}\n", fx.dataset_root.string(), fx.category,
             fx.texture_dir.string());
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Anomaly detection by reusing reconstructive feature pyramids", "pouta"};
  app.require_subcommand(1);

  SynthesizeArgs syn;
  auto* synthesize = app.add_subcommand("synthesize", "Write synthetic anomaly pairs and a manifest");
  synthesize->add_option("--input-dir", syn.input_dir, "Directory of defect-free images")->required();
  synthesize->add_option("--texture-dir", syn.texture_dir, "Directory of unrelated texture images (optional)");
  synthesize->add_option("--out-dir", syn.out_dir, "Output directory")->required();
  synthesize->add_option("--count", syn.count, "Number of samples to write")->required();
  synthesize->add_option("--seed", syn.seed, "Global seed")->capture_default_str();
  synthesize->add_option("--image-size", syn.image_size, "Side length images are resized to")->capture_default_str();
  synthesize->add_option("--config", syn.config, "INI config; its [synthesis] section is used");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model on <data-root>/<category>/train/good");
  train_cmd->add_option("--data-root", tr.data_root, "Dataset root in MVTec layout")->required();
  train_cmd->add_option("--category", tr.category, "Category directory under the root")->required();
  train_cmd->add_option("--texture-dir", tr.texture_dir, "Texture pool for anomaly synthesis (optional)");
  train_cmd->add_option("--out", tr.out, "Checkpoint path to write")->required();
  train_cmd->add_option("--config", tr.config, "INI config file; flags override it");
  train_cmd->add_option("--set", tr.set, "Override any config key, e.g. --set loss.lambda1=0.5");
  train_cmd->add_option("--seed", tr.seed, "Seed for all randomness");
  train_cmd->add_option("--epochs", tr.epochs, "Number of epochs");
  train_cmd->add_option("--max-steps", tr.max_steps, "Stop after this many optimizer steps");
  train_cmd->add_option("--batch-size", tr.batch_size, "Batch size");
  train_cmd->add_option("--image-size", tr.image_size, "Training resolution (multiple of 16)");
  train_cmd->add_option("--base-width", tr.base_width, "Channel width of the finest pyramid level");
  train_cmd->add_option("--k-shot", tr.k_shot, "Train on a random support set of k images");
  train_cmd->add_option("--lr", tr.lr, "Base learning rate");
  train_cmd->add_option("--variant", tr.variant, "vanilla | base | base+hsg | base+mss | full");
  train_cmd->add_option("--workers", tr.workers, "Synthesis threads (default: POUTA_NUM_WORKERS or 1)");
  train_cmd->add_flag("--quiet", tr.quiet, "Do not print the per-epoch loss log");

  InferArgs inf;
  auto* infer_cmd = app.add_subcommand("infer", "Score one image and write its heatmap");
  infer_cmd->add_option("--checkpoint", inf.checkpoint, "Checkpoint file")->required();
  infer_cmd->add_option("--image", inf.image, "Image to score")->required();
  infer_cmd->add_option("--out-dir", inf.out_dir, "Where heatmap PNGs and JSON go")->capture_default_str();

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Image/pixel AUROC and pixel AP on test splits");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--data-root", ev.data_root, "Dataset root in MVTec layout")->required();
  eval_cmd->add_option("--category", ev.categories, "Category to evaluate (repeatable)")->required();
  eval_cmd->add_option("--report", ev.report, "CSV report path");

  BenchArgs be;
  auto* bench_cmd = app.add_subcommand("bench", "Single-image inference latency");
  bench_cmd->add_option("--checkpoint", be.checkpoint, "Checkpoint file")->required();
  bench_cmd->add_option("--iterations", be.iterations, "Timed repetitions")->capture_default_str()->check(CLI::PositiveNumber);
  bench_cmd->add_option("--warmup", be.warmup, "Untimed warm-up runs")->capture_default_str()->check(CLI::NonNegativeNumber);
  bench_cmd->add_option("--image", be.image, "Image to time on (default: seeded random image)");

  ConvertArgs cv;
  auto* convert_cmd = app.add_subcommand("convert", "Rewrite VisA or DAGM into the MVTec layout");
  convert_cmd->add_option("--format", cv.format, "visa | dagm")->required()->check(CLI::IsMember({"visa", "dagm"}));
  convert_cmd->add_option("--source", cv.source, "Source dataset root")->required();
  convert_cmd->add_option("--target", cv.target, "Target root")->required();

  FixtureArgs fx;
  auto* fixture_cmd = app.add_subcommand("fixture", "Write the procedural toy dataset");
  fixture_cmd->add_option("--out", fx.out, "Output directory")->required();
  fixture_cmd->add_option("--seed", fx.seed, "Seed")->capture_default_str();
  fixture_cmd->add_option("--size", fx.size, "Image side")->capture_default_str();
  fixture_cmd->add_option("--train", fx.train, "Training images")->capture_default_str();
  fixture_cmd->add_option("--test-normal", fx.test_normal, "Normal test images")->capture_default_str();
  fixture_cmd->add_option("--test-anomalous", fx.test_anomalous, "Anomalous test images")->capture_default_str();
  fixture_cmd->add_option("--pattern", fx.pattern, "stripes | checker")->capture_default_str()->check(
      CLI::IsMember({"stripes", "checker"}));

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run 'pouta --help' for usage\n";
    return kExitUsage;
  }

  try {
    if (synthesize->parsed()) run_synthesize(syn, out);
    else if (train_cmd->parsed()) run_train(tr, out);
    else if (infer_cmd->parsed()) run_infer(inf, out);
    else if (eval_cmd->parsed()) run_eval(ev, out);
    else if (bench_cmd->parsed()) run_bench(be, out);
    else if (convert_cmd->parsed()) run_convert(cv, out);
    else if (fixture_cmd->parsed()) run_fixture(fx, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomainError;
  }
  return kExitOk;
}

int cli_dispatch(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return cli_dispatch(args, std::cout, std::cerr);
}

}  // namespace pouta

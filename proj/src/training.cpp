#include "pouta/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <numeric>
#include <thread>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "pouta/errors.hpp"
#include "pouta/io.hpp"
#include "pouta/random.hpp"

namespace pouta {

double lr_at_epoch(int epoch, const TrainConfig& config) {
  if (epoch < 0 || epoch >= config.epochs) {
    throw ArgumentError(fmt::format("lr_at_epoch: epoch {} outside [0, {})", epoch, config.epochs));
  }
  double lr = config.base_lr;
  for (int milestone : config.lr_decay_epochs) {
    if (epoch >= milestone) lr *= config.lr_decay_factor;
  }
  // Rates are decimal quantities; drop the binary rounding noise of the
  // products (0.0002 * 0.2 * 0.2 would otherwise be 8.000000000000001e-06).
  return std::strtod(fmt::format("{:.15g}", lr).c_str(), nullptr);
}

std::vector<std::size_t> few_shot_subset(std::size_t pool_size, std::size_t k, std::uint64_t seed) {
  if (k > pool_size) throw ArgumentError(fmt::format("few_shot_subset: k = {} exceeds the pool of {} images", k, pool_size));
  std::vector<std::size_t> indices(pool_size);
  std::iota(indices.begin(), indices.end(), std::size_t{0});
  // Partial Fisher-Yates: the first k slots end up a uniform sample without replacement.
  Rng rng(hash_combine(seed, 0x66657773686f74ULL));
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(pool_size) - 1));
    std::swap(indices[i], indices[j]);
  }
  indices.resize(k);
  std::sort(indices.begin(), indices.end());
  return indices;
}

torch::Tensor image_to_tensor(const Image& image) {
  const Image rgb = to_rgb(image);
  auto hwc = torch::from_blob(const_cast<float*>(rgb.data.data()), {rgb.height, rgb.width, rgb.channels}, torch::kFloat32);
  return hwc.permute({2, 0, 1}).contiguous().clone();
}

torch::Tensor mask_to_tensor(const Mask& mask) {
  auto t = torch::from_blob(const_cast<std::uint8_t*>(mask.data.data()), {1, mask.height, mask.width}, torch::kUInt8);
  return (t != 0).to(torch::kFloat32);
}

ScalarField tensor_to_field(const torch::Tensor& map) {
  auto t = map.detach().to(torch::kFloat32).contiguous();
  while (t.dim() > 2) {
    if (t.size(0) != 1) throw ArgumentError("tensor_to_field: expected a single map, got " + torch::str(map.sizes()));
    t = t.squeeze(0);
  }
  ScalarField field(static_cast<int>(t.size(0)), static_cast<int>(t.size(1)));
  std::memcpy(field.data.data(), t.data_ptr<float>(), field.data.size() * sizeof(float));
  return field;
}

Batch collate(const std::vector<SyntheticSample>& samples) {
  std::vector<torch::Tensor> inputs, originals, masks;
  for (const auto& s : samples) {
    inputs.push_back(image_to_tensor(s.input));
    originals.push_back(image_to_tensor(s.original));
    masks.push_back(mask_to_tensor(s.mask));
  }
  return {torch::stack(inputs), torch::stack(originals), torch::stack(masks)};
}

LossBreakdown compute_losses(const ModelOutput& output, const Batch& batch, const LossWeights& weights,
                             bool supervised) {
  LossBreakdown loss;
  loss.reconstruction = reconstruction_loss(output.reconstruction.image, batch.original);
  loss.prediction = semantic_supervision_loss(output.heatmap, batch.mask, weights);
  if (supervised) {
    if (output.side_outputs.size() != 4) throw ContractError("compute_losses: expected four supervision heads");
    std::array<torch::Tensor, 4> terms;
    for (std::size_t i = 0; i < 4; ++i) {
      terms[i] = semantic_supervision_loss(anomaly_channel(output.side_outputs[i]), batch.mask, weights);
    }
    loss.supervision = mss_loss(terms, weights);
  } else {
    loss.supervision = torch::zeros({}, loss.prediction.options());
  }
  loss.total = total_loss(loss.reconstruction, loss.prediction, loss.supervision);
  return loss;
}

int worker_count(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("POUTA_NUM_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

namespace {

std::vector<SyntheticSample> synthesize_batch(const AnomalySynthesizer& synth, const std::vector<Image>& images,
                                              const std::vector<std::size_t>& indices, std::uint64_t seed, int epoch,
                                              int workers) {
  std::vector<SyntheticSample> out(indices.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      out[i] = synth.sample(images[indices[i]], sample_seed(seed, static_cast<std::uint64_t>(epoch), indices[i]));
    }
  };
  const auto n = indices.size();
  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), n);
  if (threads <= 1) {
    work(0, n);
    return out;
  }
  std::vector<std::jthread> pool;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t b = t * chunk;
    const std::size_t e = std::min(n, b + chunk);
    if (b < e) pool.emplace_back(work, b, e);
  }
  return out;
}

void write_loss_log(const std::filesystem::path& path, const std::vector<StepRecord>& steps) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write loss log " + path.string());
  out << "epoch,step,lr,total,reconstruction,prediction,supervision\n";
  for (const auto& s : steps) {
    fmt::print(out, "{},{},{},{:.8f},{:.8f},{:.8f},{:.8f}\n", s.epoch, s.step, s.lr, s.total, s.reconstruction,
               s.prediction, s.supervision);
  }
}

}  // namespace

TrainResult train(const TrainConfig& config, const std::vector<Image>& images, const std::vector<Image>& textures,
                  const TrainOptions& options) {
  config.validate();
  if (images.empty()) throw IoError("train: the training set is empty");
  const TrainConfig schedule = effective_schedule(config);

  std::vector<Image> pool;
  pool.reserve(images.size());
  for (const auto& img : images) pool.push_back(resize(to_rgb(img), config.image_size, config.image_size));
  if (config.k_shot) pool = few_shot_subset(pool, static_cast<std::size_t>(*config.k_shot), config.seed);

  std::vector<Image> texture_pool;
  texture_pool.reserve(textures.size());
  for (const auto& t : textures) texture_pool.push_back(resize(to_rgb(t), config.image_size, config.image_size));
  const AnomalySynthesizer synth(config.synthesis, std::move(texture_pool));

  torch::manual_seed(config.seed);
  AnomalyModel model = build_variant(config);
  model->train();
  torch::optim::Adam optimizer(model->parameters(),
                               torch::optim::AdamOptions(config.base_lr).betas({0.9, 0.999}).weight_decay(0.0));

  const bool supervised = uses_supervision(config.variant);
  const int workers = worker_count(options.workers);
  const std::uint64_t mss_before = mss_loss_evaluations();
  TrainResult result;
  int step = 0;
  int epoch = 0;
  bool stop = false;
  for (; epoch < schedule.epochs && !stop; ++epoch) {
    const double lr = lr_at_epoch(epoch, schedule);
    for (auto& group : optimizer.param_groups()) static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);

    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle(hash_combine(config.seed, hash_combine(0x6f72646572ULL, static_cast<std::uint64_t>(epoch))));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
    }

    double epoch_total = 0.0;
    int epoch_steps = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
      const std::vector<std::size_t> indices(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                             order.begin() + static_cast<std::ptrdiff_t>(end));
      const Batch batch = collate(synthesize_batch(synth, pool, indices, config.seed, epoch, workers));

      optimizer.zero_grad();
      const ModelOutput output = model->forward(batch.input);
      const LossBreakdown loss = compute_losses(output, batch, config.loss, supervised);
      loss.total.backward();
      optimizer.step();

      StepRecord rec{epoch,
                     step,
                     lr,
                     loss.total.item<double>(),
                     loss.reconstruction.item<double>(),
                     loss.prediction.item<double>(),
                     loss.supervision.item<double>()};
      if (!std::isfinite(rec.total)) throw NumericError(fmt::format("train: loss became non-finite at step {}", step));
      result.steps.push_back(rec);
      epoch_total += rec.total;
      ++epoch_steps;
      ++step;
      if (config.max_steps > 0 && step >= config.max_steps) {
        stop = true;
        break;
      }
    }
    if (options.log != nullptr) {
      const auto& last = result.steps.back();
      fmt::print(*options.log, "epoch {:4d}/{} lr {:.3g} loss {:.5f} (rec {:.4f} pre {:.4f} mss {:.4f})\n", epoch + 1,
                 schedule.epochs, lr, epoch_total / epoch_steps, last.reconstruction, last.prediction, last.supervision);
      options.log->flush();
    }
  }

  result.final_loss = result.steps.back().total;
  result.mss_evaluations = mss_loss_evaluations() - mss_before;
  model->eval();
  result.checkpoint = capture_checkpoint(model, config, static_cast<std::uint32_t>(epoch));
  if (!options.checkpoint_path.empty()) {
    save_checkpoint(options.checkpoint_path, result.checkpoint);
    auto log_path = options.checkpoint_path;
    log_path += ".loss.csv";
    write_loss_log(log_path, result.steps);
  }
  return result;
}

TrainResult train(const TrainConfig& config, const std::filesystem::path& dataset_root, const std::string& category,
                  const std::filesystem::path& texture_root, const TrainOptions& options) {
  const DatasetIndex index = load_dataset(dataset_root, category, Split::train);
  if (index.train.empty()) throw IoError("no training images under " + (dataset_root / category / "train/good").string());
  const auto images = load_images(index.train, config.image_size);
  const auto textures = load_image_dir(texture_root, config.image_size);
  return train(config, images, textures, options);
}

}  // namespace pouta

#include "prelude.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "pouta/checkpoint.hpp"
#include "pouta/config.hpp"
#include "pouta/errors.hpp"
#include "pouta/fixture.hpp"
#include "pouta/model.hpp"
#include "pouta/training.hpp"

using namespace pouta;
namespace fs = std::filesystem;

namespace {

TrainConfig tiny_config(Variant variant = Variant::full) {
  TrainConfig c;
  c.variant = variant;
  c.image_size = 32;
  c.base_width = 4;
  c.aggregate_channels = 8;
  c.batch_size = 2;
  c.epochs = 2;
  c.lr_decay_epochs = {1};
  c.max_steps = 3;
  c.seed = 42;
  return c;
}

std::vector<Image> tiny_images(int n) {
  std::vector<Image> out;
  for (int i = 0; i < n; ++i) out.push_back(toy_pattern(32, ToyPattern::stripes, 100 + i));
  return out;
}

std::vector<Image> tiny_textures() { return {toy_texture(32, 1), toy_texture(32, 2)}; }

std::set<std::string> parameter_names(const torch::nn::Module& m) {
  std::set<std::string> names;
  for (const auto& p : m.named_parameters()) names.insert(p.key());
  return names;
}

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("pouta_pipeline_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

torch::Tensor probe_heatmap(AnomalyModel& model) {
  torch::manual_seed(99);
  const auto size = model->options().image_size;
  const auto x = torch::rand({2, 3, size, size});
  model->eval();
  torch::NoGradGuard no_grad;
  return model->forward(x).heatmap;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("learning rate schedule values") {
  const TrainConfig c;
  CHECK(lr_at_epoch(0, c) == 0.0002);
  CHECK(lr_at_epoch(479, c) == 0.0002);
  CHECK(lr_at_epoch(480, c) == 0.00004);
  CHECK(lr_at_epoch(500, c) == 0.00004);
  CHECK(lr_at_epoch(540, c) == 0.000008);
  CHECK(lr_at_epoch(590, c) == 0.000008);
  CHECK(lr_at_epoch(599, c) == 0.000008);
  CHECK_THROWS_AS(lr_at_epoch(600, c), ArgumentError);
  CHECK_THROWS_AS(lr_at_epoch(-1, c), ArgumentError);
  double previous = lr_at_epoch(0, c);
  for (int e = 1; e < c.epochs; ++e) {
    CHECK(lr_at_epoch(e, c) <= previous);
    previous = lr_at_epoch(e, c);
  }
}

TEST_CASE("few-shot subsets") {
  const auto all = few_shot_subset(10, 10, 3);
  CHECK(all == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  CHECK(few_shot_subset(50, 4, 7) == few_shot_subset(50, 4, 7));
  CHECK_THROWS_AS(few_shot_subset(5, 6, 0), ArgumentError);

  std::set<std::vector<std::size_t>> pairs;
  std::vector<int> hits(20, 0);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = few_shot_subset(20, 2, seed);
    CHECK(s.size() == 2);
    CHECK(s[0] < s[1]);
    pairs.insert(s);
    for (auto i : s) ++hits[i];
  }
  CHECK(pairs.size() > 1);
  // Every index has a fair chance; 10 expected hits each.
  for (int h : hits) CHECK(h > 0);

  const std::vector<std::string> names{"a", "b", "c", "d"};
  CHECK(few_shot_subset(names, 4, 1) == names);
}

TEST_CASE("few-shot schedule rescaling") {
  TrainConfig c;
  c.k_shot = 4;
  CHECK(effective_schedule(c).epochs == 600);
  c.few_shot_epochs = 100;
  const auto s = effective_schedule(c);
  CHECK(s.epochs == 100);
  CHECK(s.lr_decay_epochs == std::vector<int>{80, 90});
}

TEST_CASE("full model has fewer parameters than the vanilla baseline") {
  const TrainConfig c;
  TrainConfig v = c;
  v.variant = Variant::vanilla;
  const auto full = parameter_count(*build_variant(c));
  const auto vanilla = parameter_count(*build_variant(v));
  MESSAGE("full " << full << " vanilla " << vanilla);
  CHECK(full < vanilla);
}

TEST_CASE("variant lattice") {
  ModelOptions o;
  o.widths = widths_from_base(8);
  o.image_size = 64;
  o.aggregate_channels = 8;
  auto make = [&](Variant v) {
    o.variant = v;
    return build_variant(o);
  };
  auto base = make(Variant::base);
  auto hsg = make(Variant::base_hsg);
  auto mss = make(Variant::base_mss);
  auto full = make(Variant::full);
  auto vanilla = make(Variant::vanilla);

  CHECK(parameter_count(*base, "discriminative.hsg") == 0);
  CHECK(parameter_count(*base, "discriminative.mss") == 0);
  CHECK(parameter_count(*hsg, "discriminative.hsg") > 0);
  CHECK(parameter_count(*mss, "discriminative.mss") > 0);
  CHECK(parameter_count(*hsg, "discriminative.mss") == 0);

  const auto nb = parameter_names(*base), nh = parameter_names(*hsg), nm = parameter_names(*mss), nf = parameter_names(*full);
  CHECK(std::includes(nh.begin(), nh.end(), nb.begin(), nb.end()));
  CHECK(std::includes(nm.begin(), nm.end(), nb.begin(), nb.end()));
  CHECK(std::includes(nf.begin(), nf.end(), nh.begin(), nh.end()));
  CHECK(std::includes(nf.begin(), nf.end(), nm.begin(), nm.end()));
  CHECK(nh.size() > nb.size());

  // The vanilla baseline shares only the reconstructive network.
  const auto full_params = full->named_parameters();
  for (const auto& p : vanilla->named_parameters()) {
    const bool reconstructive = p.key().rfind("reconstructive.", 0) == 0;
    const auto* match = full_params.find(p.key());
    if (reconstructive) {
      REQUIRE(match != nullptr);
      CHECK(match->sizes() == p.value().sizes());
    } else {
      CHECK(match == nullptr);
    }
  }
}

TEST_CASE("variant tags") {
  for (Variant v : {Variant::vanilla, Variant::base, Variant::base_hsg, Variant::base_mss, Variant::full}) {
    CHECK(parse_variant(to_string(v)) == v);
  }
  CHECK(to_string(Variant::base_hsg) == "base+hsg");
  CHECK_THROWS_AS(parse_variant("base+xyz"), ArgumentError);
}

TEST_CASE("config round trip and overrides") {
  TrainConfig c;
  c.epochs = 50;
  c.lr_decay_epochs = {10, 20, 30};
  c.variant = Variant::base_mss;
  c.k_shot = 8;
  c.loss.lambda = {0.5, 0.25, 0.125, 0.0625};
  c.synthesis.transforms = {Transform::rotation};
  c.synthesis.normal_fraction = 0.3;
  c.texture_dir = "/tmp/textures";
  const auto back = parse_ini(to_ini(c));
  CHECK(to_map(back) == to_map(c));
  CHECK(to_ini(back) == to_ini(c));

  TrainConfig o;
  apply_overrides(o, {{"train.batch_size", "4"}, {"loss.lambda3", "0.7"}, {"train.variant", "base"}});
  CHECK(o.batch_size == 4);
  CHECK(o.loss.lambda[2] == 0.7);
  CHECK(o.variant == Variant::base);
  CHECK_THROWS_AS(apply_overrides(o, {{"train.nonsense", "1"}}), ArgumentError);
  CHECK_THROWS_AS(apply_overrides(o, {{"train.epochs", "abc"}}), ArgumentError);

  TrainConfig bad;
  bad.lr_decay_epochs = {700};
  CHECK_THROWS_AS(bad.validate(), ArgumentError);
  CHECK_THROWS_AS(parse_ini("[train]\nimage_size = 100\n").validate(), ArgumentError);
}

TEST_CASE("every config field has a key") {
  const auto keys = to_map(TrainConfig{});
  for (const char* k : {"train.epochs", "train.batch_size", "train.base_lr", "train.lr_decay_epochs",
                        "train.lr_decay_factor", "train.image_size", "train.variant", "train.k_shot", "train.seed",
                        "loss.lambda1", "loss.lambda4", "loss.focal_gamma", "loss.focal_alpha",
                        "synthesis.normal_fraction", "synthesis.transforms"}) {
    CHECK_MESSAGE(keys.count(k) == 1, k);
  }
}

TEST_CASE("checkpoint round trip is bit exact") {
  torch::manual_seed(5);
  const auto config = tiny_config();
  auto model = build_variant(config);
  const auto ckpt = capture_checkpoint(model, config, 3);
  const auto bytes = encode_checkpoint(ckpt);
  const auto decoded = decode_checkpoint(bytes);
  CHECK(encode_checkpoint(decoded) == bytes);
  CHECK(decoded.epoch == 3);
  CHECK((decoded.arrays == ckpt.arrays));

  const auto dir = scratch_dir("ckpt");
  save_checkpoint(dir / "m.ckpt", ckpt);
  const auto loaded = load_checkpoint(dir / "m.ckpt");
  save_checkpoint(dir / "m2.ckpt", loaded);
  std::ifstream a(dir / "m.ckpt", std::ios::binary), b(dir / "m2.ckpt", std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
  CHECK(sa == sb);

  auto restored = restore_model(loaded);
  CHECK(torch::equal(probe_heatmap(model), probe_heatmap(restored)));
}

TEST_CASE("corrupt checkpoints are rejected") {
  torch::manual_seed(6);
  const auto config = tiny_config();
  auto model = build_variant(config);
  auto bytes = encode_checkpoint(capture_checkpoint(model, config, 0));

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bad_magic), CheckpointError);
  auto bad_version = bytes;
  bad_version[6] = 9;
  CHECK_THROWS_AS(decode_checkpoint(bad_version), CheckpointError);
  auto truncated = bytes;
  truncated.resize(bytes.size() / 2);
  CHECK_THROWS_AS(decode_checkpoint(truncated), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/model.ckpt"), std::exception);

  // A checkpoint of one variant does not load into another graph.
  auto other = build_variant(tiny_config(Variant::base));
  CHECK_THROWS_AS(restore_weights(other, decode_checkpoint(bytes)), CheckpointError);
}

TEST_CASE("training: vanilla never evaluates the supervision loss") {
  const auto vanilla = train(tiny_config(Variant::vanilla), tiny_images(4), tiny_textures());
  CHECK(vanilla.mss_evaluations == 0);
  CHECK(vanilla.steps.size() == 3);
  const auto base = train(tiny_config(Variant::base), tiny_images(4), tiny_textures());
  CHECK(base.mss_evaluations == 0);
  const auto full = train(tiny_config(Variant::full), tiny_images(4), tiny_textures());
  CHECK(full.mss_evaluations == 3);
}

TEST_CASE("training is reproducible and independent of worker count") {
  TrainOptions one;
  one.workers = 1;
  TrainOptions three;
  three.workers = 3;
  const auto a = train(tiny_config(), tiny_images(6), tiny_textures(), one);
  const auto b = train(tiny_config(), tiny_images(6), tiny_textures(), three);
  CHECK(a.final_loss == b.final_loss);
  CHECK((a.checkpoint.arrays == b.checkpoint.arrays));
  auto c = tiny_config();
  c.seed = 43;
  const auto d = train(c, tiny_images(6), tiny_textures(), one);
  CHECK(d.final_loss != a.final_loss);
}

TEST_CASE("one optimizer step updates every sub-network") {
  auto config = tiny_config();
  config.max_steps = 1;
  torch::manual_seed(config.seed);
  auto initial = build_variant(config);
  const auto before = capture_checkpoint(initial, config, 0);
  const auto after = train(config, tiny_images(2), tiny_textures()).checkpoint;
  REQUIRE(before.arrays.size() == after.arrays.size());
  bool rec_changed = false, disc_changed = false;
  for (std::size_t i = 0; i < before.arrays.size(); ++i) {
    const auto& name = before.arrays[i].name;
    if (before.arrays[i].bytes == after.arrays[i].bytes || name.find("running") != std::string::npos) continue;
    if (name.rfind("reconstructive.encoder", 0) == 0) rec_changed = true;
    if (name.rfind("discriminative.", 0) == 0) disc_changed = true;
  }
  CHECK(rec_changed);
  CHECK(disc_changed);
}

TEST_CASE("training writes the checkpoint and loss log") {
  const auto dir = scratch_dir("train");
  TrainOptions opt;
  opt.checkpoint_path = dir / "model.ckpt";
  std::ostringstream log;
  opt.log = &log;
  const auto result = train(tiny_config(), tiny_images(4), tiny_textures(), opt);
  CHECK(fs::exists(dir / "model.ckpt"));
  CHECK(fs::exists(dir / "model.ckpt.loss.csv"));
  CHECK(log.str().find("epoch") != std::string::npos);
  CHECK((load_checkpoint(dir / "model.ckpt").arrays == result.checkpoint.arrays));
}

TEST_CASE("k-shot training uses the support set") {
  auto c = tiny_config();
  c.k_shot = 2;
  c.batch_size = 8;
  c.max_steps = 0;
  c.epochs = 2;
  const auto r = train(c, tiny_images(6), tiny_textures());
  CHECK(r.steps.size() == 2);
  c.k_shot = 7;
  CHECK_THROWS_AS(train(c, tiny_images(6), tiny_textures()), ArgumentError);
}

TEST_CASE("empty training set is an error") {
  CHECK_THROWS_AS(train(tiny_config(), std::vector<Image>{}, tiny_textures()), IoError);
  const auto dir = scratch_dir("empty");
  fs::create_directories(dir / "cat/train/good");
  CHECK_THROWS_AS(train(tiny_config(), dir, "cat", dir / "textures"), IoError);
}

}

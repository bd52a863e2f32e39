#include "pouta/config.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include "pouta/errors.hpp"

namespace pouta {
namespace {

namespace pt = boost::property_tree;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  T out{};
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || ptr != end) throw ArgumentError("config key '" + key + "': cannot parse '" + value + "'");
  return out;
}

}  // namespace

std::string to_string(Variant variant) {
  switch (variant) {
    case Variant::vanilla: return "vanilla";
    case Variant::base: return "base";
    case Variant::base_hsg: return "base+hsg";
    case Variant::base_mss: return "base+mss";
    case Variant::full: return "full";
  }
  return "full";
}

Variant parse_variant(const std::string& tag) {
  if (tag == "vanilla") return Variant::vanilla;
  if (tag == "base") return Variant::base;
  if (tag == "base+hsg") return Variant::base_hsg;
  if (tag == "base+mss") return Variant::base_mss;
  if (tag == "full") return Variant::full;
  throw ArgumentError("unknown variant '" + tag + "' (expected vanilla, base, base+hsg, base+mss or full)");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ArgumentError("train.epochs must be >= 1");
  if (batch_size < 1) throw ArgumentError("train.batch_size must be >= 1");
  if (!(base_lr > 0.0)) throw ArgumentError("train.base_lr must be > 0");
  if (!(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0)) throw ArgumentError("train.lr_decay_factor must lie in (0, 1]");
  for (int e : lr_decay_epochs) {
    if (e < 0 || e >= epochs) throw ArgumentError("train.lr_decay_epochs must lie in [0, epochs)");
  }
  if (image_size < 16 || image_size % 16 != 0) throw ArgumentError("train.image_size must be a multiple of 16 (>= 16)");
  if (k_shot && *k_shot < 1) throw ArgumentError("train.k_shot must be >= 1");
  if (few_shot_epochs < 0) throw ArgumentError("train.few_shot_epochs must be >= 0");
  if (max_steps < 0) throw ArgumentError("train.max_steps must be >= 0");
  if (base_width < 1) throw ArgumentError("model.base_width must be >= 1");
  if (aggregate_channels < 1) throw ArgumentError("model.aggregate_channels must be >= 1");
  loss.validate();
  synthesis.validate();
}

ConfigMap to_map(const TrainConfig& c) {
  ConfigMap m;
  m["train.epochs"] = fmt::format("{}", c.epochs);
  m["train.batch_size"] = fmt::format("{}", c.batch_size);
  m["train.base_lr"] = fmt::format("{}", c.base_lr);
  m["train.lr_decay_epochs"] = fmt::format("{}", fmt::join(c.lr_decay_epochs, ","));
  m["train.lr_decay_factor"] = fmt::format("{}", c.lr_decay_factor);
  m["train.image_size"] = fmt::format("{}", c.image_size);
  m["train.variant"] = to_string(c.variant);
  m["train.k_shot"] = c.k_shot ? fmt::format("{}", *c.k_shot) : "";
  m["train.few_shot_epochs"] = fmt::format("{}", c.few_shot_epochs);
  m["train.max_steps"] = fmt::format("{}", c.max_steps);
  m["train.seed"] = fmt::format("{}", c.seed);
  m["model.base_width"] = fmt::format("{}", c.base_width);
  m["model.aggregate_channels"] = fmt::format("{}", c.aggregate_channels);
  for (std::size_t i = 0; i < 4; ++i) m[fmt::format("loss.lambda{}", i + 1)] = fmt::format("{}", c.loss.lambda[i]);
  m["loss.focal_gamma"] = fmt::format("{}", c.loss.focal_gamma);
  m["loss.focal_alpha"] = fmt::format("{}", c.loss.focal_alpha);
  const auto& s = c.synthesis;
  m["synthesis.perlin_min_exponent"] = fmt::format("{}", s.frequency.min_exponent);
  m["synthesis.perlin_max_exponent"] = fmt::format("{}", s.frequency.max_exponent);
  m["synthesis.perlin_threshold"] = fmt::format("{}", s.threshold);
  m["synthesis.opacity_min"] = fmt::format("{}", s.opacity_min);
  m["synthesis.opacity_max"] = fmt::format("{}", s.opacity_max);
  m["synthesis.mix_min"] = fmt::format("{}", s.mix_min);
  m["synthesis.mix_max"] = fmt::format("{}", s.mix_max);
  m["synthesis.normal_fraction"] = fmt::format("{}", s.normal_fraction);
  m["synthesis.mask_attempts"] = fmt::format("{}", s.mask_attempts);
  std::vector<std::string> transforms;
  for (Transform t : s.transforms) transforms.push_back(to_string(t));
  m["synthesis.transforms"] = fmt::format("{}", fmt::join(transforms, ","));
  m["data.texture_dir"] = c.texture_dir;
  return m;
}

void apply_overrides(TrainConfig& c, const ConfigMap& values) {
  for (const auto& [key, raw] : values) {
    const std::string value = trim(raw);
    if (key == "train.epochs") c.epochs = parse_number<int>(key, value);
    else if (key == "train.batch_size") c.batch_size = parse_number<int>(key, value);
    else if (key == "train.base_lr") c.base_lr = parse_number<double>(key, value);
    else if (key == "train.lr_decay_epochs") {
      c.lr_decay_epochs.clear();
      for (const auto& item : split_list(value)) c.lr_decay_epochs.push_back(parse_number<int>(key, item));
    } else if (key == "train.lr_decay_factor") c.lr_decay_factor = parse_number<double>(key, value);
    else if (key == "train.image_size") c.image_size = parse_number<int>(key, value);
    else if (key == "train.variant") c.variant = parse_variant(value);
    else if (key == "train.k_shot") {
      if (value.empty() || value == "none") c.k_shot.reset();
      else c.k_shot = parse_number<int>(key, value);
    } else if (key == "train.few_shot_epochs") c.few_shot_epochs = parse_number<int>(key, value);
    else if (key == "train.max_steps") c.max_steps = parse_number<int>(key, value);
    else if (key == "train.seed") c.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "model.base_width") c.base_width = parse_number<int>(key, value);
    else if (key == "model.aggregate_channels") c.aggregate_channels = parse_number<int>(key, value);
    else if (key == "loss.lambda1") c.loss.lambda[0] = parse_number<double>(key, value);
    else if (key == "loss.lambda2") c.loss.lambda[1] = parse_number<double>(key, value);
    else if (key == "loss.lambda3") c.loss.lambda[2] = parse_number<double>(key, value);
    else if (key == "loss.lambda4") c.loss.lambda[3] = parse_number<double>(key, value);
    else if (key == "loss.focal_gamma") c.loss.focal_gamma = parse_number<double>(key, value);
    else if (key == "loss.focal_alpha") c.loss.focal_alpha = parse_number<double>(key, value);
    else if (key == "synthesis.perlin_min_exponent") c.synthesis.frequency.min_exponent = parse_number<int>(key, value);
    else if (key == "synthesis.perlin_max_exponent") c.synthesis.frequency.max_exponent = parse_number<int>(key, value);
    else if (key == "synthesis.perlin_threshold") c.synthesis.threshold = parse_number<double>(key, value);
    else if (key == "synthesis.opacity_min") c.synthesis.opacity_min = parse_number<double>(key, value);
    else if (key == "synthesis.opacity_max") c.synthesis.opacity_max = parse_number<double>(key, value);
    else if (key == "synthesis.mix_min") c.synthesis.mix_min = parse_number<double>(key, value);
    else if (key == "synthesis.mix_max") c.synthesis.mix_max = parse_number<double>(key, value);
    else if (key == "synthesis.normal_fraction") c.synthesis.normal_fraction = parse_number<double>(key, value);
    else if (key == "synthesis.mask_attempts") c.synthesis.mask_attempts = parse_number<int>(key, value);
    else if (key == "synthesis.transforms") {
      c.synthesis.transforms.clear();
      for (const auto& item : split_list(value)) c.synthesis.transforms.push_back(parse_transform(item));
    } else if (key == "data.texture_dir") c.texture_dir = value;
    else throw ArgumentError("unknown config key '" + key + "'");
  }
}

TrainConfig config_from_map(const ConfigMap& values) {
  TrainConfig c;
  apply_overrides(c, values);
  return c;
}

std::string to_ini(const TrainConfig& config) {
  pt::ptree tree;
  for (const auto& [key, value] : to_map(config)) tree.put(pt::ptree::path_type(key, '.'), value);
  std::ostringstream out;
  pt::write_ini(out, tree);
  return out.str();
}

namespace {

ConfigMap flatten(const pt::ptree& tree) {
  ConfigMap values;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ArgumentError("config: key '" + section + "' must live inside a [section]");
    for (const auto& [key, leaf] : body) values[section + "." + key] = leaf.data();
  }
  return values;
}

}  // namespace

TrainConfig parse_ini(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ArgumentError(std::string("config: ") + e.what());
  }
  return config_from_map(flatten(tree));
}

ConfigMap read_ini_map(const std::filesystem::path& path) {
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw IoError("cannot read config " + path.string() + ": " + e.what());
  }
  return flatten(tree);
}

TrainConfig load_config(const std::filesystem::path& path) { return config_from_map(read_ini_map(path)); }

TrainConfig effective_schedule(const TrainConfig& config) {
  TrainConfig out = config;
  if (config.k_shot && config.few_shot_epochs > 0 && config.few_shot_epochs != config.epochs) {
    const double scale = static_cast<double>(config.few_shot_epochs) / static_cast<double>(config.epochs);
    out.epochs = config.few_shot_epochs;
    for (int& e : out.lr_decay_epochs) e = static_cast<int>(std::lround(e * scale));
  }
  return out;
}

}  // namespace pouta

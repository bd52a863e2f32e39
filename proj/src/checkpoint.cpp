#include "pouta/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "pouta/errors.hpp"

namespace pouta {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint encoding assumes a little-endian host");

class Writer {
 public:
  template <typename T>
  void put(T value) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    out_.insert(out_.end(), p, p + sizeof(T));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), p, p + n);
  }
  void put_string(const std::string& s) {
    put<std::uint64_t>(s.size());
    put_bytes(s.data(), s.size());
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}

  template <typename T>
  T get() {
    T value;
    std::memcpy(&value, take(sizeof(T)), sizeof(T));
    return value;
  }
  const std::uint8_t* take(std::size_t n) {
    if (n > in_.size() - pos_) throw CheckpointError("checkpoint is truncated");
    const auto* p = in_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::string get_string(std::size_t n) {
    const auto* p = take(n);
    return {reinterpret_cast<const char*>(p), n};
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

ArrayType array_type(const torch::Tensor& t) {
  switch (t.scalar_type()) {
    case torch::kFloat32: return ArrayType::float32;
    case torch::kFloat64: return ArrayType::float64;
    case torch::kInt64: return ArrayType::int64;
    default: throw CheckpointError("unsupported tensor type " + std::string(c10::toString(t.scalar_type())));
  }
}

torch::Dtype torch_type(ArrayType type) {
  switch (type) {
    case ArrayType::float32: return torch::kFloat32;
    case ArrayType::float64: return torch::kFloat64;
    case ArrayType::int64: return torch::kInt64;
  }
  throw CheckpointError("unknown array type");
}

NamedArray to_array(const std::string& name, const torch::Tensor& tensor) {
  const auto t = tensor.detach().contiguous().cpu();
  NamedArray a;
  a.name = name;
  a.type = array_type(t);
  a.shape.assign(t.sizes().begin(), t.sizes().end());
  const auto n = static_cast<std::size_t>(t.numel() * t.element_size());
  a.bytes.resize(n);
  if (n > 0) std::memcpy(a.bytes.data(), t.data_ptr(), n);
  return a;
}

}  // namespace

Checkpoint capture_checkpoint(const AnomalyModel& model, const TrainConfig& config, std::uint32_t epoch) {
  Checkpoint ck;
  ck.config = config;
  ck.epoch = epoch;
  for (const auto& item : model->named_parameters()) ck.arrays.push_back(to_array(item.key(), item.value()));
  for (const auto& item : model->named_buffers()) ck.arrays.push_back(to_array(item.key(), item.value()));
  return ck;
}

void restore_weights(AnomalyModel& model, const Checkpoint& checkpoint) {
  if (checkpoint.config.variant != model->variant()) {
    throw CheckpointError("checkpoint variant '" + to_string(checkpoint.config.variant) + "' does not match model '" +
                          to_string(model->variant()) + "'");
  }
  torch::NoGradGuard no_grad;
  auto params = model->named_parameters();
  auto buffers = model->named_buffers();
  if (params.size() + buffers.size() != checkpoint.arrays.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(checkpoint.arrays.size()) + " arrays, model expects " +
                          std::to_string(params.size() + buffers.size()));
  }
  for (const auto& a : checkpoint.arrays) {
    torch::Tensor* target = params.find(a.name);
    if (target == nullptr) target = buffers.find(a.name);
    if (target == nullptr) throw CheckpointError("checkpoint array '" + a.name + "' has no counterpart in the model");
    if (std::vector<std::int64_t>(target->sizes().begin(), target->sizes().end()) != a.shape ||
        torch_type(a.type) != target->scalar_type()) {
      throw CheckpointError("checkpoint array '" + a.name + "' disagrees with the model in shape or type");
    }
    const auto source = torch::from_blob(const_cast<std::uint8_t*>(a.bytes.data()), a.shape,
                                         torch::TensorOptions().dtype(torch_type(a.type)));
    target->copy_(source);
  }
}

AnomalyModel restore_model(const Checkpoint& checkpoint) {
  auto model = build_variant(checkpoint.config);
  restore_weights(model, checkpoint);
  model->eval();
  return model;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint) {
  Writer w;
  w.put_bytes(kCheckpointMagic, 6);
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put_string(to_ini(checkpoint.config));
  w.put<std::uint32_t>(checkpoint.epoch);
  w.put<std::uint64_t>(checkpoint.arrays.size());
  for (const auto& a : checkpoint.arrays) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(a.name.size()));
    w.put_bytes(a.name.data(), a.name.size());
    w.put<std::uint8_t>(static_cast<std::uint8_t>(a.type));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(a.shape.size()));
    for (auto d : a.shape) w.put<std::int64_t>(d);
    w.put<std::uint64_t>(a.bytes.size());
    w.put_bytes(a.bytes.data(), a.bytes.size());
  }
  return w.take();
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (bytes.size() < 6 || r.get_string(6) != std::string(kCheckpointMagic, 6)) {
    throw CheckpointError("not a checkpoint: missing POUTA1 magic");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint format version " + std::to_string(version) + " (this build reads " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint ck;
  const auto config_len = r.get<std::uint64_t>();
  try {
    ck.config = parse_ini(r.get_string(config_len));
  } catch (const ArgumentError& e) {
    throw CheckpointError(std::string("checkpoint config snapshot is invalid: ") + e.what());
  }
  ck.epoch = r.get<std::uint32_t>();
  const auto count = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedArray a;
    a.name = r.get_string(r.get<std::uint32_t>());
    const auto type = r.get<std::uint8_t>();
    if (type < 1 || type > 3) throw CheckpointError("checkpoint array '" + a.name + "' has unknown type tag");
    a.type = static_cast<ArrayType>(type);
    const auto rank = r.get<std::uint32_t>();
    std::int64_t elements = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      a.shape.push_back(r.get<std::int64_t>());
      if (a.shape.back() < 0) throw CheckpointError("checkpoint array '" + a.name + "' has a negative dimension");
      elements *= a.shape.back();
    }
    const auto n = r.get<std::uint64_t>();
    const std::uint64_t element_size = a.type == ArrayType::float32 ? 4 : 8;
    if (n != static_cast<std::uint64_t>(elements) * element_size) {
      throw CheckpointError("checkpoint array '" + a.name + "' has inconsistent byte length");
    }
    const auto* p = r.take(n);
    a.bytes.assign(p, p + n);
    ck.arrays.push_back(std::move(a));
  }
  if (!r.done()) throw CheckpointError("checkpoint has trailing bytes");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const auto bytes = encode_checkpoint(checkpoint);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

}  // namespace pouta

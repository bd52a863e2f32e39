#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pouta/config.hpp"
#include "pouta/model.hpp"

namespace pouta {

inline constexpr char kCheckpointMagic[] = "POUTA1";
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class ArrayType : std::uint8_t { float32 = 1, float64 = 2, int64 = 3 };

struct NamedArray {
  std::string name;
  ArrayType type = ArrayType::float32;
  std::vector<std::int64_t> shape;
  std::vector<std::uint8_t> bytes;

  bool operator==(const NamedArray&) const = default;
};

// On disk (little endian):
//   "POUTA1" | u32 version | u64 n + config INI text | u32 epoch | u64 count |
//   count x (u32 n + name | u8 type | u32 rank | rank x i64 dims | u64 n + raw bytes)
struct Checkpoint {
  TrainConfig config;
  std::uint32_t epoch = 0;
  std::vector<NamedArray> arrays;
};

Checkpoint capture_checkpoint(const AnomalyModel& model, const TrainConfig& config, std::uint32_t epoch);

// Throws CheckpointError if names, shapes or the variant disagree with the graph.
void restore_weights(AnomalyModel& model, const Checkpoint& checkpoint);
AnomalyModel restore_model(const Checkpoint& checkpoint);

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

// Writes to a sibling temp file and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace pouta

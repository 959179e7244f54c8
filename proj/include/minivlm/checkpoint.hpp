#pragma once

// Flat binary checkpoint, little-endian throughout:
//
//   "MMDA"                      4 bytes magic
//   u32 version                 kCheckpointVersion
//   u32 n, n bytes              model config as compact JSON
//   u32 record_count
//   record_count times:
//     u32 n, n bytes            group name
//     u32 n, n bytes            tensor name
//     u32 rank (always 2), u64 rows, u64 cols
//     rows * cols f64           row-major values (IEEE-754 bit patterns)

#include "minivlm/model.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace minivlm {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
};

std::vector<unsigned char> encode_checkpoint(const ModelConfig& cfg, const ModelParams& params);

/// Throws FormatError on bad magic, a version mismatch, or records that do
/// not match the structure implied by the embedded config.
Checkpoint decode_checkpoint(std::span<const unsigned char> bytes);

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                     const ModelParams& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace minivlm

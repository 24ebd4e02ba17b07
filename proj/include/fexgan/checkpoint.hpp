#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fexgan {

// Binary layout, all integers little-endian:
//
//   "FEXM"                      4 bytes magic
//   version                     u32
//   config_len, config          u32 + UTF-8 bytes
//   repeated until the trailer:
//     name_len, name            u32 + UTF-8 bytes
//     dtype                     u8  (0 f32, 1 f64, 2 i64, 3 u8)
//     rank, dims[rank]          u32 + u64 each
//     data                      raw little-endian elements, row-major
//   crc                         u64 CRC-64/XZ of every preceding byte
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[4] = {'F', 'E', 'X', 'M'};

struct TensorRecord {
  std::string name;
  torch::Tensor value;
};

struct CheckpointData {
  std::uint32_t version = kCheckpointVersion;
  std::string config_text;
  std::vector<TensorRecord> records;

  /// Throws IntegrityError when the record is missing.
  const torch::Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const;
};

std::uint64_t crc64(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_checkpoint(const CheckpointData& data);

/// Throws VersionError for a foreign version and IntegrityError for bad
/// magic, truncation or a CRC mismatch.
CheckpointData decode_checkpoint(std::span<const std::uint8_t> bytes);

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data);
CheckpointData read_checkpoint(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

/// SHA-256 of a file, as 64 hex digits.
std::string file_checksum(const std::filesystem::path& path);

}  // namespace fexgan

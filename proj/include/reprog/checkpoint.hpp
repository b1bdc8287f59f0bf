#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "reprog/model.hpp"

namespace reprog {

// Checkpoint layout (all integers little-endian):
//   [0, 8)   magic "RPKMODEL"
//   [8, 12)  u32 format version (1)
//   [12, 16) u32 manifest length in bytes
//   manifest: u32 layer count, then (u32 kind, u32 in_dim, u32 out_dim) per layer
//   payload:  f64 input range lo, f64 input range hi, then for each dense layer
//             its weights (row-major, out x in) followed by its bias
//   trailer:  32-byte SHA-256 of manifest || payload
inline constexpr std::array<char, 8> kCheckpointMagic = {'R', 'P', 'K', 'M', 'O', 'D', 'E', 'L'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> manifest_bytes(const FrozenModel& model);
std::vector<std::uint8_t> payload_bytes(const FrozenModel& model);

std::vector<std::uint8_t> encode_checkpoint(const FrozenModel& model);
// Throws ParseError carrying the byte offset of the first inconsistency.
FrozenModel decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const FrozenModel& model, const std::filesystem::path& path);
FrozenModel load_checkpoint(const std::filesystem::path& path);

std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> bytes);
std::string to_hex(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace reprog

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "adtrack/backbone.hpp"
#include "adtrack/gating.hpp"

namespace adtrack {

/// Binary layout (all integers little-endian):
///   "ADTK1"
///   u32 entry count
///   per entry: u32 name length, UTF-8 name, u8 rank, rank x u32 extents,
///              prod(extents) x f32 values
///   u32 metadata length, UTF-8 JSON metadata
///
/// Backbone tensors are named backbone.b<block>.c<layer>.{kernel,bias};
/// gate weights gates.phi<i>. Metadata carries at least "preset".
struct Checkpoint {
  std::optional<BackboneWeights> weights;
  std::optional<GateParams> gates;
  nlohmann::json meta = nlohmann::json::object();
};

inline constexpr char kCheckpointMagic[] = "ADTK1";

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);

/// Throws FormatError (with byte offset) on bad magic, truncation or
/// inconsistent extents; nothing is returned on failure.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Writes through a temporary file in the same directory and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

// FNV-1a, hex encoded; used for manifests and phase-separation checks.
std::string checksum_hex(std::span<const std::uint8_t> bytes);
std::string weights_checksum(const BackboneWeights& weights);

}  // namespace adtrack

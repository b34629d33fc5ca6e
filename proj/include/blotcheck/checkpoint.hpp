#ifndef BLOTCHECK_CHECKPOINT_HPP
#define BLOTCHECK_CHECKPOINT_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "blotcheck/siamese.hpp"

namespace blotcheck {

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct Checkpoint {
  SiameseModel<float> model;
  std::uint64_t training_seed = 0;
};

/// "BLCK" | u16 version | u32 header length | JSON header | f32 parameters (declaration order)
/// | CRC32 of everything before it. All integers and floats little-endian.
std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_model(const SiameseModel<float>& model, const std::filesystem::path& path, std::uint64_t training_seed = 0);
/// Throws IoError, ChecksumMismatch, VersionMismatch, FormatError.
Checkpoint load_checkpoint(const std::filesystem::path& path);
SiameseModel<float> load_model(const std::filesystem::path& path);

}  // namespace blotcheck

#endif  // BLOTCHECK_CHECKPOINT_HPP

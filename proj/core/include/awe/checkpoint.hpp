#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "awe/dataset.hpp"
#include "awe/network.hpp"

namespace awe {

/// A trained model plus everything needed to apply it to raw features.
struct Checkpoint {
  NetworkConfig config;
  NetworkParams<float> params;
  int epoch = 0;
  double dev_ap = 0.0;
  std::vector<std::string> vocabulary;  // classifier output labels, in output order
  FeatureNormalizer normalizer;         // empty when features are used as-is
};

/// Layout (little-endian): magic "AWEC", u16 version; config block (u8 cell,
/// u32 S, u32 F, u32 D, u32 H, u32 fc_dim, u32 output_dim, u8 head,
/// f64 recurrent dropout, f64 fc dropout); u32 epoch, f64 dev AP; u32 vocabulary
/// size + u16-prefixed labels; u32 normalizer dim + f32 mean[dim] + f32 inv_std[dim];
/// u64 parameter count + f32 parameters in canonical order (matrices row-major);
/// u64 FNV-1a checksum over every preceding byte.
inline constexpr std::uint16_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace awe

#pragma once

#include "lidarfcn/network.hpp"

#include <filesystem>

namespace lfcn {

// Checkpoint layout, all integers little-endian:
//   "LFCN" | u32 version = 1 | u32 layer count |
//   per layer: u16 name length, name bytes, u8 dim count, u32 dims (kernel),
//              f32 kernel values, f32 bias values (one per output channel).

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const ParameterSet<float>& params, const NetworkSpec& spec,
                     const std::filesystem::path& path);

/// Reads and validates a checkpoint against `spec`. Either every layer loads
/// or a DataError is thrown (truncation, bad magic/version) or a ConfigError
/// naming the first layer that does not match the network layout.
ParameterSet<float> load_checkpoint(const std::filesystem::path& path, const NetworkSpec& spec);

}  // namespace lfcn

#pragma once

#include "dipreg/warp.hpp"

#include <filesystem>

namespace dipreg {

// Displacement field file ("DIPF"), 16-byte header, little-endian:
//   bytes 0..3   magic "DIPF"
//   bytes 4..5   version (u16), currently 1
//   bytes 6..7   reserved, zero
//   bytes 8..11  height (u32)
//   bytes 12..15 width (u32)
// followed by 2*H*W float32 samples: the full x-displacement channel,
// row-major, then the y channel. Total size is 16 + 8*H*W bytes.

inline constexpr std::uint16_t kFieldFileVersion = 1;

/// Atomic write of a field in the format above (values narrowed to
/// float32).
void save_field(const std::filesystem::path& path,
                const DisplacementField& field);

/// Reads and validates a field file; errors name the path and reason.
DisplacementField load_field(const std::filesystem::path& path);

}  // namespace dipreg

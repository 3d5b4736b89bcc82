#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace dipreg {

/// Reads an entire file; throws std::runtime_error naming the path.
std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path);

/// Writes via a temp file in the same directory followed by a rename, so
/// interrupted runs never leave a truncated file at `path`.
void atomic_write_file(const std::filesystem::path& path,
                       const void* data, std::size_t size);
void atomic_write_file(const std::filesystem::path& path,
                       const std::string& text);

}  // namespace dipreg

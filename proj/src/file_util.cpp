#include "dipreg/file_util.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <random>
#include <stdexcept>

namespace dipreg {

std::vector<unsigned char> read_file_bytes(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open file: " + path.string());
  }
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (in.bad()) {
    throw std::runtime_error("read failed: " + path.string());
  }
  return bytes;
}

void atomic_write_file(const std::filesystem::path& path, const void* data,
                       std::size_t size) {
  std::filesystem::path dir = path.parent_path();
  if (dir.empty()) dir = ".";
  // Unique temp name within the target directory; rename within one
  // filesystem is atomic.
  static std::atomic<unsigned> counter{0};
  std::random_device rd;
  const std::string tmp_name =
      path.filename().string() + ".tmp-" + std::to_string(rd()) + "-" +
      std::to_string(counter.fetch_add(1));
  const std::filesystem::path tmp = dir / tmp_name;
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::runtime_error("cannot create file: " + tmp.string());
    }
    out.write(static_cast<const char*>(data),
              static_cast<std::streamsize>(size));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw std::runtime_error("write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw std::runtime_error("rename failed for " + path.string() + ": " +
                             ec.message());
  }
}

void atomic_write_file(const std::filesystem::path& path,
                       const std::string& text) {
  atomic_write_file(path, text.data(), text.size());
}

}  // namespace dipreg

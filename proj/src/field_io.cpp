#include "dipreg/field_io.hpp"

#include "dipreg/file_util.hpp"

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <vector>

namespace dipreg {

namespace {

void append_u16le(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

void append_u32le(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(static_cast<unsigned char>(v));
  out.push_back(static_cast<unsigned char>(v >> 8));
  out.push_back(static_cast<unsigned char>(v >> 16));
  out.push_back(static_cast<unsigned char>(v >> 24));
}

std::uint16_t read_u16le(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32le(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
         (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}

void append_f32le(std::vector<unsigned char>& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  append_u32le(out, bits);
}

float read_f32le(const unsigned char* p) {
  const std::uint32_t bits = read_u32le(p);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

void save_field(const std::filesystem::path& path,
                const DisplacementField& field) {
  field.validate();
  const Index h = field.height(), w = field.width();
  std::vector<unsigned char> out;
  out.reserve(16 + 8 * static_cast<std::size_t>(h) * w);
  out.insert(out.end(), {'D', 'I', 'P', 'F'});
  append_u16le(out, kFieldFileVersion);
  append_u16le(out, 0);  // reserved
  append_u32le(out, static_cast<std::uint32_t>(h));
  append_u32le(out, static_cast<std::uint32_t>(w));
  for (Index i = 0; i < field.u.size(); ++i) {
    append_f32le(out, static_cast<float>(field.u.values()[i]));
  }
  atomic_write_file(path, out.data(), out.size());
}

DisplacementField load_field(const std::filesystem::path& path) {
  const std::vector<unsigned char> bytes = read_file_bytes(path);
  if (bytes.size() < 16) {
    throw std::runtime_error(path.string() +
                             ": field file shorter than its 16-byte header");
  }
  if (std::memcmp(bytes.data(), "DIPF", 4) != 0) {
    throw std::runtime_error(path.string() + ": bad magic; not a DIPF field "
                             "file");
  }
  const std::uint16_t version = read_u16le(&bytes[4]);
  if (version != kFieldFileVersion) {
    throw std::runtime_error(path.string() + ": unsupported field file "
                             "version " + std::to_string(version));
  }
  const std::uint32_t h = read_u32le(&bytes[8]);
  const std::uint32_t w = read_u32le(&bytes[12]);
  if (h == 0 || w == 0) {
    throw std::runtime_error(path.string() + ": zero field dimensions");
  }
  const std::size_t samples = 2 * static_cast<std::size_t>(h) * w;
  if (bytes.size() != 16 + 4 * samples) {
    throw std::runtime_error(
        path.string() + ": payload length mismatch: expected " +
        std::to_string(16 + 4 * samples) + " bytes for " + std::to_string(w) +
        "x" + std::to_string(h) + ", got " + std::to_string(bytes.size()));
  }
  ArrayXd data(static_cast<Index>(samples));
  for (std::size_t i = 0; i < samples; ++i) {
    data[static_cast<Index>(i)] = read_f32le(&bytes[16 + 4 * i]);
  }
  DisplacementField field{Tensor::constant(
      {2, static_cast<Index>(h), static_cast<Index>(w)}, std::move(data))};
  field.validate();
  return field;
}

}  // namespace dipreg

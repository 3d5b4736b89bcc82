#include "dipreg/image_io.hpp"

#include "dipreg/file_util.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace dipreg {

namespace {

[[noreturn]] void fail(const std::filesystem::path& path,
                       const std::string& what, std::size_t offset) {
  throw std::runtime_error(path.string() + ": " + what + " (byte " +
                           std::to_string(offset) + ")");
}

[[noreturn]] void fail(const std::filesystem::path& path,
                       const std::string& what) {
  throw std::runtime_error(path.string() + ": " + what);
}

// ---- PGM (binary P5) ----

bool is_pnm_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n';
}

// Skips whitespace and '#' comment lines between header tokens.
void skip_pnm_separators(const std::vector<unsigned char>& bytes,
                         std::size_t& pos) {
  while (pos < bytes.size()) {
    if (is_pnm_space(bytes[pos])) {
      ++pos;
    } else if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
}

long parse_pnm_int(const std::filesystem::path& path,
                   const std::vector<unsigned char>& bytes,
                   std::size_t& pos) {
  skip_pnm_separators(bytes, pos);
  if (pos >= bytes.size() || bytes[pos] < '0' || bytes[pos] > '9') {
    fail(path, "expected an integer in PGM header", pos);
  }
  long value = 0;
  while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
    value = value * 10 + (bytes[pos] - '0');
    if (value > 1 << 30) fail(path, "PGM header value out of range", pos);
    ++pos;
  }
  return value;
}

Tensor load_pgm(const std::filesystem::path& path,
                const std::vector<unsigned char>& bytes) {
  std::size_t pos = 2;  // past "P5"
  const long width = parse_pnm_int(path, bytes, pos);
  const long height = parse_pnm_int(path, bytes, pos);
  const long maxval = parse_pnm_int(path, bytes, pos);
  if (width < 1 || height < 1) fail(path, "PGM dimensions must be positive");
  if (maxval < 1 || maxval > 255) {
    fail(path, "unsupported PGM maxval " + std::to_string(maxval) +
               "; only 8-bit (maxval <= 255) is supported");
  }
  if (pos >= bytes.size() || !is_pnm_space(bytes[pos])) {
    fail(path, "missing whitespace after PGM header", pos);
  }
  ++pos;
  const std::size_t need = static_cast<std::size_t>(width) * height;
  if (bytes.size() - pos < need) {
    fail(path, "truncated PGM payload: need " + std::to_string(need) +
               " bytes, have " + std::to_string(bytes.size() - pos),
         bytes.size());
  }
  ArrayXd data(static_cast<Index>(need));
  for (std::size_t i = 0; i < need; ++i) {
    data[static_cast<Index>(i)] = bytes[pos + i] / 255.0;
  }
  return Tensor::constant({1, height, width}, std::move(data));
}

// ---- PNG ----

std::uint32_t read_u32be(const unsigned char* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
         (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

constexpr unsigned char kPngSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

struct PngHeader {
  std::uint32_t width = 0, height = 0;
  int bit_depth = 0, color_type = 0, interlace = 0;
};

int png_channels(int color_type) {
  switch (color_type) {
    case 0: return 1;  // gray
    case 2: return 3;  // rgb
    case 3: return 1;  // palette index
    case 4: return 2;  // gray + alpha
    case 6: return 4;  // rgba
    default: return 0;
  }
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

Tensor load_png(const std::filesystem::path& path,
                const std::vector<unsigned char>& bytes) {
  PngHeader hdr;
  std::vector<unsigned char> palette;  // rgb triples
  std::vector<unsigned char> idat;
  bool saw_ihdr = false, saw_iend = false;

  std::size_t pos = 8;
  while (pos < bytes.size() && !saw_iend) {
    if (bytes.size() - pos < 12) fail(path, "truncated PNG chunk", pos);
    const std::uint32_t len = read_u32be(&bytes[pos]);
    if (bytes.size() - pos - 12 < len) {
      fail(path, "truncated PNG chunk payload", pos);
    }
    const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
    const unsigned char* data = &bytes[pos + 8];
    const std::uint32_t crc_stored = read_u32be(&bytes[pos + 8 + len]);
    const std::uint32_t crc_actual = static_cast<std::uint32_t>(
        crc32(crc32(0L, Z_NULL, 0), &bytes[pos + 4], len + 4));
    if (crc_stored != crc_actual) fail(path, "PNG chunk CRC mismatch", pos);

    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) fail(path, "bad IHDR length", pos);
      hdr.width = read_u32be(data);
      hdr.height = read_u32be(data + 4);
      hdr.bit_depth = data[8];
      hdr.color_type = data[9];
      hdr.interlace = data[12];
      saw_ihdr = true;
    } else if (std::memcmp(type, "PLTE", 4) == 0) {
      palette.assign(data, data + len);
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      saw_iend = true;
    }
    pos += 12 + len;
  }
  if (!saw_ihdr) fail(path, "missing IHDR chunk");
  if (!saw_iend) fail(path, "missing IEND chunk; file truncated", pos);
  if (hdr.width == 0 || hdr.height == 0) fail(path, "empty PNG image");
  if (hdr.bit_depth != 8) {
    fail(path, "unsupported PNG bit depth " + std::to_string(hdr.bit_depth) +
               "; only 8-bit images are supported");
  }
  const int channels = png_channels(hdr.color_type);
  if (channels == 0) {
    fail(path, "unsupported PNG color type " +
               std::to_string(hdr.color_type));
  }
  if (hdr.interlace != 0) fail(path, "interlaced PNG is not supported");
  if (hdr.color_type == 3 && palette.empty()) {
    fail(path, "palette PNG without PLTE chunk");
  }

  const std::size_t row_bytes =
      static_cast<std::size_t>(hdr.width) * channels;
  const std::size_t raw_size = (row_bytes + 1) * hdr.height;
  std::vector<unsigned char> raw(raw_size);
  uLongf dest_len = raw_size;
  const int rc = uncompress(raw.data(), &dest_len, idat.data(),
                            static_cast<uLong>(idat.size()));
  if (rc != Z_OK || dest_len != raw_size) {
    fail(path, "PNG inflate failed (zlib rc " + std::to_string(rc) + ")");
  }

  // Undo per-row filtering in place (rows become plain samples).
  const int bpp = channels;
  std::vector<unsigned char> prev(row_bytes, 0);
  std::vector<unsigned char> row(row_bytes);
  ArrayXd out(static_cast<Index>(hdr.width) * hdr.height);
  for (std::uint32_t y = 0; y < hdr.height; ++y) {
    const unsigned char* src = raw.data() + y * (row_bytes + 1);
    const int filter = src[0];
    std::memcpy(row.data(), src + 1, row_bytes);
    for (std::size_t i = 0; i < row_bytes; ++i) {
      const int a = i >= static_cast<std::size_t>(bpp) ? row[i - bpp] : 0;
      const int b = prev[i];
      const int c = i >= static_cast<std::size_t>(bpp) ? prev[i - bpp] : 0;
      switch (filter) {
        case 0: break;
        case 1: row[i] = static_cast<unsigned char>(row[i] + a); break;
        case 2: row[i] = static_cast<unsigned char>(row[i] + b); break;
        case 3:
          row[i] = static_cast<unsigned char>(row[i] + ((a + b) >> 1));
          break;
        case 4:
          row[i] = static_cast<unsigned char>(row[i] + paeth(a, b, c));
          break;
        default:
          fail(path, "bad PNG row filter " + std::to_string(filter));
      }
    }
    for (std::uint32_t x = 0; x < hdr.width; ++x) {
      const unsigned char* px = row.data() + std::size_t(x) * channels;
      double r, g, b2;
      switch (hdr.color_type) {
        case 0:
        case 4:
          r = g = b2 = px[0];
          break;
        case 3: {
          const std::size_t idx = std::size_t(px[0]) * 3;
          if (idx + 2 >= palette.size()) {
            fail(path, "palette index out of range");
          }
          r = palette[idx];
          g = palette[idx + 1];
          b2 = palette[idx + 2];
          break;
        }
        default:  // 2, 6
          r = px[0];
          g = px[1];
          b2 = px[2];
      }
      const double luma = 0.299 * r + 0.587 * g + 0.114 * b2;
      out[static_cast<Index>(y) * hdr.width + x] = luma / 255.0;
    }
    std::swap(prev, row);
  }
  return Tensor::constant(
      {1, static_cast<Index>(hdr.height), static_cast<Index>(hdr.width)},
      std::move(out));
}

void append_u32be(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(static_cast<unsigned char>(v >> 24));
  out.push_back(static_cast<unsigned char>(v >> 16));
  out.push_back(static_cast<unsigned char>(v >> 8));
  out.push_back(static_cast<unsigned char>(v));
}

void append_chunk(std::vector<unsigned char>& out, const char* type,
                  const std::vector<unsigned char>& data) {
  append_u32be(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t type_pos = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const std::uint32_t crc = static_cast<std::uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), out.data() + type_pos, data.size() + 4));
  append_u32be(out, crc);
}

std::vector<unsigned char> quantize(const Tensor& image) {
  std::vector<unsigned char> px(image.size());
  for (Index i = 0; i < image.size(); ++i) {
    const double v = std::clamp(image.values()[i], 0.0, 1.0);
    px[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  return px;
}

void save_png(const std::filesystem::path& path, const Tensor& image) {
  const Index h = image.dim(1), w = image.dim(2);
  const std::vector<unsigned char> px = quantize(image);

  std::vector<unsigned char> scanlines;
  scanlines.reserve((w + 1) * h);
  for (Index y = 0; y < h; ++y) {
    scanlines.push_back(0);  // filter: none
    scanlines.insert(scanlines.end(), px.begin() + y * w,
                     px.begin() + (y + 1) * w);
  }
  uLongf bound = compressBound(static_cast<uLong>(scanlines.size()));
  std::vector<unsigned char> compressed(bound);
  if (compress2(compressed.data(), &bound, scanlines.data(),
                static_cast<uLong>(scanlines.size()), 6) != Z_OK) {
    fail(path, "PNG deflate failed");
  }
  compressed.resize(bound);

  std::vector<unsigned char> out(kPngSignature, kPngSignature + 8);
  std::vector<unsigned char> ihdr;
  append_u32be(ihdr, static_cast<std::uint32_t>(w));
  append_u32be(ihdr, static_cast<std::uint32_t>(h));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(0);  // grayscale
  ihdr.push_back(0);  // compression
  ihdr.push_back(0);  // filter
  ihdr.push_back(0);  // no interlace
  append_chunk(out, "IHDR", ihdr);
  append_chunk(out, "IDAT", compressed);
  append_chunk(out, "IEND", {});
  atomic_write_file(path, out.data(), out.size());
}

void save_pgm(const std::filesystem::path& path, const Tensor& image) {
  const Index h = image.dim(1), w = image.dim(2);
  const std::vector<unsigned char> px = quantize(image);
  std::string header = "P5\n" + std::to_string(w) + " " + std::to_string(h) +
                       "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  out.insert(out.end(), px.begin(), px.end());
  atomic_write_file(path, out.data(), out.size());
}

}  // namespace

Tensor load_image(const std::filesystem::path& path) {
  const std::vector<unsigned char> bytes = read_file_bytes(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') {
    return load_pgm(path, bytes);
  }
  if (bytes.size() >= 8 &&
      std::memcmp(bytes.data(), kPngSignature, 8) == 0) {
    return load_png(path, bytes);
  }
  fail(path, "unsupported image format; expected binary PGM (P5) or PNG", 0);
}

void save_image(const std::filesystem::path& path, const Tensor& image) {
  if (image.shape().size() != 3 || image.dim(0) != 1) {
    throw std::invalid_argument("save_image: expected a {1,H,W} tensor, got " +
                                shape_to_string(image.shape()));
  }
  const std::string ext = path.extension().string();
  if (ext == ".png") {
    save_png(path, image);
  } else if (ext == ".pgm") {
    save_pgm(path, image);
  } else {
    throw std::invalid_argument("save_image: unsupported extension '" + ext +
                                "'; use .pgm or .png");
  }
}

}  // namespace dipreg

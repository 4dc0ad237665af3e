#pragma once

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "utv/image.hpp"

namespace utv {

using Bytes = std::vector<std::uint8_t>;

/// Decoded image plus the bit depth of the integer samples it came from.
struct ImageFile {
  PlanarImage image;
  int bit_depth = 8;  ///< 8 for <=8-bit sources, 16 otherwise
};

namespace detail {

inline Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  Bytes bytes((std::istreambuf_iterator<char>(in)),
              std::istreambuf_iterator<char>());
  if (in.bad()) throw Error("error reading '" + path.string() + "'");
  return bytes;
}

inline void write_file(const std::filesystem::path& path,
                       std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw Error("error writing '" + path.string() + "'");
}

/// Clamp to [0,1], scale to [0, max_value], round half away from zero.
inline std::uint32_t quantize(double v, std::uint32_t max_value) {
  if (!(v > 0.0)) return 0;  // also maps NaN to 0
  if (v >= 1.0) return max_value;
  return static_cast<std::uint32_t>(std::round(v * max_value));
}

// libpng reports errors through longjmp. The functions below keep only
// trivially destructible locals between setjmp and any libpng call.

struct PngReadSource {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t offset;
};

inline void png_read_from_memory(png_structp png, png_bytep out,
                                 png_size_t count) {
  auto* src = static_cast<PngReadSource*>(png_get_io_ptr(png));
  if (src->offset + count > src->size) png_error(png, "truncated PNG data");
  std::memcpy(out, src->data + src->offset, count);
  src->offset += count;
}

struct PngHeader {
  png_uint_32 width;
  png_uint_32 height;
  int bit_depth;
  int color_type;
};

inline bool png_read_header(png_structp png, png_infop info, PngHeader* hdr) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_read_info(png, info);
  int interlace = 0;
  int compression = 0;
  int filter = 0;
  png_get_IHDR(png, info, &hdr->width, &hdr->height, &hdr->bit_depth,
               &hdr->color_type, &interlace, &compression, &filter);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);
  return true;
}

inline bool png_read_rows(png_structp png, png_infop info, png_bytepp rows) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_read_image(png, rows);
  png_read_end(png, info);
  return true;
}

inline void png_write_to_memory(png_structp png, png_bytep data,
                                png_size_t count) {
  auto* out = static_cast<Bytes*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + count);
}

inline void png_flush_noop(png_structp) {}

inline bool png_write_all(png_structp png, png_infop info, png_uint_32 width,
                          png_uint_32 height, int bit_depth, int color_type,
                          png_bytepp rows, Bytes* sink) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_set_write_fn(png, sink, png_write_to_memory, png_flush_noop);
  png_set_IHDR(png, info, width, height, bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  png_write_image(png, rows);
  png_write_end(png, info);
  return true;
}

inline bool has_png_signature(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0;
}

inline void check_min_size(std::size_t height, std::size_t width,
                           const std::string& name) {
  if (height < 3 || width < 3)
    throw FormatError("image '" + name + "' is " + std::to_string(width) +
                      "x" + std::to_string(height) +
                      "; at least 3x3 is required");
}

inline ImageFile decode_png(std::span<const std::uint8_t> bytes,
                            const std::string& name) {
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error("libpng initialisation failed");
  }
  struct Guard {
    png_structp* png;
    png_infop* info;
    ~Guard() { png_destroy_read_struct(png, info, nullptr); }
  } guard{&png, &info};

  PngReadSource src{bytes.data(), bytes.size(), 0};
  png_set_read_fn(png, &src, png_read_from_memory);

  PngHeader hdr{};
  if (!png_read_header(png, info, &hdr))
    throw FormatError("'" + name + "' is not a readable PNG");

  std::size_t channels = 0;
  if (hdr.color_type == PNG_COLOR_TYPE_GRAY)
    channels = 1;
  else if (hdr.color_type == PNG_COLOR_TYPE_RGB)
    channels = 3;
  else
    throw FormatError("'" + name +
                      "': only grayscale or RGB PNG without alpha or palette "
                      "is supported");
  if (hdr.bit_depth != 8 && hdr.bit_depth != 16)
    throw FormatError("'" + name + "': unsupported PNG bit depth " +
                      std::to_string(hdr.bit_depth));
  check_min_size(hdr.height, hdr.width, name);

  const std::size_t h = hdr.height;
  const std::size_t w = hdr.width;
  const std::size_t bytes_per_sample = hdr.bit_depth / 8;
  const std::size_t row_bytes = w * channels * bytes_per_sample;
  if (png_get_rowbytes(png, info) != row_bytes)
    throw FormatError("'" + name + "': unexpected PNG row layout");

  std::vector<std::uint8_t> buffer(row_bytes * h);
  std::vector<png_bytep> rows(h);
  for (std::size_t i = 0; i < h; ++i) rows[i] = buffer.data() + i * row_bytes;
  if (!png_read_rows(png, info, rows.data()))
    throw FormatError("'" + name + "': corrupt PNG image data");

  const double max_value = hdr.bit_depth == 16 ? 65535.0 : 255.0;
  PlanarImage img(channels, h, w);
  for (std::size_t i = 0; i < h; ++i) {
    const std::uint8_t* row = rows[i];
    for (std::size_t j = 0; j < w; ++j)
      for (std::size_t c = 0; c < channels; ++c) {
        const std::size_t s = j * channels + c;
        std::uint32_t v = 0;
        if (bytes_per_sample == 2) {
          v = (std::uint32_t{row[2 * s]} << 8) | row[2 * s + 1];
        } else {
          v = row[s];
        }
        img.at(c, i, j) = v / max_value;
      }
  }
  return {std::move(img), hdr.bit_depth};
}

/// Binary PGM (P5) / PPM (P6) with any maxval in [1, 65535].
inline ImageFile decode_pnm(std::span<const std::uint8_t> bytes,
                            const std::string& name) {
  std::size_t pos = 2;
  auto next_token = [&]() -> std::uint64_t {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    if (pos >= bytes.size() || !std::isdigit(bytes[pos]))
      throw FormatError("'" + name + "': malformed PNM header");
    std::uint64_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > (1u << 30)) throw FormatError("'" + name + "': PNM header value too large");
      ++pos;
    }
    return v;
  };
  const std::size_t channels = bytes[1] == '6' ? 3 : 1;
  const std::size_t w = next_token();
  const std::size_t h = next_token();
  const std::uint64_t maxval = next_token();
  if (pos >= bytes.size() || !std::isspace(bytes[pos]))
    throw FormatError("'" + name + "': malformed PNM header");
  ++pos;
  if (maxval == 0 || maxval > 65535)
    throw FormatError("'" + name + "': unsupported PNM maxval " +
                      std::to_string(maxval));
  check_min_size(h, w, name);
  const std::size_t bps = maxval > 255 ? 2 : 1;
  if (bytes.size() - pos < w * h * channels * bps)
    throw FormatError("'" + name + "': truncated PNM data");

  PlanarImage img(channels, h, w);
  const double max_value = static_cast<double>(maxval);
  const std::uint8_t* p = bytes.data() + pos;
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j)
      for (std::size_t c = 0; c < channels; ++c) {
        std::uint32_t v = bps == 2 ? (std::uint32_t{p[0]} << 8) | p[1] : p[0];
        p += bps;
        if (v > maxval)
          throw FormatError("'" + name + "': sample exceeds maxval");
        img.at(c, i, j) = v / max_value;
      }
  return {std::move(img), bps == 2 ? 16 : 8};
}

inline void put_u32(Bytes& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

inline std::uint32_t get_u32(std::span<const std::uint8_t> bytes,
                             std::size_t offset) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b)
    v |= std::uint32_t{bytes[offset + b]} << (8 * b);
  return v;
}

}  // namespace detail

/// Decodes PNG (8/16-bit gray or RGB) or binary PGM/PPM from memory.
inline ImageFile decode_image(std::span<const std::uint8_t> bytes,
                              const std::string& name = "<memory>") {
  if (detail::has_png_signature(bytes)) return detail::decode_png(bytes, name);
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6'))
    return detail::decode_pnm(bytes, name);
  throw FormatError("'" + name + "': unsupported image format (expected PNG or binary PGM/PPM)");
}

inline ImageFile read_image_file(const std::filesystem::path& path) {
  return decode_image(detail::read_file(path), path.string());
}

inline PlanarImage load_image(const std::filesystem::path& path) {
  return read_image_file(path).image;
}

/// PNG encoding with clamping to [0,1] and half-away-from-zero rounding.
inline Bytes encode_png(const PlanarImage& img, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16)
    throw InvalidArgument("bit depth must be 8 or 16, got " +
                          std::to_string(bit_depth));
  if (img.channels() != 1 && img.channels() != 3)
    throw InvalidArgument("PNG output needs 1 or 3 channels, got " +
                          std::to_string(img.channels()));
  const std::size_t h = img.height();
  const std::size_t w = img.width();
  const std::size_t channels = img.channels();
  const std::size_t bps = bit_depth / 8;
  const std::size_t row_bytes = w * channels * bps;
  const std::uint32_t max_value = bit_depth == 16 ? 65535u : 255u;

  std::vector<std::uint8_t> buffer(row_bytes * h);
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j)
      for (std::size_t c = 0; c < channels; ++c) {
        const std::uint32_t q = detail::quantize(img.at(c, i, j), max_value);
        std::uint8_t* dst = buffer.data() + i * row_bytes + (j * channels + c) * bps;
        if (bps == 2) {
          dst[0] = static_cast<std::uint8_t>(q >> 8);
          dst[1] = static_cast<std::uint8_t>(q & 0xffu);
        } else {
          *dst = static_cast<std::uint8_t>(q);
        }
      }
  std::vector<png_bytep> rows(h);
  for (std::size_t i = 0; i < h; ++i) rows[i] = buffer.data() + i * row_bytes;

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("libpng initialisation failed");
  }
  struct Guard {
    png_structp* png;
    png_infop* info;
    ~Guard() { png_destroy_write_struct(png, info); }
  } guard{&png, &info};

  Bytes out;
  out.reserve(buffer.size() / 2 + 64);
  const int color_type = channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
  if (!detail::png_write_all(png, info, static_cast<png_uint_32>(w),
                             static_cast<png_uint_32>(h), bit_depth, color_type,
                             rows.data(), &out))
    throw Error("PNG encoding failed");
  return out;
}

inline void save_image(const PlanarImage& img, const std::filesystem::path& path,
                       int bit_depth = 8) {
  detail::write_file(path, encode_png(img, bit_depth));
}

// UTVM map stack format, little-endian:
//   "UTVM" | u32 version=1 | u32 flags (bit 0: activated) | u32 iterations |
//   u32 channels | u32 height | u32 width | f32 data[iter][chan][row][col]

inline constexpr std::array<std::uint8_t, 4> kMapMagic{'U', 'T', 'V', 'M'};
inline constexpr std::uint32_t kMapVersion = 1;
inline constexpr std::uint32_t kMapFlagActivated = 1u;
inline constexpr std::size_t kMapHeaderSize = 28;

inline Bytes encode_map_stack(const NoiseMapStack& stack) {
  Bytes out;
  out.reserve(kMapHeaderSize + 4 * stack.values().size());
  out.insert(out.end(), kMapMagic.begin(), kMapMagic.end());
  detail::put_u32(out, kMapVersion);
  detail::put_u32(out, stack.kind() == MapKind::Activated ? kMapFlagActivated : 0u);
  detail::put_u32(out, static_cast<std::uint32_t>(stack.iterations()));
  detail::put_u32(out, static_cast<std::uint32_t>(stack.extent().channels));
  detail::put_u32(out, static_cast<std::uint32_t>(stack.extent().height));
  detail::put_u32(out, static_cast<std::uint32_t>(stack.extent().width));
  for (float v : stack.values()) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

inline NoiseMapStack decode_map_stack(std::span<const std::uint8_t> bytes,
                                      const std::string& name = "<memory>") {
  if (bytes.size() < kMapHeaderSize ||
      !std::equal(kMapMagic.begin(), kMapMagic.end(), bytes.begin()))
    throw FormatError("'" + name + "': not a UTVM map file (bad magic)");
  const std::uint32_t version = detail::get_u32(bytes, 4);
  if (version != kMapVersion)
    throw FormatError("'" + name + "': unsupported UTVM version " +
                      std::to_string(version));
  const std::uint32_t flags = detail::get_u32(bytes, 8);
  const std::uint64_t iterations = detail::get_u32(bytes, 12);
  const std::uint64_t channels = detail::get_u32(bytes, 16);
  const std::uint64_t height = detail::get_u32(bytes, 20);
  const std::uint64_t width = detail::get_u32(bytes, 24);
  if (iterations == 0 || channels == 0 || height == 0 || width == 0)
    throw FormatError("'" + name + "': zero dimension in UTVM header");
  const std::uint64_t count = iterations * channels * height * width;
  if (count > (bytes.size() - kMapHeaderSize) / 4 ||
      bytes.size() - kMapHeaderSize != 4 * count)
    throw FormatError("'" + name + "': UTVM payload size does not match header");

  const MapKind kind =
      (flags & kMapFlagActivated) ? MapKind::Activated : MapKind::Residual;
  NoiseMapStack stack(iterations, {channels, height, width}, kind);
  auto values = stack.values();
  for (std::size_t n = 0; n < count; ++n) {
    const float v = std::bit_cast<float>(detail::get_u32(bytes, kMapHeaderSize + 4 * n));
    if (kind == MapKind::Activated && !(v >= 0.0f))
      throw FormatError("'" + name + "': activated map contains a negative or NaN value");
    values[n] = v;
  }
  return stack;
}

inline NoiseMapStack load_map_stack(const std::filesystem::path& path) {
  return decode_map_stack(detail::read_file(path), path.string());
}

inline void save_map_stack(const NoiseMapStack& stack,
                           const std::filesystem::path& path) {
  detail::write_file(path, encode_map_stack(stack));
}

}  // namespace utv

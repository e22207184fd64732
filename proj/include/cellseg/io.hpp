#pragma once

// Raster and label-map file I/O.
//
// Two containers are understood:
//   * RAS: little-endian "CSR1" magic, u32 width, u32 height, u32 dtype
//     (0=u8, 1=u16, 2=u32, 3=f32), then width*height samples row-major.
//   * PNG: 8- or 16-bit single-channel grayscale.
// Integer samples load as their exact value; nothing is rescaled.

#include <png.h>

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>
#include <vector>

#include "cellseg/error.hpp"
#include "cellseg/raster.hpp"

namespace cellseg {

enum class FileFormat { Auto, Png16, Ras };

enum class RasDtype : std::uint32_t { U8 = 0, U16 = 1, U32 = 2, F32 = 3 };

constexpr std::size_t ras_sample_bytes(RasDtype dtype) {
  switch (dtype) {
    case RasDtype::U8: return 1;
    case RasDtype::U16: return 2;
    case RasDtype::U32: return 4;
    case RasDtype::F32: return 4;
  }
  return 0;
}

/// Undecoded RAS content. Payload bytes are kept little-endian as on disk.
struct RasFile {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  RasDtype dtype = RasDtype::F32;
  std::vector<std::uint8_t> payload;

  friend bool operator==(const RasFile&, const RasFile&) = default;
};

namespace detail {

inline constexpr std::array<std::uint8_t, 4> kRasMagic{'C', 'S', 'R', '1'};
inline constexpr std::array<std::uint8_t, 8> kPngMagic{0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
inline constexpr std::size_t kRasHeaderBytes = 16;

inline std::uint32_t read_le32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

inline void write_le32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::IoError, "read failed: " + path.string());
  return bytes;
}

inline void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

inline bool starts_with(const std::vector<std::uint8_t>& bytes, std::span<const std::uint8_t> magic) {
  return bytes.size() >= magic.size() && std::equal(magic.begin(), magic.end(), bytes.begin());
}

inline FileFormat sniff(const std::vector<std::uint8_t>& bytes) {
  if (starts_with(bytes, kRasMagic)) return FileFormat::Ras;
  if (starts_with(bytes, kPngMagic)) return FileFormat::Png16;
  throw Error(ErrorCode::UnsupportedFormat, "unrecognized file magic");
}

inline float f32_from_bits(std::uint32_t bits) { return std::bit_cast<float>(bits); }
inline std::uint32_t bits_from_f32(float v) { return std::bit_cast<std::uint32_t>(v); }

// ---------------------------------------------------------------------------
// libpng glue. libpng reports errors with longjmp, so all state that changes
// after setjmp lives behind a reference and no C++ object with a destructor
// is created inside the guarded functions.

struct PngMemoryReader {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t offset;
};

struct PngErrorSink {
  char message[256];
};

inline void png_error_handler(png_structp png, png_const_charp msg) {
  auto* sink = static_cast<PngErrorSink*>(png_get_error_ptr(png));
  std::snprintf(sink->message, sizeof(sink->message), "%s", msg);
  png_longjmp(png, 1);
}

inline void png_warning_handler(png_structp, png_const_charp) {}

inline void png_read_from_memory(png_structp png, png_bytep out, png_size_t count) {
  auto* reader = static_cast<PngMemoryReader*>(png_get_io_ptr(png));
  if (reader->offset + count > reader->size) png_error(png, "truncated PNG stream");
  std::memcpy(out, reader->data + reader->offset, count);
  reader->offset += count;
}

struct PngDecodeState {
  PngMemoryReader reader;
  PngErrorSink sink;
  std::uint32_t width;
  std::uint32_t height;
  int bit_depth;
  int color_type;
  std::vector<png_bytep>* rows;
};

// Header and body are read in two guarded calls so the caller can validate
// and allocate the row buffers in between.
inline bool png_read_header(png_structp png, png_infop info, PngDecodeState& st) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_set_read_fn(png, &st.reader, png_read_from_memory);
  png_read_info(png, info);
  st.width = png_get_image_width(png, info);
  st.height = png_get_image_height(png, info);
  st.bit_depth = png_get_bit_depth(png, info);
  st.color_type = png_get_color_type(png, info);
  return true;
}

inline bool png_read_body(png_structp png, png_infop info, PngDecodeState& st) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_set_interlace_handling(png);
  png_read_update_info(png, info);
  png_read_image(png, st.rows->data());
  png_read_end(png, nullptr);
  return true;
}

struct PngDecoded {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  int bit_depth = 0;
  std::vector<std::uint32_t> samples;
};

inline PngDecoded decode_png(const std::vector<std::uint8_t>& bytes) {
  PngDecodeState st{};
  st.reader = {bytes.data(), bytes.size(), 0};
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &st.sink, png_error_handler,
                                           png_warning_handler);
  if (png == nullptr) throw Error(ErrorCode::IoError, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  auto cleanup = [&] { png_destroy_read_struct(&png, info ? &info : nullptr, nullptr); };
  if (info == nullptr) {
    cleanup();
    throw Error(ErrorCode::IoError, "png_create_info_struct failed");
  }
  if (!png_read_header(png, info, st)) {
    cleanup();
    throw Error(ErrorCode::CorruptFile, std::string("PNG header: ") + st.sink.message);
  }
  if (st.color_type != PNG_COLOR_TYPE_GRAY || (st.bit_depth != 8 && st.bit_depth != 16)) {
    cleanup();
    throw Error(ErrorCode::UnsupportedFormat, "only 8/16-bit single-channel grayscale PNG is supported");
  }
  const std::size_t bytes_per_sample = st.bit_depth == 16 ? 2 : 1;
  const std::size_t row_bytes = std::size_t(st.width) * bytes_per_sample;
  if (st.height != 0 && row_bytes > std::numeric_limits<std::uint32_t>::max() / st.height) {
    cleanup();
    throw Error(ErrorCode::DimensionOverflow, "PNG dimensions exceed addressable size");
  }
  std::vector<std::uint8_t> raw(row_bytes * st.height);
  std::vector<png_bytep> rows(st.height);
  for (std::uint32_t y = 0; y < st.height; ++y) rows[y] = raw.data() + y * row_bytes;
  st.rows = &rows;
  if (!png_read_body(png, info, st)) {
    cleanup();
    throw Error(ErrorCode::CorruptFile, std::string("PNG payload: ") + st.sink.message);
  }
  cleanup();

  PngDecoded out;
  out.width = st.width;
  out.height = st.height;
  out.bit_depth = st.bit_depth;
  out.samples.resize(std::size_t(st.width) * st.height);
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    out.samples[i] = bytes_per_sample == 2 ? (std::uint32_t(raw[2 * i]) << 8) | raw[2 * i + 1] : raw[i];
  }
  return out;
}

struct PngEncodeState {
  PngErrorSink sink;
  std::vector<std::uint8_t>* out;
  std::uint32_t width;
  std::uint32_t height;
  int bit_depth;
  std::vector<png_bytep>* rows;
};

inline void png_write_to_memory(png_structp png, png_bytep data, png_size_t count) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + count);
}

inline void png_flush_noop(png_structp) {}

inline bool png_write_all(png_structp png, png_infop info, PngEncodeState& st) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_set_write_fn(png, st.out, png_write_to_memory, png_flush_noop);
  png_set_IHDR(png, info, st.width, st.height, st.bit_depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, st.rows->data());
  png_write_end(png, nullptr);
  return true;
}

// bit_depth 8 requires every sample <= 255.
inline std::vector<std::uint8_t> encode_png(std::size_t width, std::size_t height,
                                            const std::vector<std::uint16_t>& samples, int bit_depth = 16) {
  const std::size_t bytes_per_sample = bit_depth == 16 ? 2 : 1;
  std::vector<std::uint8_t> raw(samples.size() * bytes_per_sample);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (bytes_per_sample == 2) {
      raw[2 * i] = static_cast<std::uint8_t>(samples[i] >> 8);
      raw[2 * i + 1] = static_cast<std::uint8_t>(samples[i] & 0xFF);
    } else {
      raw[i] = static_cast<std::uint8_t>(samples[i]);
    }
  }
  std::vector<png_bytep> rows(height);
  for (std::size_t y = 0; y < height; ++y) rows[y] = raw.data() + y * width * bytes_per_sample;

  std::vector<std::uint8_t> out;
  PngEncodeState st{};
  st.out = &out;
  st.width = static_cast<std::uint32_t>(width);
  st.height = static_cast<std::uint32_t>(height);
  st.bit_depth = bit_depth;
  st.rows = &rows;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &st.sink, png_error_handler,
                                            png_warning_handler);
  if (png == nullptr) throw Error(ErrorCode::IoError, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr || !png_write_all(png, info, st)) {
    png_destroy_write_struct(&png, info ? &info : nullptr);
    throw Error(ErrorCode::IoError, std::string("PNG encode: ") + st.sink.message);
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// RAS container

inline RasFile parse_ras(const std::vector<std::uint8_t>& bytes) {
  if (!detail::starts_with(bytes, detail::kRasMagic)) {
    throw Error(ErrorCode::UnsupportedFormat, "missing CSR1 magic");
  }
  if (bytes.size() < detail::kRasHeaderBytes) throw Error(ErrorCode::CorruptFile, "truncated RAS header");
  RasFile ras;
  ras.width = detail::read_le32(bytes.data() + 4);
  ras.height = detail::read_le32(bytes.data() + 8);
  const std::uint32_t dtype = detail::read_le32(bytes.data() + 12);
  if (dtype > 3) throw Error(ErrorCode::UnsupportedFormat, "unknown RAS dtype " + std::to_string(dtype));
  ras.dtype = static_cast<RasDtype>(dtype);
  if (ras.width == 0 || ras.height == 0) throw Error(ErrorCode::CorruptFile, "RAS with zero dimension");
  const std::uint64_t count = std::uint64_t(ras.width) * ras.height;
  if (count > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorCode::DimensionOverflow, "RAS dimensions exceed addressable size");
  }
  const std::uint64_t expected = count * ras_sample_bytes(ras.dtype);
  if (bytes.size() - detail::kRasHeaderBytes != expected) {
    throw Error(ErrorCode::CorruptFile, "RAS payload is " + std::to_string(bytes.size() - detail::kRasHeaderBytes) +
                                            " bytes, expected " + std::to_string(expected));
  }
  ras.payload.assign(bytes.begin() + detail::kRasHeaderBytes, bytes.end());
  return ras;
}

inline std::vector<std::uint8_t> serialize_ras(const RasFile& ras) {
  std::vector<std::uint8_t> out(detail::kRasMagic.begin(), detail::kRasMagic.end());
  out.reserve(detail::kRasHeaderBytes + ras.payload.size());
  detail::write_le32(out, ras.width);
  detail::write_le32(out, ras.height);
  detail::write_le32(out, static_cast<std::uint32_t>(ras.dtype));
  out.insert(out.end(), ras.payload.begin(), ras.payload.end());
  return out;
}

inline RasFile read_ras(const std::filesystem::path& path) { return parse_ras(detail::read_file(path)); }

inline void write_ras(const RasFile& ras, const std::filesystem::path& path) {
  detail::write_file(path, serialize_ras(ras));
}

/// Sample `i` of a RAS payload as a double (exact for every dtype).
inline double ras_sample(const RasFile& ras, std::size_t i) {
  const std::uint8_t* p = ras.payload.data() + i * ras_sample_bytes(ras.dtype);
  switch (ras.dtype) {
    case RasDtype::U8: return p[0];
    case RasDtype::U16: return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8);
    case RasDtype::U32: return detail::read_le32(p);
    case RasDtype::F32: return detail::f32_from_bits(detail::read_le32(p));
  }
  return 0.0;
}

inline Raster decode_ras_raster(const RasFile& ras) {
  Raster out(ras.width, ras.height);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = ras_sample(ras, i);
    if (!std::isfinite(v)) throw Error(ErrorCode::CorruptFile, "non-finite sample at index " + std::to_string(i));
    // u32 values above 2^24 round to the nearest float here.
    out[i] = static_cast<Sample>(v);
  }
  return out;
}

inline RasFile encode_ras(const Raster& r, RasDtype dtype = RasDtype::F32) {
  RasFile ras;
  ras.width = static_cast<std::uint32_t>(r.width());
  ras.height = static_cast<std::uint32_t>(r.height());
  ras.dtype = dtype;
  ras.payload.reserve(r.size() * ras_sample_bytes(dtype));
  const double max_value = dtype == RasDtype::U8    ? 255.0
                           : dtype == RasDtype::U16 ? 65535.0
                                                    : 4294967295.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const float v = r[i];
    if (dtype == RasDtype::F32) {
      if (!std::isfinite(v)) throw Error(ErrorCode::RangeError, "non-finite sample");
      const std::uint32_t bits = detail::bits_from_f32(v);
      for (int shift = 0; shift < 32; shift += 8) ras.payload.push_back(static_cast<std::uint8_t>(bits >> shift));
      continue;
    }
    if (v != std::floor(v) || v < 0.0f || double(v) > max_value) {
      throw Error(ErrorCode::RangeError, "sample " + std::to_string(v) + " not representable in integer RAS dtype");
    }
    const auto n = static_cast<std::uint32_t>(v);
    for (std::size_t b = 0; b < ras_sample_bytes(dtype); ++b) {
      ras.payload.push_back(static_cast<std::uint8_t>(n >> (8 * b)));
    }
  }
  return ras;
}

// ---------------------------------------------------------------------------
// Public load/save surface

inline FileFormat format_from_extension(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".png") return FileFormat::Png16;
  if (ext == ".ras") return FileFormat::Ras;
  throw Error(ErrorCode::UnsupportedFormat, "cannot infer format from extension of " + path.string());
}

inline Raster load_raster(const std::filesystem::path& path, FileFormat format = FileFormat::Auto) {
  const auto bytes = detail::read_file(path);
  const FileFormat found = detail::sniff(bytes);
  if (format != FileFormat::Auto && format != found) {
    throw Error(ErrorCode::UnsupportedFormat, path.string() + " does not match the requested format");
  }
  if (found == FileFormat::Ras) return decode_ras_raster(parse_ras(bytes));
  const auto png = detail::decode_png(bytes);
  Raster out(png.width, png.height);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<Sample>(png.samples[i]);
  return out;
}

/// Writes `r`. RAS stores `dtype`; PNG is always 16-bit and requires integer
/// samples in [0, 65535].
inline void save_raster(const Raster& r, const std::filesystem::path& path, FileFormat format = FileFormat::Auto,
                        RasDtype dtype = RasDtype::F32) {
  if (format == FileFormat::Auto) format = format_from_extension(path);
  if (format == FileFormat::Ras) {
    write_ras(encode_ras(r, dtype), path);
    return;
  }
  std::vector<std::uint16_t> samples(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    const float v = r[i];
    if (!(v >= 0.0f && v <= 65535.0f) || v != std::floor(v)) {
      throw Error(ErrorCode::RangeError,
                  "sample " + std::to_string(v) + " at index " + std::to_string(i) + " is not a 16-bit integer");
    }
    samples[i] = static_cast<std::uint16_t>(v);
  }
  detail::write_file(path, detail::encode_png(r.width(), r.height(), samples));
}

inline LabelMap load_labels(const std::filesystem::path& path, FileFormat format = FileFormat::Auto) {
  const auto bytes = detail::read_file(path);
  const FileFormat found = detail::sniff(bytes);
  if (format != FileFormat::Auto && format != found) {
    throw Error(ErrorCode::UnsupportedFormat, path.string() + " does not match the requested format");
  }
  if (found == FileFormat::Ras) {
    const RasFile ras = parse_ras(bytes);
    if (ras.dtype == RasDtype::F32) throw Error(ErrorCode::UnsupportedFormat, "label RAS must use an integer dtype");
    LabelMap out(ras.width, ras.height);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<Label>(ras_sample(ras, i));
    return out;
  }
  const auto png = detail::decode_png(bytes);
  return LabelMap(png.width, png.height, png.samples);
}

/// PNG label maps are 16-bit; RAS label maps are always written as u32.
inline void save_labels(const LabelMap& labels, const std::filesystem::path& path,
                        FileFormat format = FileFormat::Auto) {
  if (format == FileFormat::Auto) format = format_from_extension(path);
  if (format == FileFormat::Ras) {
    RasFile ras;
    ras.width = static_cast<std::uint32_t>(labels.width());
    ras.height = static_cast<std::uint32_t>(labels.height());
    ras.dtype = RasDtype::U32;
    ras.payload.reserve(labels.size() * 4);
    for (Label l : labels) detail::write_le32(ras.payload, l);
    write_ras(ras, path);
    return;
  }
  std::vector<std::uint16_t> samples(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] > 65535) {
      throw Error(ErrorCode::LabelOverflow, "label " + std::to_string(labels[i]) + " does not fit in 16-bit PNG");
    }
    samples[i] = static_cast<std::uint16_t>(labels[i]);
  }
  detail::write_file(path, detail::encode_png(labels.width(), labels.height(), samples));
}

}  // namespace cellseg

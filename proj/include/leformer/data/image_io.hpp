#pragma once

#include <zlib.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "leformer/core/error.hpp"
#include "leformer/data/sample.hpp"

namespace leformer {

// Interleaved row-major 8-bit image, 1 or 3 channels.
struct ImageU8 {
  int64_t w = 0, h = 0, channels = 0;
  std::vector<uint8_t> px;

  ImageU8() = default;
  ImageU8(int64_t w_, int64_t h_, int64_t c)
      : w(w_), h(h_), channels(c), px(static_cast<size_t>(w_ * h_ * c), 0) {}
};

namespace detail {

inline void be32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

inline uint32_t read_be32(const uint8_t* p) {
  return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
         (static_cast<uint32_t>(p[2]) << 8) | p[3];
}

inline void png_chunk(std::vector<uint8_t>& out, const char type[4],
                      const std::vector<uint8_t>& data) {
  be32(out, static_cast<uint32_t>(data.size()));
  const size_t type_at = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const uint32_t crc = static_cast<uint32_t>(
      ::crc32(0, out.data() + type_at, static_cast<uInt>(4 + data.size())));
  be32(out, crc);
}

inline constexpr uint8_t kPngSig[8] = {137, 80, 78, 71, 13, 10, 26, 10};

}  // namespace detail

inline void write_png(const std::string& path, const ImageU8& img) {
  if (img.channels != 1 && img.channels != 3)
    throw ValueError("write_png supports 1 or 3 channels");
  std::vector<uint8_t> raw;
  raw.reserve(static_cast<size_t>(img.h * (img.w * img.channels + 1)));
  for (int64_t y = 0; y < img.h; ++y) {
    raw.push_back(0);  // filter: none
    const uint8_t* row = img.px.data() + y * img.w * img.channels;
    raw.insert(raw.end(), row, row + img.w * img.channels);
  }
  uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> comp(comp_len);
  if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK)
    throw IoError(str_cat("deflate failure writing ", path));
  comp.resize(comp_len);

  std::vector<uint8_t> out(detail::kPngSig, detail::kPngSig + 8);
  std::vector<uint8_t> ihdr;
  detail::be32(ihdr, static_cast<uint32_t>(img.w));
  detail::be32(ihdr, static_cast<uint32_t>(img.h));
  ihdr.push_back(8);                                       // bit depth
  ihdr.push_back(img.channels == 1 ? 0 : 2);               // gray / rgb
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  detail::png_chunk(out, "IHDR", ihdr);
  detail::png_chunk(out, "IDAT", comp);
  detail::png_chunk(out, "IEND", {});

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError(str_cat("cannot open for writing: ", path));
  os.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!os) throw IoError(str_cat("write failure: ", path));
}

inline ImageU8 read_png(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(str_cat("cannot open: ", path));
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (buf.size() < 8 || std::memcmp(buf.data(), detail::kPngSig, 8) != 0)
    throw IoError(str_cat("not a PNG file: ", path));

  int64_t w = 0, h = 0, channels = 0;
  std::vector<uint8_t> idat;
  size_t at = 8;
  while (at + 12 <= buf.size()) {
    const uint32_t len = detail::read_be32(&buf[at]);
    const char* type = reinterpret_cast<const char*>(&buf[at + 4]);
    const uint8_t* data = &buf[at + 8];
    if (at + 12 + len > buf.size()) throw IoError(str_cat("truncated PNG: ", path));
    if (std::memcmp(type, "IHDR", 4) == 0) {
      w = detail::read_be32(data);
      h = detail::read_be32(data + 4);
      const int depth = data[8], color = data[9], interlace = data[12];
      if (depth != 8) throw IoError(str_cat("unsupported PNG bit depth in ", path));
      if (interlace != 0) throw IoError(str_cat("interlaced PNG unsupported: ", path));
      channels = color == 0 ? 1 : color == 2 ? 3 : color == 6 ? 4 : -1;
      if (channels < 0) throw IoError(str_cat("unsupported PNG color type in ", path));
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    at += 12 + len;
  }
  if (w <= 0 || h <= 0) throw IoError(str_cat("corrupt PNG header: ", path));

  const int64_t stride = w * channels;
  std::vector<uint8_t> raw(static_cast<size_t>(h * (stride + 1)));
  uLongf raw_len = static_cast<uLongf>(raw.size());
  if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
      raw_len != raw.size())
    throw IoError(str_cat("corrupt PNG data: ", path));

  // undo per-row filters
  std::vector<uint8_t> flat(static_cast<size_t>(h * stride));
  const int64_t bpp = channels;
  for (int64_t y = 0; y < h; ++y) {
    const uint8_t filter = raw[y * (stride + 1)];
    const uint8_t* src = &raw[y * (stride + 1) + 1];
    uint8_t* dst = &flat[y * stride];
    const uint8_t* up = y > 0 ? &flat[(y - 1) * stride] : nullptr;
    for (int64_t x = 0; x < stride; ++x) {
      const int a = x >= bpp ? dst[x - bpp] : 0;
      const int b = up ? up[x] : 0;
      const int c = (up && x >= bpp) ? up[x - bpp] : 0;
      int v = src[x];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: {
          const int p = a + b - c;
          const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
          v += (pa <= pb && pa <= pc) ? a : (pb <= pc ? b : c);
          break;
        }
        default: throw IoError(str_cat("unsupported PNG filter in ", path));
      }
      dst[x] = static_cast<uint8_t>(v & 0xff);
    }
  }

  ImageU8 img(w, h, channels == 4 ? 3 : channels);
  if (channels == 4) {
    for (int64_t i = 0; i < w * h; ++i)
      for (int64_t c = 0; c < 3; ++c) img.px[i * 3 + c] = flat[i * 4 + c];
  } else {
    img.px.assign(flat.begin(), flat.end());
  }
  return img;
}

// Binary PPM (P6) / PGM (P5) fallback formats.
inline void write_pnm(const std::string& path, const ImageU8& img) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError(str_cat("cannot open for writing: ", path));
  os << (img.channels == 3 ? "P6" : "P5") << "\n" << img.w << " " << img.h << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.px.data()),
           static_cast<std::streamsize>(img.px.size()));
  if (!os) throw IoError(str_cat("write failure: ", path));
}

inline ImageU8 read_pnm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(str_cat("cannot open: ", path));
  std::string magic;
  is >> magic;
  if (magic != "P6" && magic != "P5") throw IoError(str_cat("unsupported PNM format in ", path));
  int64_t w, h, maxv;
  is >> w >> h >> maxv;
  is.get();
  if (!is || w <= 0 || h <= 0 || maxv != 255) throw IoError(str_cat("corrupt PNM header: ", path));
  ImageU8 img(w, h, magic == "P6" ? 3 : 1);
  is.read(reinterpret_cast<char*>(img.px.data()), static_cast<std::streamsize>(img.px.size()));
  if (!is) throw IoError(str_cat("truncated PNM data: ", path));
  return img;
}

inline ImageU8 read_image_file(const std::string& path) {
  const auto ext = std::filesystem::path(path).extension().string();
  if (ext == ".png") return read_png(path);
  if (ext == ".ppm" || ext == ".pgm") return read_pnm(path);
  throw IoError(str_cat("unsupported image format: ", path));
}

inline void write_image_file(const std::string& path, const ImageU8& img) {
  const auto ext = std::filesystem::path(path).extension().string();
  if (ext == ".png") return write_png(path, img);
  if (ext == ".ppm" || ext == ".pgm") return write_pnm(path, img);
  throw IoError(str_cat("unsupported image format: ", path));
}

// [3,H,W] float tensor in [0,1] <-> interleaved u8.
inline Tensor<float> image_to_tensor(const ImageU8& img) {
  Tensor<float> t({3, img.h, img.w});
  for (int64_t y = 0; y < img.h; ++y)
    for (int64_t x = 0; x < img.w; ++x)
      for (int64_t c = 0; c < 3; ++c) {
        const uint8_t v = img.channels == 3 ? img.px[(y * img.w + x) * 3 + c]
                                            : img.px[y * img.w + x];
        t.data()[(c * img.h + y) * img.w + x] = static_cast<float>(v) / 255.0f;
      }
  return t;
}

inline ImageU8 tensor_to_image(const Tensor<float>& t) {
  if (t.rank() != 3 || t.dim(0) != 3) throw ShapeError("tensor_to_image expects [3,H,W]");
  ImageU8 img(t.dim(2), t.dim(1), 3);
  for (int64_t y = 0; y < t.dim(1); ++y)
    for (int64_t x = 0; x < t.dim(2); ++x)
      for (int64_t c = 0; c < 3; ++c) {
        const float v = t.data()[(c * t.dim(1) + y) * t.dim(2) + x];
        img.px[(y * t.dim(2) + x) * 3 + c] =
            static_cast<uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
      }
  return img;
}

// On-disk mask encoding: 0 background, 254 ignore, anything else lake.
inline Mask read_mask_file(const std::string& path) {
  const ImageU8 img = read_image_file(path);
  Mask m(img.h, img.w);
  for (int64_t i = 0; i < img.h * img.w; ++i) {
    const uint8_t v = img.channels == 1 ? img.px[i] : img.px[i * img.channels];
    m.v[i] = v == 0 ? 0 : v == 254 ? kIgnoreIndex : 1;
  }
  return m;
}

inline void write_mask_file(const std::string& path, const Mask& m) {
  ImageU8 img(m.w, m.h, 1);
  for (int64_t i = 0; i < m.h * m.w; ++i)
    img.px[i] = m.v[i] == 0 ? 0 : m.v[i] == kIgnoreIndex ? 254 : 255;
  write_image_file(path, img);
}

// Tints predicted lake pixels; the red channel is inverted so an overlaid
// pixel always differs from the source.
inline void write_mask_overlay(const std::string& path, const Tensor<float>& image,
                               const Mask& pred) {
  if (image.dim(1) != pred.h || image.dim(2) != pred.w)
    throw ShapeError("overlay: image and mask dimensions differ");
  ImageU8 img = tensor_to_image(image);
  for (int64_t i = 0; i < pred.h * pred.w; ++i) {
    if (pred.v[i] != 1) continue;
    img.px[i * 3 + 0] = static_cast<uint8_t>(255 - img.px[i * 3 + 0]);
    img.px[i * 3 + 1] = static_cast<uint8_t>(img.px[i * 3 + 1] * 2 / 3);
    img.px[i * 3 + 2] = static_cast<uint8_t>(std::min(255, img.px[i * 3 + 2] + 64));
  }
  write_image_file(path, img);
}

}  // namespace leformer

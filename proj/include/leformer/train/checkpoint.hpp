#pragma once

#include <cstring>
#include <fstream>
#include <type_traits>

#include "leformer/nn/params.hpp"

namespace leformer {

// Checkpoint container: magic "LEFCKPT1", u32-LE entry count, then per entry
// u16-LE name length, UTF-8 name, u8 dtype tag (0=f32, 1=f64), u8 rank,
// u32-LE dims[rank], raw little-endian element data.

namespace detail {

inline constexpr char kCkptMagic[8] = {'L', 'E', 'F', 'C', 'K', 'P', 'T', '1'};

template <typename T>
constexpr uint8_t dtype_tag() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? 0 : 1;
}

inline void put_u16(std::ostream& os, uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  os.write(b, 2);
}

inline void put_u32(std::ostream& os, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

inline uint16_t get_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

inline uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

template <typename T>
void put_scalar_le(std::ostream& os, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
#if defined(__BYTE_ORDER__) && __BYTE_ORDER__ == __ORDER_BIG_ENDIAN__
  for (size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
#endif
  os.write(reinterpret_cast<char*>(b), sizeof(T));
}

template <typename T>
T get_scalar_le(std::istream& is) {
  unsigned char b[sizeof(T)];
  is.read(reinterpret_cast<char*>(b), sizeof(T));
#if defined(__BYTE_ORDER__) && __BYTE_ORDER__ == __ORDER_BIG_ENDIAN__
  for (size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
#endif
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

}  // namespace detail

template <typename T>
void save_checkpoint(const ParamStore<T>& store, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError(str_cat("cannot open checkpoint for writing: ", path));
  os.write(detail::kCkptMagic, 8);
  detail::put_u32(os, static_cast<uint32_t>(store.size()));
  for (const auto& e : store) {
    detail::put_u16(os, static_cast<uint16_t>(e.name.size()));
    os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    os.put(static_cast<char>(detail::dtype_tag<T>()));
    os.put(static_cast<char>(e.tensor.rank()));
    for (size_t d = 0; d < e.tensor.rank(); ++d)
      detail::put_u32(os, static_cast<uint32_t>(e.tensor.dim(d)));
    for (const T& v : e.tensor.values()) detail::put_scalar_le(os, v);
  }
  if (!os) throw IoError(str_cat("write failure on checkpoint: ", path));
}

// Restores every entry of `store` bitwise. The file must contain exactly the
// parameters the store declares, with matching shapes and dtype.
template <typename T>
void load_checkpoint(ParamStore<T>& store, const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(str_cat("cannot open checkpoint: ", path));
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, detail::kCkptMagic, 7) != 0)
    throw CheckpointError(CheckpointError::Kind::bad_magic,
                          str_cat("not a checkpoint file: ", path));
  if (magic[7] != detail::kCkptMagic[7])
    throw CheckpointError(CheckpointError::Kind::bad_version,
                          str_cat("unsupported checkpoint version '", magic[7], "' in ", path));
  const uint32_t count = detail::get_u32(is);
  if (!is) throw CheckpointError(CheckpointError::Kind::truncated, "truncated checkpoint header");

  size_t filled = 0;
  for (uint32_t i = 0; i < count; ++i) {
    const uint16_t name_len = detail::get_u16(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const int dtype = is.get();
    const int rank = is.get();
    if (!is || rank < 0)
      throw CheckpointError(CheckpointError::Kind::truncated,
                            str_cat("truncated checkpoint entry ", i));
    Shape dims(static_cast<size_t>(rank));
    for (int d = 0; d < rank; ++d) dims[d] = detail::get_u32(is);
    if (!is)
      throw CheckpointError(CheckpointError::Kind::truncated,
                            str_cat("truncated dims for parameter ", name));
    Tensor<T>* t = store.find(name);
    if (t == nullptr)
      throw CheckpointError(CheckpointError::Kind::shape_mismatch,
                            str_cat("checkpoint parameter ", name, " unknown to this model"));
    if (dtype != detail::dtype_tag<T>())
      throw CheckpointError(CheckpointError::Kind::dtype_mismatch,
                            str_cat("dtype mismatch for parameter ", name));
    if (t->shape() != dims)
      throw CheckpointError(CheckpointError::Kind::shape_mismatch,
                            str_cat("shape mismatch for parameter ", name, ": checkpoint ",
                                    shape_str(dims), " vs model ", shape_str(t->shape())));
    for (int64_t j = 0; j < t->numel(); ++j) t->data()[j] = detail::get_scalar_le<T>(is);
    if (!is)
      throw CheckpointError(CheckpointError::Kind::truncated,
                            str_cat("truncated data for parameter ", name));
    ++filled;
  }
  if (filled != store.size())
    throw CheckpointError(CheckpointError::Kind::shape_mismatch,
                          str_cat("checkpoint holds ", filled, " parameters, model expects ",
                                  store.size()));
}

}  // namespace leformer

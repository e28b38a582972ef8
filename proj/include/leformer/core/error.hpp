#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace leformer {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape/dimension disagreement between operands.
struct ShapeError : Error {
  using Error::Error;
};

// Invalid argument value (axis out of range, bad hyperparameter, ...).
struct ValueError : Error {
  using Error::Error;
};

// Filesystem / file-format failure.
struct IoError : Error {
  using Error::Error;
};

struct CheckpointError : Error {
  enum class Kind { bad_magic, bad_version, shape_mismatch, dtype_mismatch, truncated };
  Kind kind;
  CheckpointError(Kind k, const std::string& msg) : Error(msg), kind(k) {}
};

namespace detail {

inline void str_append(std::ostringstream&) {}

template <typename T, typename... Rest>
void str_append(std::ostringstream& os, const T& v, const Rest&... rest) {
  os << v;
  str_append(os, rest...);
}

}  // namespace detail

template <typename... Args>
std::string str_cat(const Args&... args) {
  std::ostringstream os;
  detail::str_append(os, args...);
  return os.str();
}

}  // namespace leformer

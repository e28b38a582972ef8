#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "leformer/core/tensor.hpp"

namespace leformer {

inline constexpr int32_t kIgnoreIndex = 255;

// Class-id map: 0 background, 1 lake, 255 ignore.
struct Mask {
  int64_t h = 0, w = 0;
  std::vector<int32_t> v;

  Mask() = default;
  Mask(int64_t h_, int64_t w_, int32_t fill = 0)
      : h(h_), w(w_), v(static_cast<size_t>(h_ * w_), fill) {}

  int32_t at(int64_t y, int64_t x) const { return v[y * w + x]; }
  int32_t& at(int64_t y, int64_t x) { return v[y * w + x]; }
};

struct Sample {
  Tensor<float> image;  // [3,H,W], values in [0,1]
  Mask mask;
  std::string id;
};

}  // namespace leformer

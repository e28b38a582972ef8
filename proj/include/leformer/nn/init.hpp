#pragma once

#include <string_view>

#include "leformer/core/rng.hpp"
#include "leformer/core/tensor.hpp"

namespace leformer {

// Parameter initialization. Each tensor draws from an Rng seeded by
// (seed, parameter name), so identical seed + config gives bitwise-identical
// parameters regardless of construction order.
class Initializer {
 public:
  explicit Initializer(uint64_t seed) : seed_(seed) {}

  uint64_t seed() const { return seed_; }

  // N(0, sqrt(2 / fan_out)); convolution weights.
  template <typename T>
  void kaiming_fan_out(Tensor<T>& t, std::string_view name, int64_t fan_out) const {
    Rng rng(derive_seed(seed_, name));
    const double std = std::sqrt(2.0 / static_cast<double>(fan_out));
    for (auto& v : t.values()) v = static_cast<T>(rng.normal() * std);
  }

  // Truncated normal, std 0.02, clipped at 2 sigma; attention/linear weights.
  template <typename T>
  void trunc_normal(Tensor<T>& t, std::string_view name, double std = 0.02) const {
    Rng rng(derive_seed(seed_, name));
    for (auto& v : t.values()) v = static_cast<T>(rng.trunc_normal(std));
  }

  template <typename T>
  void zeros(Tensor<T>& t) const {
    std::fill(t.values().begin(), t.values().end(), T(0));
  }

  template <typename T>
  void ones(Tensor<T>& t) const {
    std::fill(t.values().begin(), t.values().end(), T(1));
  }

 private:
  uint64_t seed_;
};

}  // namespace leformer

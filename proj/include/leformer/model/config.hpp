#pragma once

#include <array>
#include <cstdint>

#include "leformer/core/error.hpp"

namespace leformer {

struct Rational {
  int64_t num = 1;
  int64_t den = 1;
};

// Per-stage hyperparameters: patch/kernel size K, stride S, padding P,
// channels C, attention reduction ratio R, head count N, block count L.
struct StageConfig {
  int64_t k, s, p, c, r, n, l;
};

struct ModelConfig {
  std::array<StageConfig, 4> stages{{
      {7, 4, 3, 32, 8, 1, 2},
      {3, 2, 1, 64, 4, 2, 2},
      {3, 2, 1, 160, 2, 5, 2},
      {3, 2, 1, 192, 1, 6, 3},
  }};
  int64_t num_classes = 2;
  int64_t ptl_stages = 1;       // leading TE stages whose blocks use the pooling mixer
  int64_t decoder_dim = 192;
  int64_t cbam_reduction = 16;
  int64_t mlp_ratio = 4;
  Rational width_multiplier{1, 1};
  bool use_ce = true;
  bool use_te = true;
  bool use_msca = true;

  // Applies the width multiplier: channels scale and round up to a multiple
  // of the stage head count, decoder_dim scales with a floor of 1.
  ModelConfig resolved() const {
    validate();
    ModelConfig r = *this;
    const int64_t num = width_multiplier.num, den = width_multiplier.den;
    for (auto& st : r.stages) {
      int64_t c = (st.c * num + den - 1) / den;
      c = ((c + st.n - 1) / st.n) * st.n;
      st.c = std::max<int64_t>(st.n, c);
    }
    int64_t d = (decoder_dim * num + den - 1) / den;
    r.decoder_dim = std::max<int64_t>(1, d);
    r.width_multiplier = {1, 1};
    return r;
  }

  void validate() const {
    if (ptl_stages < 0 || ptl_stages > 4)
      throw ValueError(str_cat("ptl_stages must be in [0,4], got ", ptl_stages));
    if (num_classes < 2) throw ValueError("num_classes must be >= 2");
    if (decoder_dim < 1 || cbam_reduction < 1 || mlp_ratio < 1)
      throw ValueError("decoder_dim, cbam_reduction and mlp_ratio must be positive");
    if (width_multiplier.num < 1 || width_multiplier.den < 1)
      throw ValueError("width_multiplier must be a positive rational");
    if (!use_ce && !use_te) throw ValueError("at least one encoder branch must be enabled");
    for (const auto& st : stages)
      if (st.k < 1 || st.s < 1 || st.p < 0 || st.c < 1 || st.r < 1 || st.n < 1 || st.l < 1)
        throw ValueError("invalid stage configuration");
  }
};

// Encoder-ablation configurations.
inline ModelConfig ce_only_config() {
  ModelConfig cfg;
  cfg.use_te = false;
  return cfg;
}

inline ModelConfig te_only_config(int64_t ptl_stages = 0) {
  ModelConfig cfg;
  cfg.use_ce = false;
  cfg.use_msca = false;
  cfg.ptl_stages = ptl_stages;
  return cfg;
}

inline ModelConfig tiny_config(int64_t den = 8) {
  ModelConfig cfg;
  cfg.width_multiplier = {1, den};
  return cfg;
}

}  // namespace leformer

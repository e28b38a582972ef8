#pragma once

#include "leformer/model/blocks.hpp"

namespace leformer {

// The full LEFormer: CNN encoder and transformer encoder run as independent
// four-stage pyramids over the image; cross-encoder fusion joins them per
// stage and the decoder predicts logits at input resolution.
template <typename T>
class LeFormer {
 public:
  struct StageOutputs {
    std::array<Tensor<T>, 4> ce;     // [B,Ci,hi,wi] (empty when CE disabled)
    std::array<Tensor<T>, 4> te;     // [B,Ci,hi,wi] (empty when TE disabled)
    std::array<Tensor<T>, 4> fused;  // decoder inputs
  };

  explicit LeFormer(const ModelConfig& cfg, uint64_t seed = 0)
      : cfg_(cfg.resolved()), init_(seed) {
    int64_t cin = 3;
    if (cfg_.use_ce) {
      for (int i = 0; i < 4; ++i) {
        ce_[i] = CeStage<T>(params_, init_, str_cat("ce/stage", i + 1), cfg_.stages[i], cin,
                            cfg_.cbam_reduction, cfg_.use_msca);
        cin = cfg_.stages[i].c;
      }
    }
    if (cfg_.use_te) {
      cin = 3;
      for (int i = 0; i < 4; ++i) {
        const BlockKind kind = (i < cfg_.ptl_stages) ? BlockKind::ptl : BlockKind::etl;
        te_[i] = TeStage<T>(params_, init_, str_cat("te/stage", i + 1), cfg_.stages[i], cin,
                            cfg_.mlp_ratio, kind);
        cin = cfg_.stages[i].c;
      }
    }
    if (cfg_.use_ce && cfg_.use_te)
      for (int i = 0; i < 4; ++i)
        cef_[i] = CefFuse<T>(params_, init_, str_cat("cef/stage", i + 1), cfg_.stages[i].c);
    std::array<int64_t, 4> dims{cfg_.stages[0].c, cfg_.stages[1].c, cfg_.stages[2].c,
                                cfg_.stages[3].c};
    decoder_ = Decoder<T>(params_, init_, "decoder", dims, cfg_.decoder_dim, cfg_.num_classes);
    params_.mark_all_requires_grad();
  }

  Tensor<T> forward(const Tensor<T>& image) const {
    StageOutputs unused;
    return forward(image, unused);
  }

  Tensor<T> forward(const Tensor<T>& image, StageOutputs& stages) const {
    if (image.rank() != 4 || image.dim(1) != 3)
      throw ShapeError(str_cat("expected image [B,3,H,W], got ", shape_str(image.shape())));
    const int64_t h = image.dim(2), w = image.dim(3);
    if (h % 32 != 0 || w % 32 != 0)
      throw ValueError(str_cat("input size ", h, "x", w, " not divisible by 32"));

    std::array<SeqResult<T>, 4> te_seq;
    if (cfg_.use_ce) {
      Tensor<T> x = image;
      for (int i = 0; i < 4; ++i) {
        x = ce_[i].forward(x);
        stages.ce[i] = x;
      }
    }
    if (cfg_.use_te) {
      Tensor<T> m = image;
      for (int i = 0; i < 4; ++i) {
        te_seq[i] = te_[i].forward(m);
        m = seq_to_map(te_seq[i].seq, te_seq[i].h, te_seq[i].w);
        stages.te[i] = m;
      }
    }
    for (int i = 0; i < 4; ++i) {
      if (cfg_.use_ce && cfg_.use_te)
        stages.fused[i] = cef_[i].forward(stages.ce[i], te_seq[i].seq, te_seq[i].h, te_seq[i].w);
      else if (cfg_.use_ce)
        stages.fused[i] = stages.ce[i];
      else
        stages.fused[i] = stages.te[i];
    }
    return decoder_.forward(stages.fused, h, w);
  }

  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }
  const ModelConfig& config() const { return cfg_; }
  uint64_t seed() const { return init_.seed(); }

 private:
  ModelConfig cfg_;
  Initializer init_;
  ParamStore<T> params_;
  std::array<CeStage<T>, 4> ce_;
  std::array<TeStage<T>, 4> te_;
  std::array<CefFuse<T>, 4> cef_;
  Decoder<T> decoder_;
};

}  // namespace leformer

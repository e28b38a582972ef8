#pragma once

#include <string>

#include "leformer/model/config.hpp"
#include "leformer/nn/layers.hpp"

namespace leformer {

// [B,N,C] sequence <-> [B,C,h,w] feature map.
template <typename T>
Tensor<T> seq_to_map(const Tensor<T>& seq, int64_t h, int64_t w) {
  if (seq.rank() != 3 || seq.dim(1) != h * w)
    throw ShapeError(str_cat("sequence ", shape_str(seq.shape()), " does not cover ", h, "x", w));
  const int64_t b = seq.dim(0), c = seq.dim(2);
  return reshape(permute(seq, {0, 2, 1}), {b, c, h, w});
}

template <typename T>
Tensor<T> map_to_seq(const Tensor<T>& map) {
  if (map.rank() != 4) throw ShapeError("map_to_seq expects [B,C,h,w]");
  const int64_t b = map.dim(0), c = map.dim(1), n = map.dim(2) * map.dim(3);
  return permute(reshape(map, {b, c, n}), {0, 2, 1});
}

// Convolutional block attention: channel gate from pooled-feature MLP, then a
// spatial gate from a 7x7 conv over channel mean/max maps.
template <typename T>
class Cbam {
 public:
  Cbam() = default;
  Cbam(ParamStore<T>& ps, const Initializer& init, const std::string& name, int64_t channels,
       int64_t reduction)
      : channels_(channels) {
    if (channels < reduction)
      throw ValueError(str_cat("CBAM channels ", channels, " < reduction ", reduction));
    const int64_t hidden = std::max<int64_t>(1, channels / reduction);
    fc1_ = Linear<T>(ps, init, name + "/fc1", channels, hidden);
    fc2_ = Linear<T>(ps, init, name + "/fc2", hidden, channels);
    spatial_ = Conv2dLayer<T>(ps, init, name + "/spatial", 2, 1, 7, 1, 3);
  }

  // sigmoid(MLP(avgpool(x)) + MLP(maxpool(x))), shape [B,C]. The hidden
  // activation is GELU like the rest of the architecture; with the narrow
  // reduced widths a ReLU unit can die at init and stall the channel gate.
  Tensor<T> channel_attention(const Tensor<T>& x) const {
    auto avg = reduce_mean(x, {2, 3});
    auto mx = reduce_max(x, {2, 3});
    auto shared = [&](const Tensor<T>& v) { return fc2_.forward(gelu(fc1_.forward(v))); };
    return sigmoid(add(shared(avg), shared(mx)));
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    const int64_t b = x.dim(0);
    auto ca = reshape(channel_attention(x), {b, channels_, 1, 1});
    auto xc = mul(x, ca);
    auto mean_map = reduce_mean(xc, {1}, true);
    auto max_map = reduce_max(xc, {1}, true);
    auto sa = sigmoid(spatial_.forward(concat<T>({mean_map, max_map}, 1)));
    return mul(xc, sa);
  }

 private:
  Linear<T> fc1_, fc2_;
  Conv2dLayer<T> spatial_;
  int64_t channels_ = 0;
};

// Multi-scale spatial-channel attention: four parallel depthwise 3x3 convs at
// dilation 1..4, concatenated, reweighted by CBAM, reduced back to C by a
// pointwise conv, plus a residual.
template <typename T>
class Msca {
 public:
  Msca() = default;
  Msca(ParamStore<T>& ps, const Initializer& init, const std::string& name, int64_t channels,
       int64_t cbam_reduction) {
    for (int d = 1; d <= 4; ++d)
      dilated_[d - 1] = Conv2dLayer<T>(ps, init, str_cat(name, "/dilated", d), channels, channels,
                                       3, 1, d, d, channels, true);
    cbam_ = Cbam<T>(ps, init, name + "/cbam", 4 * channels, cbam_reduction);
    proj_ = Conv2dLayer<T>(ps, init, name + "/proj", 4 * channels, channels, 1, 1, 0);
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    std::vector<Tensor<T>> branches;
    branches.reserve(4);
    for (const auto& conv : dilated_) branches.push_back(conv.forward(x));
    auto weighted = cbam_.forward(concat(branches, 1));
    return add(x, proj_.forward(weighted));
  }

  const Conv2dLayer<T>& dilated_branch(int i) const { return dilated_[i]; }
  const Cbam<T>& cbam() const { return cbam_; }

 private:
  std::array<Conv2dLayer<T>, 4> dilated_;
  Cbam<T> cbam_;
  Conv2dLayer<T> proj_;
};

// One CNN-encoder stage: DW-separable downsampling conv + GELU, then MSCA.
template <typename T>
class CeStage {
 public:
  CeStage() = default;
  CeStage(ParamStore<T>& ps, const Initializer& init, const std::string& name,
          const StageConfig& st, int64_t cin, int64_t cbam_reduction, bool use_msca)
      : dw_(ps, init, name + "/dw", cin, st.c, st.k, st.s, st.p), use_msca_(use_msca) {
    if (use_msca) msca_ = Msca<T>(ps, init, name + "/msca", st.c, cbam_reduction);
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    auto y = gelu(dw_.forward(x));
    return use_msca_ ? msca_.forward(y) : y;
  }

 private:
  DwSeparableConv<T> dw_;
  Msca<T> msca_;
  bool use_msca_ = false;
};

// Multi-head scaled dot-product attention over [B,N,C] sequences. When
// weights_out is given it receives the softmaxed score matrix [B*heads,Nq,Nk].
template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                               int64_t heads, Tensor<T>* weights_out = nullptr) {
  const int64_t b = q.dim(0), nq = q.dim(1), c = q.dim(2), nk = k.dim(1);
  if (c % heads != 0) throw ValueError(str_cat("channels ", c, " not divisible by heads ", heads));
  const int64_t dh = c / heads;
  auto split = [&](const Tensor<T>& x, int64_t n) {
    return reshape(permute(reshape(x, {b, n, heads, dh}), {0, 2, 1, 3}), {b * heads, n, dh});
  };
  auto qh = split(q, nq);
  auto kh = split(k, nk);
  auto vh = split(v, nk);
  auto scores = scale(matmul(qh, permute(kh, {0, 2, 1})),
                      static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh))));
  auto attn = softmax(scores, 2);
  if (weights_out) *weights_out = Tensor<T>::from_data(attn.shape(), attn.values());
  auto out = matmul(attn, vh);
  return reshape(permute(reshape(out, {b, heads, nq, dh}), {0, 2, 1, 3}), {b, nq, c});
}

// Efficient self-attention with the sequence-reduction trick: K and V come
// from the sequence reshaped to a map, reduced by an RxR stride-R conv and
// layer-normalized; for R=1 the reduction is skipped entirely.
template <typename T>
class EfficientSelfAttention {
 public:
  EfficientSelfAttention() = default;
  EfficientSelfAttention(ParamStore<T>& ps, const Initializer& init, const std::string& name,
                         int64_t channels, int64_t heads, int64_t reduction)
      : heads_(heads), reduction_(reduction) {
    q_ = Linear<T>(ps, init, name + "/q", channels, channels);
    k_ = Linear<T>(ps, init, name + "/k", channels, channels);
    v_ = Linear<T>(ps, init, name + "/v", channels, channels);
    proj_ = Linear<T>(ps, init, name + "/proj", channels, channels);
    if (reduction > 1) {
      sr_ = Conv2dLayer<T>(ps, init, name + "/sr", channels, channels, reduction, reduction, 0, 1,
                           1, /*bias=*/false);
      sr_norm_ = LayerNormLayer<T>(ps, init, name + "/sr_norm", channels);
    }
  }

  Tensor<T> forward(const Tensor<T>& x, int64_t h, int64_t w,
                    Tensor<T>* weights_out = nullptr) const {
    if (x.dim(1) != h * w)
      throw ShapeError(str_cat("attention sequence length ", x.dim(1), " != ", h, "*", w));
    if (h % reduction_ != 0 || w % reduction_ != 0)
      throw ValueError(str_cat("spatial size ", h, "x", w, " not divisible by reduction ",
                               reduction_));
    auto q = q_.forward(x);
    Tensor<T> kv_src = x;
    if (reduction_ > 1) {
      auto reduced = sr_.forward(seq_to_map(x, h, w));
      kv_src = sr_norm_.forward(map_to_seq(reduced));
    }
    auto out = multi_head_attention(q, k_.forward(kv_src), v_.forward(kv_src), heads_,
                                    weights_out);
    return proj_.forward(out);
  }

  int64_t reduction() const { return reduction_; }

 private:
  Linear<T> q_, k_, v_, proj_;
  Conv2dLayer<T> sr_;
  LayerNormLayer<T> sr_norm_;
  int64_t heads_ = 1, reduction_ = 1;
};

// Mix-FFN: MLP(GELU(Conv3x3(MLP(x)))) with the positional 3x3 depthwise conv
// applied in the spatial domain. forward() includes the residual; blocks wire
// the residual around their norm via core().
template <typename T>
class MixFfn {
 public:
  MixFfn() = default;
  MixFfn(ParamStore<T>& ps, const Initializer& init, const std::string& name, int64_t channels,
         int64_t ratio) {
    const int64_t hidden = channels * ratio;
    fc1_ = Linear<T>(ps, init, name + "/fc1", channels, hidden);
    dw_ = Conv2dLayer<T>(ps, init, name + "/dwconv", hidden, hidden, 3, 1, 1, 1, hidden, true);
    fc2_ = Linear<T>(ps, init, name + "/fc2", hidden, channels);
  }

  Tensor<T> core(const Tensor<T>& x, int64_t h, int64_t w) const {
    if (x.dim(1) != h * w)
      throw ShapeError(str_cat("ffn sequence length ", x.dim(1), " != ", h, "*", w));
    auto hid = fc1_.forward(x);
    auto conv = dw_.forward(seq_to_map(hid, h, w));
    return fc2_.forward(map_to_seq(gelu(conv)));
  }

  Tensor<T> forward(const Tensor<T>& x, int64_t h, int64_t w) const {
    return add(x, core(x, h, w));
  }

 private:
  Linear<T> fc1_, fc2_;
  Conv2dLayer<T> dw_;
};

enum class BlockKind { etl, ptl };

// Pre-norm transformer block. ETL mixes tokens with efficient self-attention;
// PTL replaces it with the 3x3 average-pooling mixer pool(u) - u.
template <typename T>
class TransformerBlock {
 public:
  TransformerBlock() = default;
  TransformerBlock(ParamStore<T>& ps, const Initializer& init, const std::string& name,
                   const StageConfig& st, int64_t mlp_ratio, BlockKind kind)
      : kind_(kind) {
    ln1_ = LayerNormLayer<T>(ps, init, name + "/ln1", st.c);
    if (kind == BlockKind::etl)
      attn_ = EfficientSelfAttention<T>(ps, init, name + "/attn", st.c, st.n, st.r);
    ln2_ = LayerNormLayer<T>(ps, init, name + "/ln2", st.c);
    ffn_ = MixFfn<T>(ps, init, name + "/ffn", st.c, mlp_ratio);
  }

  static Tensor<T> pool_mixer(const Tensor<T>& u, int64_t h, int64_t w) {
    auto m = seq_to_map(u, h, w);
    auto pooled = avg_pool2d(m, 3, 1, 1, /*include_pad=*/false);
    return map_to_seq(sub(pooled, m));
  }

  Tensor<T> forward(const Tensor<T>& x, int64_t h, int64_t w) const {
    auto u = ln1_.forward(x);
    auto mixed = kind_ == BlockKind::etl ? attn_.forward(u, h, w) : pool_mixer(u, h, w);
    auto y = add(x, mixed);
    return add(y, ffn_.core(ln2_.forward(y), h, w));
  }

  BlockKind kind() const { return kind_; }

 private:
  LayerNormLayer<T> ln1_, ln2_;
  EfficientSelfAttention<T> attn_;
  MixFfn<T> ffn_;
  BlockKind kind_ = BlockKind::etl;
};

template <typename T>
struct SeqResult {
  Tensor<T> seq;
  int64_t h = 0, w = 0;
};

// One transformer-encoder stage: overlapped patch merging (strided conv with
// kernel > stride, then layernorm) followed by L blocks and a final norm.
template <typename T>
class TeStage {
 public:
  TeStage() = default;
  TeStage(ParamStore<T>& ps, const Initializer& init, const std::string& name,
          const StageConfig& st, int64_t cin, int64_t mlp_ratio, BlockKind kind)
      : patch_(ps, init, name + "/patch", cin, st.c, st.k, st.s, st.p, 1, 1, /*bias=*/false),
        patch_norm_(ps, init, name + "/patch_norm", st.c) {
    blocks_.reserve(st.l);
    for (int64_t i = 1; i <= st.l; ++i)
      blocks_.emplace_back(ps, init, str_cat(name, "/block", i), st, mlp_ratio, kind);
    norm_ = LayerNormLayer<T>(ps, init, name + "/norm", st.c);
  }

  SeqResult<T> forward(const Tensor<T>& x_map) const {
    auto embedded = patch_.forward(x_map);
    const int64_t h = embedded.dim(2), w = embedded.dim(3);
    auto seq = patch_norm_.forward(map_to_seq(embedded));
    for (const auto& blk : blocks_) seq = blk.forward(seq, h, w);
    return {norm_.forward(seq), h, w};
  }

  const std::vector<TransformerBlock<T>>& blocks() const { return blocks_; }

 private:
  Conv2dLayer<T> patch_;
  LayerNormLayer<T> patch_norm_;
  std::vector<TransformerBlock<T>> blocks_;
  LayerNormLayer<T> norm_;
};

// Cross-encoder fusion: the TE sequence is reshaped to a map, concatenated
// with the CE map (TE half first), and fused by a pointwise conv + GELU.
template <typename T>
class CefFuse {
 public:
  CefFuse() = default;
  CefFuse(ParamStore<T>& ps, const Initializer& init, const std::string& name, int64_t channels)
      : fuse_(ps, init, name + "/fuse", 2 * channels, channels, 1) {}

  Tensor<T> forward(const Tensor<T>& ce_map, const Tensor<T>& te_seq, int64_t h, int64_t w) const {
    auto te_map = seq_to_map(te_seq, h, w);
    if (ce_map.shape() != te_map.shape())
      throw ShapeError(str_cat("CEF stage shape mismatch: CE ", shape_str(ce_map.shape()),
                               " vs TE ", shape_str(te_map.shape())));
    return gelu(fuse_.forward(concat<T>({te_map, ce_map}, 1)));
  }

 private:
  Conv2dLayer<T> fuse_;
};

// SegFormer-style lightweight decoder: per-stage pointwise projections,
// bilinear upsampling to the stage-1 grid, concat, pointwise fuse + GELU,
// pointwise classifier, then upsample to the input size. Emits logits.
template <typename T>
class Decoder {
 public:
  Decoder() = default;
  Decoder(ParamStore<T>& ps, const Initializer& init, const std::string& name,
          const std::array<int64_t, 4>& stage_dims, int64_t decoder_dim, int64_t num_classes) {
    for (int i = 0; i < 4; ++i)
      proj_[i] = Conv2dLayer<T>(ps, init, str_cat(name, "/proj", i + 1), stage_dims[i],
                                decoder_dim, 1);
    fuse_ = Conv2dLayer<T>(ps, init, name + "/fuse", 4 * decoder_dim, decoder_dim, 1);
    classifier_ = Conv2dLayer<T>(ps, init, name + "/classifier", decoder_dim, num_classes, 1);
  }

  Tensor<T> forward(const std::array<Tensor<T>, 4>& fused, int64_t out_h, int64_t out_w) const {
    const int64_t h0 = fused[0].dim(2), w0 = fused[0].dim(3);
    std::vector<Tensor<T>> maps;
    maps.reserve(4);
    for (int i = 0; i < 4; ++i) {
      auto p = proj_[i].forward(fused[i]);
      maps.push_back(i == 0 ? p : upsample_bilinear(p, h0, w0));
    }
    auto mixed = gelu(fuse_.forward(concat(maps, 1)));
    return upsample_bilinear(classifier_.forward(mixed), out_h, out_w);
  }

 private:
  std::array<Conv2dLayer<T>, 4> proj_;
  Conv2dLayer<T> fuse_, classifier_;
};

}  // namespace leformer

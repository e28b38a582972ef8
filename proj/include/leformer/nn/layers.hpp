#pragma once

#include <string>

#include "leformer/core/ops.hpp"
#include "leformer/nn/init.hpp"
#include "leformer/nn/params.hpp"

namespace leformer {

// y = x W^T + b.
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(ParamStore<T>& ps, const Initializer& init, const std::string& name, int64_t in,
         int64_t out, bool bias = true)
      : in_(in), out_(out) {
    w_ = ps.add(name + "/weight", {out, in});
    init.trunc_normal(w_, name + "/weight");
    if (bias) {
      b_ = ps.add(name + "/bias", {out});
      init.zeros(b_);
    }
  }

  Tensor<T> forward(const Tensor<T>& x) const { return linear_op(x, w_, b_); }

  const Tensor<T>& weight() const { return w_; }
  const Tensor<T>& bias() const { return b_; }
  int64_t in_features() const { return in_; }
  int64_t out_features() const { return out_; }

 private:
  Tensor<T> w_, b_;
  int64_t in_ = 0, out_ = 0;
};

template <typename T>
class Conv2dLayer {
 public:
  Conv2dLayer() = default;
  Conv2dLayer(ParamStore<T>& ps, const Initializer& init, const std::string& name, int64_t cin,
              int64_t cout, int64_t k, int64_t stride = 1, int64_t pad = 0, int64_t dilation = 1,
              int64_t groups = 1, bool bias = true) {
    spec_.stride_h = spec_.stride_w = stride;
    spec_.pad_h = spec_.pad_w = pad;
    spec_.dil_h = spec_.dil_w = dilation;
    spec_.groups = groups;
    w_ = ps.add(name + "/weight", {cout, cin / groups, k, k});
    init.kaiming_fan_out(w_, name + "/weight", cout * k * k / groups);
    if (bias) {
      b_ = ps.add(name + "/bias", {cout});
      init.zeros(b_);
    }
  }

  Tensor<T> forward(const Tensor<T>& x) const { return conv2d(x, w_, b_, spec_); }

  const Tensor<T>& weight() const { return w_; }
  const Tensor<T>& bias() const { return b_; }
  const Conv2dSpec& spec() const { return spec_; }

 private:
  Tensor<T> w_, b_;
  Conv2dSpec spec_;
};

template <typename T>
class LayerNormLayer {
 public:
  LayerNormLayer() = default;
  LayerNormLayer(ParamStore<T>& ps, const Initializer& init, const std::string& name, int64_t dim,
                 T eps = static_cast<T>(1e-6))
      : eps_(eps) {
    gamma_ = ps.add(name + "/gamma", {dim});
    beta_ = ps.add(name + "/beta", {dim});
    init.ones(gamma_);
    init.zeros(beta_);
  }

  // Normalizes the trailing dimension.
  Tensor<T> forward(const Tensor<T>& x) const { return layernorm(x, 1, gamma_, beta_, eps_); }

 private:
  Tensor<T> gamma_, beta_;
  T eps_ = static_cast<T>(1e-6);
};

// Depthwise K x K conv followed by a pointwise 1x1; both biased. Used as the
// downsampling block of each CNN-encoder stage.
template <typename T>
class DwSeparableConv {
 public:
  DwSeparableConv() = default;
  DwSeparableConv(ParamStore<T>& ps, const Initializer& init, const std::string& name,
                  int64_t cin, int64_t cout, int64_t k, int64_t stride, int64_t pad)
      : depthwise_(ps, init, name + "/depthwise", cin, cin, k, stride, pad, 1, cin, true),
        pointwise_(ps, init, name + "/pointwise", cin, cout, 1, 1, 0, 1, 1, true) {}

  Tensor<T> forward(const Tensor<T>& x) const {
    return pointwise_.forward(depthwise_.forward(x));
  }

  const Conv2dLayer<T>& depthwise() const { return depthwise_; }
  const Conv2dLayer<T>& pointwise() const { return pointwise_; }

 private:
  Conv2dLayer<T> depthwise_, pointwise_;
};

}  // namespace leformer

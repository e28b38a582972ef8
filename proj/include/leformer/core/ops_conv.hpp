#pragma once

#include "leformer/core/ops_matmul.hpp"
#include "leformer/core/tensor.hpp"

namespace leformer {

struct Conv2dSpec {
  int64_t stride_h = 1, stride_w = 1;
  int64_t pad_h = 0, pad_w = 0;
  int64_t dil_h = 1, dil_w = 1;
  int64_t groups = 1;
};

inline int64_t conv_out_extent(int64_t in, int64_t pad, int64_t dil, int64_t k, int64_t stride) {
  return (in + 2 * pad - dil * (k - 1) - 1) / stride + 1;
}

namespace detail {

// col is [Cin_g*Kh*Kw, Ho*Wo] for one (sample, group).
template <typename T>
void im2col(const T* x, int64_t cin_g, int64_t h, int64_t w, int64_t kh, int64_t kw,
            const Conv2dSpec& s, int64_t ho, int64_t wo, T* col) {
  for (int64_t c = 0; c < cin_g; ++c) {
    const T* xc = x + c * h * w;
    for (int64_t i = 0; i < kh; ++i) {
      for (int64_t j = 0; j < kw; ++j) {
        T* row = col + ((c * kh + i) * kw + j) * ho * wo;
        for (int64_t oh = 0; oh < ho; ++oh) {
          const int64_t ih = oh * s.stride_h - s.pad_h + i * s.dil_h;
          if (ih < 0 || ih >= h) {
            for (int64_t ow = 0; ow < wo; ++ow) row[oh * wo + ow] = T(0);
            continue;
          }
          const T* xr = xc + ih * w;
          for (int64_t ow = 0; ow < wo; ++ow) {
            const int64_t iw = ow * s.stride_w - s.pad_w + j * s.dil_w;
            row[oh * wo + ow] = (iw >= 0 && iw < w) ? xr[iw] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, int64_t cin_g, int64_t h, int64_t w, int64_t kh, int64_t kw,
                const Conv2dSpec& s, int64_t ho, int64_t wo, T* dx) {
  for (int64_t c = 0; c < cin_g; ++c) {
    T* xc = dx + c * h * w;
    for (int64_t i = 0; i < kh; ++i) {
      for (int64_t j = 0; j < kw; ++j) {
        const T* row = col + ((c * kh + i) * kw + j) * ho * wo;
        for (int64_t oh = 0; oh < ho; ++oh) {
          const int64_t ih = oh * s.stride_h - s.pad_h + i * s.dil_h;
          if (ih < 0 || ih >= h) continue;
          T* xr = xc + ih * w;
          for (int64_t ow = 0; ow < wo; ++ow) {
            const int64_t iw = ow * s.stride_w - s.pad_w + j * s.dil_w;
            if (iw >= 0 && iw < w) xr[iw] += row[oh * wo + ow];
          }
        }
      }
    }
  }
}

}  // namespace detail

// x [N,Cin,H,W], w [Cout,Cin/groups,Kh,Kw], bias [Cout] or empty.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                 const Conv2dSpec& spec) {
  if (x.rank() != 4 || w.rank() != 4)
    throw ShapeError(str_cat("conv2d expects x [N,C,H,W] and w [O,I,Kh,Kw], got ",
                             shape_str(x.shape()), " and ", shape_str(w.shape())));
  const int64_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), wdt = x.dim(3);
  const int64_t cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const int64_t g = spec.groups;
  if (g < 1 || cin % g != 0 || cout % g != 0)
    throw ValueError(str_cat("conv2d channels not divisible by groups: Cin=", cin, " Cout=", cout,
                             " groups=", g));
  if (w.dim(1) != cin / g)
    throw ShapeError(str_cat("conv2d weight in-channels ", w.dim(1), " != Cin/groups ", cin / g));
  if (h + 2 * spec.pad_h < spec.dil_h * (kh - 1) + 1 ||
      wdt + 2 * spec.pad_w < spec.dil_w * (kw - 1) + 1)
    throw ShapeError(str_cat("conv2d kernel larger than padded input: input ",
                             shape_str(x.shape()), " kernel ", kh, "x", kw, " dilation ",
                             spec.dil_h, "x", spec.dil_w, " pad ", spec.pad_h, "x", spec.pad_w));
  const bool has_bias = bias.numel() > 0;
  if (has_bias && (bias.rank() != 1 || bias.dim(0) != cout))
    throw ShapeError("conv2d bias must be [Cout]");

  const int64_t ho = conv_out_extent(h, spec.pad_h, spec.dil_h, kh, spec.stride_h);
  const int64_t wo = conv_out_extent(wdt, spec.pad_w, spec.dil_w, kw, spec.stride_w);
  const int64_t cin_g = cin / g, cout_g = cout / g;
  const int64_t patch = cin_g * kh * kw, positions = ho * wo;

  Tensor<T> out({n, cout, ho, wo});
  std::vector<T> col(static_cast<size_t>(patch * positions));
  for (int64_t ni = 0; ni < n; ++ni) {
    for (int64_t gi = 0; gi < g; ++gi) {
      const T* xg = x.data() + (ni * cin + gi * cin_g) * h * wdt;
      T* og = out.data() + (ni * cout + gi * cout_g) * positions;
      detail::im2col(xg, cin_g, h, wdt, kh, kw, spec, ho, wo, col.data());
      detail::mm_nn(og, w.data() + gi * cout_g * patch, col.data(), cout_g, patch, positions);
    }
    if (has_bias) {
      T* on = out.data() + ni * cout * positions;
      for (int64_t c = 0; c < cout; ++c) {
        const T bv = bias.data()[c];
        T* oc = on + c * positions;
        for (int64_t p = 0; p < positions; ++p) oc[p] += bv;
      }
    }
  }
  detail::check_finite(out, "conv2d");

  if (detail::tape_should_track<T>({&x, &w, &bias})) {
    detail::mark_tracked_output(out);
    auto xs = x.storage();
    auto ws = w.storage();
    auto bs = bias.storage();
    auto os = out.storage();
    const Conv2dSpec sp = spec;
    GradTape<T>::active()->record([xs, ws, bs, os, sp, n, cin, h, wdt, cout, kh, kw, g, cin_g,
                                   cout_g, patch, positions, ho, wo, has_bias]() {
      std::vector<T> col(static_cast<size_t>(patch * positions));
      std::vector<T> dcol(static_cast<size_t>(patch * positions));
      for (int64_t ni = 0; ni < n; ++ni) {
        for (int64_t gi = 0; gi < g; ++gi) {
          const T* xg = xs->data.data() + (ni * cin + gi * cin_g) * h * wdt;
          const T* gg = os->grad.data() + (ni * cout + gi * cout_g) * positions;
          const T* wg = ws->data.data() + gi * cout_g * patch;
          if (ws->tracked) {
            detail::im2col(xg, cin_g, h, wdt, kh, kw, sp, ho, wo, col.data());
            // dW += G * col^T
            detail::mm_nt(ws->grad.data() + gi * cout_g * patch, gg, col.data(), cout_g,
                          positions, patch);
          }
          if (xs->tracked) {
            std::fill(dcol.begin(), dcol.end(), T(0));
            // dcol = W^T * G
            detail::mm_tn(dcol.data(), wg, gg, cout_g, patch, positions);
            detail::col2im_add(dcol.data(), cin_g, h, wdt, kh, kw, sp, ho, wo,
                               xs->grad.data() + (ni * cin + gi * cin_g) * h * wdt);
          }
        }
        if (has_bias && bs->tracked) {
          const T* gn = os->grad.data() + ni * cout * positions;
          T* gb = bs->grad.data();
          for (int64_t c = 0; c < cout; ++c)
            for (int64_t p = 0; p < positions; ++p) gb[c] += gn[c * positions + p];
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Conv2dSpec& spec) {
  return conv2d(x, w, Tensor<T>(), spec);
}

enum class PoolKind { avg, max };

// Average pooling divides by the full kernel area when include_pad is true,
// otherwise by the number of in-bounds taps. Max pooling ignores padding.
template <typename T>
Tensor<T> pool2d(PoolKind kind, const Tensor<T>& x, int64_t kh, int64_t kw, int64_t stride_h,
                 int64_t stride_w, int64_t pad_h, int64_t pad_w, bool include_pad = true) {
  if (x.rank() != 4) throw ShapeError("pool2d expects x [N,C,H,W]");
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h + 2 * pad_h < kh || w + 2 * pad_w < kw)
    throw ShapeError(str_cat("pool2d kernel larger than padded input: input ",
                             shape_str(x.shape()), " kernel ", kh, "x", kw));
  const int64_t ho = conv_out_extent(h, pad_h, 1, kh, stride_h);
  const int64_t wo = conv_out_extent(w, pad_w, 1, kw, stride_w);

  Tensor<T> out({n, c, ho, wo});
  std::vector<int64_t> argmax;
  if (kind == PoolKind::max) argmax.assign(static_cast<size_t>(out.numel()), 0);

  const T* px = x.data();
  T* po = out.data();
  for (int64_t nc = 0; nc < n * c; ++nc) {
    const T* xc = px + nc * h * w;
    for (int64_t oh = 0; oh < ho; ++oh) {
      for (int64_t ow = 0; ow < wo; ++ow) {
        const int64_t o = (nc * ho + oh) * wo + ow;
        if (kind == PoolKind::avg) {
          T acc = T(0);
          int64_t count = 0;
          for (int64_t i = 0; i < kh; ++i) {
            const int64_t ih = oh * stride_h - pad_h + i;
            if (ih < 0 || ih >= h) continue;
            for (int64_t j = 0; j < kw; ++j) {
              const int64_t iw = ow * stride_w - pad_w + j;
              if (iw < 0 || iw >= w) continue;
              acc += xc[ih * w + iw];
              ++count;
            }
          }
          po[o] = acc / static_cast<T>(include_pad ? kh * kw : count);
        } else {
          T best = T(0);
          int64_t best_idx = -1;
          for (int64_t i = 0; i < kh; ++i) {
            const int64_t ih = oh * stride_h - pad_h + i;
            if (ih < 0 || ih >= h) continue;
            for (int64_t j = 0; j < kw; ++j) {
              const int64_t iw = ow * stride_w - pad_w + j;
              if (iw < 0 || iw >= w) continue;
              const T v = xc[ih * w + iw];
              if (best_idx < 0 || v > best) {
                best = v;
                best_idx = nc * h * w + ih * w + iw;
              }
            }
          }
          po[o] = best;
          argmax[static_cast<size_t>(o)] = best_idx;
        }
      }
    }
  }
  detail::check_finite(out, "pool2d");

  if (detail::tape_should_track<T>({&x})) {
    detail::mark_tracked_output(out);
    auto xs = x.storage();
    auto os = out.storage();
    if (kind == PoolKind::max) {
      GradTape<T>::active()->record([xs, os, argmax]() {
        const T* g = os->grad.data();
        T* gx = xs->grad.data();
        for (size_t o = 0; o < argmax.size(); ++o)
          if (argmax[o] >= 0) gx[argmax[o]] += g[o];
      });
    } else {
      GradTape<T>::active()->record(
          [xs, os, n, c, h, w, ho, wo, kh, kw, stride_h, stride_w, pad_h, pad_w, include_pad]() {
            const T* g = os->grad.data();
            T* gx = xs->grad.data();
            for (int64_t nc = 0; nc < n * c; ++nc) {
              for (int64_t oh = 0; oh < ho; ++oh) {
                for (int64_t ow = 0; ow < wo; ++ow) {
                  const int64_t o = (nc * ho + oh) * wo + ow;
                  int64_t count = 0;
                  if (!include_pad) {
                    for (int64_t i = 0; i < kh; ++i) {
                      const int64_t ih = oh * stride_h - pad_h + i;
                      if (ih < 0 || ih >= h) continue;
                      for (int64_t j = 0; j < kw; ++j) {
                        const int64_t iw = ow * stride_w - pad_w + j;
                        if (iw >= 0 && iw < w) ++count;
                      }
                    }
                  }
                  const T share = g[o] / static_cast<T>(include_pad ? kh * kw : count);
                  for (int64_t i = 0; i < kh; ++i) {
                    const int64_t ih = oh * stride_h - pad_h + i;
                    if (ih < 0 || ih >= h) continue;
                    for (int64_t j = 0; j < kw; ++j) {
                      const int64_t iw = ow * stride_w - pad_w + j;
                      if (iw >= 0 && iw < w) gx[nc * h * w + ih * w + iw] += share;
                    }
                  }
                }
              }
            }
          });
    }
  }
  return out;
}

template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& x, int64_t k, int64_t stride, int64_t pad,
                     bool include_pad = true) {
  return pool2d(PoolKind::avg, x, k, k, stride, stride, pad, pad, include_pad);
}

template <typename T>
Tensor<T> max_pool2d(const Tensor<T>& x, int64_t k, int64_t stride, int64_t pad) {
  return pool2d(PoolKind::max, x, k, k, stride, stride, pad, pad);
}

}  // namespace leformer

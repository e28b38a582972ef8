#pragma once

#include "leformer/core/tensor.hpp"

namespace leformer {

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape new_shape) {
  if (numel_of(new_shape) != x.numel())
    throw ShapeError(str_cat("reshape element count mismatch: ", shape_str(x.shape()), " -> ",
                             shape_str(new_shape)));
  Tensor<T> out = Tensor<T>::from_data(std::move(new_shape), x.values());
  if (detail::tape_should_track<T>({&x})) {
    detail::mark_tracked_output(out);
    auto xs = x.storage();
    auto os = out.storage();
    GradTape<T>::active()->record([xs, os]() {
      T* gx = xs->grad.data();
      const T* g = os->grad.data();
      for (size_t i = 0; i < xs->grad.size(); ++i) gx[i] += g[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<int>& axes) {
  const size_t r = x.rank();
  if (axes.size() != r) throw ValueError("permute axes rank mismatch");
  std::vector<bool> seen(r, false);
  Shape out_shape(r);
  for (size_t i = 0; i < r; ++i) {
    const int a = axes[i];
    if (a < 0 || a >= static_cast<int>(r) || seen[a])
      throw ValueError(str_cat("invalid permutation for rank ", r));
    seen[a] = true;
    out_shape[i] = x.dim(a);
  }

  const Shape in_strides = row_major_strides(x.shape());
  std::vector<int64_t> src_strides(r);
  for (size_t i = 0; i < r; ++i) src_strides[i] = in_strides[axes[i]];

  Tensor<T> out(out_shape);
  const T* px = x.data();
  T* po = out.data();
  const int64_t n = out.numel();
  std::vector<int64_t> coord(r, 0);
  int64_t src = 0;
  for (int64_t o = 0; o < n; ++o) {
    po[o] = px[src];
    for (int i = static_cast<int>(r) - 1; i >= 0; --i) {
      src += src_strides[i];
      if (++coord[i] < out_shape[i]) break;
      src -= src_strides[i] * out_shape[i];
      coord[i] = 0;
    }
  }

  if (detail::tape_should_track<T>({&x})) {
    detail::mark_tracked_output(out);
    auto xs = x.storage();
    auto os = out.storage();
    GradTape<T>::active()->record([xs, os, out_shape, src_strides, r]() {
      T* gx = xs->grad.data();
      const T* g = os->grad.data();
      const int64_t n = static_cast<int64_t>(os->grad.size());
      std::vector<int64_t> coord(r, 0);
      int64_t src = 0;
      for (int64_t o = 0; o < n; ++o) {
        gx[src] += g[o];
        for (int i = static_cast<int>(r) - 1; i >= 0; --i) {
          src += src_strides[i];
          if (++coord[i] < out_shape[i]) break;
          src -= src_strides[i] * out_shape[i];
          coord[i] = 0;
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& xs, int axis) {
  if (xs.empty()) throw ValueError("concat of zero tensors");
  const int a = detail::normalize_axis(axis, xs[0].rank());
  Shape out_shape = xs[0].shape();
  int64_t total = 0;
  for (const auto& t : xs) {
    if (t.rank() != xs[0].rank())
      throw ShapeError("concat operands must have equal rank");
    for (size_t d = 0; d < t.rank(); ++d)
      if (d != static_cast<size_t>(a) && t.dim(d) != xs[0].dim(d))
        throw ShapeError(str_cat("concat operands disagree on dim ", d, ": ",
                                 shape_str(xs[0].shape()), " vs ", shape_str(t.shape())));
    total += t.dim(a);
  }
  out_shape[a] = total;

  int64_t outer = 1, inner = 1;
  for (int i = 0; i < a; ++i) outer *= out_shape[i];
  for (size_t i = a + 1; i < out_shape.size(); ++i) inner *= out_shape[i];

  Tensor<T> out(out_shape);
  T* po = out.data();
  int64_t offset = 0;
  for (const auto& t : xs) {
    const int64_t la = t.dim(a);
    const T* pt = t.data();
    for (int64_t ou = 0; ou < outer; ++ou)
      std::copy(pt + ou * la * inner, pt + (ou + 1) * la * inner,
                po + (ou * total + offset) * inner);
    offset += la;
  }

  bool track = false;
  if (GradTape<T>::active())
    for (const auto& t : xs)
      if (t.requires_grad()) track = true;
  if (track) {
    detail::mark_tracked_output(out);
    std::vector<std::shared_ptr<TensorStorage<T>>> stores;
    std::vector<int64_t> lens;
    for (const auto& t : xs) {
      stores.push_back(t.storage());
      lens.push_back(t.dim(a));
    }
    auto os = out.storage();
    GradTape<T>::active()->record([stores, lens, os, outer, inner, total]() {
      const T* g = os->grad.data();
      int64_t offset = 0;
      for (size_t s = 0; s < stores.size(); ++s) {
        const int64_t la = lens[s];
        if (stores[s]->tracked) {
          T* gx = stores[s]->grad.data();
          for (int64_t ou = 0; ou < outer; ++ou) {
            const T* src = g + (ou * total + offset) * inner;
            T* dst = gx + ou * la * inner;
            for (int64_t i = 0; i < la * inner; ++i) dst[i] += src[i];
          }
        }
        offset += la;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, const std::vector<int64_t>& starts,
                const std::vector<int64_t>& sizes) {
  const size_t r = x.rank();
  if (starts.size() != r || sizes.size() != r)
    throw ValueError("slice starts/sizes rank mismatch");
  Shape out_shape(r);
  for (size_t i = 0; i < r; ++i) {
    if (starts[i] < 0 || sizes[i] <= 0 || starts[i] + sizes[i] > x.dim(i))
      throw ShapeError(str_cat("slice out of range on dim ", i, " of ", shape_str(x.shape())));
    out_shape[i] = sizes[i];
  }

  const Shape in_strides = row_major_strides(x.shape());
  Tensor<T> out(out_shape);
  const T* px = x.data();
  T* po = out.data();
  const int64_t n = out.numel();
  std::vector<int64_t> coord(r, 0);
  for (int64_t o = 0; o < n; ++o) {
    int64_t src = 0;
    for (size_t i = 0; i < r; ++i) src += (starts[i] + coord[i]) * in_strides[i];
    po[o] = px[src];
    for (int i = static_cast<int>(r) - 1; i >= 0; --i) {
      if (++coord[i] < out_shape[i]) break;
      coord[i] = 0;
    }
  }

  if (detail::tape_should_track<T>({&x})) {
    detail::mark_tracked_output(out);
    auto xs = x.storage();
    auto os = out.storage();
    GradTape<T>::active()->record([xs, os, starts, out_shape, in_strides, r]() {
      T* gx = xs->grad.data();
      const T* g = os->grad.data();
      const int64_t n = static_cast<int64_t>(os->grad.size());
      std::vector<int64_t> coord(r, 0);
      for (int64_t o = 0; o < n; ++o) {
        int64_t src = 0;
        for (size_t i = 0; i < r; ++i) src += (starts[i] + coord[i]) * in_strides[i];
        gx[src] += g[o];
        for (int i = static_cast<int>(r) - 1; i >= 0; --i) {
          if (++coord[i] < out_shape[i]) break;
          coord[i] = 0;
        }
      }
    });
  }
  return out;
}

// One axis of bilinear interpolation with align_corners=false (half-pixel
// centers, edge clamped).
struct BilinearTap {
  int64_t i0, i1;
  double w0, w1;
};

inline BilinearTap bilinear_tap(int64_t out_i, int64_t in_len, int64_t out_len) {
  const double scale = static_cast<double>(in_len) / static_cast<double>(out_len);
  const double src = (static_cast<double>(out_i) + 0.5) * scale - 0.5;
  const double f = std::floor(src);
  const double frac = src - f;
  auto clampi = [in_len](double v) {
    return std::min<int64_t>(in_len - 1, std::max<int64_t>(0, static_cast<int64_t>(v)));
  };
  return {clampi(f), clampi(f + 1), 1.0 - frac, frac};
}

template <typename T>
Tensor<T> upsample_bilinear(const Tensor<T>& x, int64_t out_h, int64_t out_w) {
  if (x.rank() != 4) throw ShapeError("upsample_bilinear expects x [N,C,H,W]");
  if (out_h <= 0 || out_w <= 0) throw ValueError("upsample_bilinear target size must be positive");
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);

  std::vector<BilinearTap> th(static_cast<size_t>(out_h)), tw(static_cast<size_t>(out_w));
  for (int64_t i = 0; i < out_h; ++i) th[i] = bilinear_tap(i, h, out_h);
  for (int64_t j = 0; j < out_w; ++j) tw[j] = bilinear_tap(j, w, out_w);

  Tensor<T> out({n, c, out_h, out_w});
  const T* px = x.data();
  T* po = out.data();
  for (int64_t nc = 0; nc < n * c; ++nc) {
    const T* xc = px + nc * h * w;
    T* oc = po + nc * out_h * out_w;
    for (int64_t i = 0; i < out_h; ++i) {
      const auto& ti = th[i];
      for (int64_t j = 0; j < out_w; ++j) {
        const auto& tj = tw[j];
        const double v = ti.w0 * (tj.w0 * xc[ti.i0 * w + tj.i0] + tj.w1 * xc[ti.i0 * w + tj.i1]) +
                         ti.w1 * (tj.w0 * xc[ti.i1 * w + tj.i0] + tj.w1 * xc[ti.i1 * w + tj.i1]);
        oc[i * out_w + j] = static_cast<T>(v);
      }
    }
  }
  detail::check_finite(out, "upsample_bilinear");

  if (detail::tape_should_track<T>({&x})) {
    detail::mark_tracked_output(out);
    auto xs = x.storage();
    auto os = out.storage();
    GradTape<T>::active()->record([xs, os, th, tw, n, c, h, w, out_h, out_w]() {
      const T* g = os->grad.data();
      T* gx = xs->grad.data();
      for (int64_t nc = 0; nc < n * c; ++nc) {
        T* gc = gx + nc * h * w;
        const T* go = g + nc * out_h * out_w;
        for (int64_t i = 0; i < out_h; ++i) {
          const auto& ti = th[i];
          for (int64_t j = 0; j < out_w; ++j) {
            const auto& tj = tw[j];
            const T gv = go[i * out_w + j];
            gc[ti.i0 * w + tj.i0] += static_cast<T>(ti.w0 * tj.w0) * gv;
            gc[ti.i0 * w + tj.i1] += static_cast<T>(ti.w0 * tj.w1) * gv;
            gc[ti.i1 * w + tj.i0] += static_cast<T>(ti.w1 * tj.w0) * gv;
            gc[ti.i1 * w + tj.i1] += static_cast<T>(ti.w1 * tj.w1) * gv;
          }
        }
      }
    });
  }
  return out;
}

}  // namespace leformer

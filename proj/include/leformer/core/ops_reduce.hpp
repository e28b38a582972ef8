#pragma once

#include "leformer/core/tensor.hpp"

namespace leformer {

enum class ReduceKind { sum, mean, max };

namespace detail {

inline void check_axes(const Shape& shape, const std::vector<int>& axes) {
  for (int a : axes)
    if (a < 0 || a >= static_cast<int>(shape.size()))
      throw ValueError(str_cat("invalid axis ", a, " for shape ", shape_str(shape)));
}

}  // namespace detail

template <typename T>
Tensor<T> reduce(ReduceKind kind, const Tensor<T>& x, const std::vector<int>& axes,
                 bool keepdims = false) {
  detail::check_axes(x.shape(), axes);
  std::vector<bool> reduced(x.rank(), false);
  for (int a : axes) reduced[a] = true;

  Shape out_shape;
  for (size_t i = 0; i < x.rank(); ++i) {
    if (reduced[i]) {
      if (keepdims) out_shape.push_back(1);
    } else {
      out_shape.push_back(x.dim(i));
    }
  }
  if (out_shape.empty()) out_shape = {1};

  // Map an input linear index to the output linear index by zeroing reduced dims.
  const Shape in_strides = row_major_strides(x.shape());
  Shape kept_strides(x.rank(), 0);
  {
    int64_t stride = 1;
    for (int i = static_cast<int>(x.rank()) - 1; i >= 0; --i) {
      if (!reduced[i]) {
        kept_strides[i] = stride;
        stride *= x.dim(i);
      }
    }
  }

  const int64_t n_in = x.numel();
  const int64_t n_out = numel_of(out_shape);
  int64_t reduce_count = 1;
  for (size_t i = 0; i < x.rank(); ++i)
    if (reduced[i]) reduce_count *= x.dim(i);

  const size_t rank = x.rank();
  auto out_index = [in_strides, kept_strides, rank](int64_t ii) {
    int64_t o = 0, rest = ii;
    for (size_t d = 0; d < rank; ++d) {
      const int64_t coord = rest / in_strides[d];
      rest %= in_strides[d];
      o += coord * kept_strides[d];
    }
    return o;
  };

  Tensor<T> out(out_shape);
  std::vector<int64_t> argmax;
  const T* px = x.data();
  T* po = out.data();
  if (kind == ReduceKind::max) {
    argmax.assign(static_cast<size_t>(n_out), -1);
    for (int64_t i = 0; i < n_in; ++i) {
      const int64_t o = out_index(i);
      if (argmax[o] < 0 || px[i] > po[o]) {
        po[o] = px[i];
        argmax[o] = i;
      }
    }
  } else {
    for (int64_t i = 0; i < n_in; ++i) po[out_index(i)] += px[i];
    if (kind == ReduceKind::mean)
      for (int64_t o = 0; o < n_out; ++o) po[o] /= static_cast<T>(reduce_count);
  }
  detail::check_finite(out, "reduce");

  if (detail::tape_should_track<T>({&x})) {
    detail::mark_tracked_output(out);
    auto xs = x.storage();
    auto os = out.storage();
    if (kind == ReduceKind::max) {
      GradTape<T>::active()->record([xs, os, argmax]() {
        const T* g = os->grad.data();
        T* gx = xs->grad.data();
        for (size_t o = 0; o < argmax.size(); ++o)
          if (argmax[o] >= 0) gx[argmax[o]] += g[o];
      });
    } else {
      const T denom = kind == ReduceKind::mean ? static_cast<T>(reduce_count) : T(1);
      GradTape<T>::active()->record([xs, os, out_index, n_in, denom]() {
        const T* g = os->grad.data();
        T* gx = xs->grad.data();
        for (int64_t i = 0; i < n_in; ++i) gx[i] += g[out_index(i)] / denom;
      });
    }
  }
  return out;
}

template <typename T>
Tensor<T> reduce_sum(const Tensor<T>& x, const std::vector<int>& axes, bool keepdims = false) {
  return reduce(ReduceKind::sum, x, axes, keepdims);
}
template <typename T>
Tensor<T> reduce_mean(const Tensor<T>& x, const std::vector<int>& axes, bool keepdims = false) {
  return reduce(ReduceKind::mean, x, axes, keepdims);
}
template <typename T>
Tensor<T> reduce_max(const Tensor<T>& x, const std::vector<int>& axes, bool keepdims = false) {
  return reduce(ReduceKind::max, x, axes, keepdims);
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& x) {
  std::vector<int> axes(x.rank());
  for (size_t i = 0; i < x.rank(); ++i) axes[i] = static_cast<int>(i);
  return reduce_sum(x, axes);
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis) {
  const int a = detail::normalize_axis(axis, x.rank());
  const int64_t len = x.dim(a);
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < a; ++i) outer *= x.dim(i);
  for (size_t i = a + 1; i < x.rank(); ++i) inner *= x.dim(i);

  Tensor<T> out(x.shape());
  const T* px = x.data();
  T* po = out.data();
  for (int64_t ou = 0; ou < outer; ++ou) {
    for (int64_t in = 0; in < inner; ++in) {
      const int64_t base = ou * len * inner + in;
      T mx = px[base];
      for (int64_t k = 1; k < len; ++k) mx = std::max(mx, px[base + k * inner]);
      T denom = T(0);
      for (int64_t k = 0; k < len; ++k) {
        const T e = static_cast<T>(std::exp(static_cast<double>(px[base + k * inner] - mx)));
        po[base + k * inner] = e;
        denom += e;
      }
      for (int64_t k = 0; k < len; ++k) po[base + k * inner] /= denom;
    }
  }
  detail::check_finite(out, "softmax");

  if (detail::tape_should_track<T>({&x})) {
    detail::mark_tracked_output(out);
    auto xs = x.storage();
    auto os = out.storage();
    GradTape<T>::active()->record([xs, os, outer, inner, len]() {
      const T* g = os->grad.data();
      const T* y = os->data.data();
      T* gx = xs->grad.data();
      for (int64_t ou = 0; ou < outer; ++ou) {
        for (int64_t in = 0; in < inner; ++in) {
          const int64_t base = ou * len * inner + in;
          T dot = T(0);
          for (int64_t k = 0; k < len; ++k) dot += g[base + k * inner] * y[base + k * inner];
          for (int64_t k = 0; k < len; ++k) {
            const int64_t i = base + k * inner;
            gx[i] += y[i] * (g[i] - dot);
          }
        }
      }
    });
  }
  return out;
}

// Normalizes over the trailing `normalized_rank` dims; gamma/beta span those
// dims (pass empty tensors to skip the affine part).
template <typename T>
Tensor<T> layernorm(const Tensor<T>& x, size_t normalized_rank, const Tensor<T>& gamma,
                    const Tensor<T>& beta, T eps) {
  if (eps <= T(0)) throw ValueError("layernorm eps must be positive");
  if (normalized_rank < 1 || normalized_rank > x.rank())
    throw ValueError(str_cat("layernorm normalized_rank ", normalized_rank, " invalid for rank ",
                             x.rank()));
  int64_t m = 1;
  for (size_t i = x.rank() - normalized_rank; i < x.rank(); ++i) m *= x.dim(i);
  const int64_t rows = x.numel() / m;
  const bool affine = gamma.numel() > 0;
  if (affine && (gamma.numel() != m || beta.numel() != m))
    throw ShapeError("layernorm gamma/beta must span the normalized dims");

  Tensor<T> out(x.shape());
  std::vector<T> inv_std(static_cast<size_t>(rows)), mean(static_cast<size_t>(rows));
  const T* px = x.data();
  T* po = out.data();
  const T* pg = affine ? gamma.data() : nullptr;
  const T* pb = affine ? beta.data() : nullptr;
  for (int64_t r = 0; r < rows; ++r) {
    const T* xr = px + r * m;
    T mu = T(0);
    for (int64_t k = 0; k < m; ++k) mu += xr[k];
    mu /= static_cast<T>(m);
    T var = T(0);
    for (int64_t k = 0; k < m; ++k) {
      const T d = xr[k] - mu;
      var += d * d;
    }
    var /= static_cast<T>(m);
    const T is = T(1) / static_cast<T>(std::sqrt(static_cast<double>(var + eps)));
    mean[r] = mu;
    inv_std[r] = is;
    T* orow = po + r * m;
    for (int64_t k = 0; k < m; ++k) {
      const T xhat = (xr[k] - mu) * is;
      orow[k] = affine ? pg[k] * xhat + pb[k] : xhat;
    }
  }
  detail::check_finite(out, "layernorm");

  if (detail::tape_should_track<T>({&x, &gamma, &beta})) {
    detail::mark_tracked_output(out);
    auto xs = x.storage();
    auto gs = gamma.storage();
    auto bs = beta.storage();
    auto os = out.storage();
    GradTape<T>::active()->record([xs, gs, bs, os, rows, m, affine, mean, inv_std]() {
      const T* g = os->grad.data();
      const T* px = xs->data.data();
      const T* pg = affine ? gs->data.data() : nullptr;
      T* gx = xs->tracked ? xs->grad.data() : nullptr;
      T* gg = (affine && gs->tracked) ? gs->grad.data() : nullptr;
      T* gb = (affine && bs->tracked) ? bs->grad.data() : nullptr;
      for (int64_t r = 0; r < rows; ++r) {
        const T* xr = px + r * m;
        const T* gr = g + r * m;
        const T mu = mean[r], is = inv_std[r];
        T sum_dxhat = T(0), sum_dxhat_xhat = T(0);
        for (int64_t k = 0; k < m; ++k) {
          const T xhat = (xr[k] - mu) * is;
          const T dxhat = affine ? gr[k] * pg[k] : gr[k];
          sum_dxhat += dxhat;
          sum_dxhat_xhat += dxhat * xhat;
          if (gg) gg[k] += gr[k] * xhat;
          if (gb) gb[k] += gr[k];
        }
        if (gx) {
          const T inv_m = T(1) / static_cast<T>(m);
          T* gxr = gx + r * m;
          for (int64_t k = 0; k < m; ++k) {
            const T xhat = (xr[k] - mu) * is;
            const T dxhat = affine ? gr[k] * pg[k] : gr[k];
            gxr[k] += is * (dxhat - inv_m * sum_dxhat - xhat * inv_m * sum_dxhat_xhat);
          }
        }
      }
    });
  }
  return out;
}

}  // namespace leformer

#pragma once

#include <cmath>
#include <optional>

#include "leformer/core/tensor.hpp"

namespace leformer {

// Trailing-dimension broadcasting: shapes align at the last dim; extents must
// match or be 1.
inline Shape broadcast_shape(const Shape& a, const Shape& b) {
  const size_t ra = a.size(), rb = b.size(), r = std::max(ra, rb);
  Shape out(r, 1);
  for (size_t i = 0; i < r; ++i) {
    const int64_t da = i < ra ? a[ra - 1 - i] : 1;
    const int64_t db = i < rb ? b[rb - 1 - i] : 1;
    if (da != db && da != 1 && db != 1)
      throw ShapeError(str_cat("shapes not broadcast-compatible: ", shape_str(a), " vs ",
                               shape_str(b)));
    out[r - 1 - i] = std::max(da, db);
  }
  return out;
}

namespace detail {

// Per-output-dim input strides, zero where the input broadcasts.
inline std::vector<int64_t> broadcast_strides(const Shape& in, const Shape& out) {
  const size_t ri = in.size(), ro = out.size();
  const Shape in_strides = row_major_strides(in);
  std::vector<int64_t> st(ro, 0);
  for (size_t i = 0; i < ri; ++i) {
    const size_t oi = ro - 1 - i, ii = ri - 1 - i;
    st[oi] = (in[ii] == 1 && out[oi] != 1) ? 0 : in_strides[ii];
  }
  return st;
}

// Odometer walk over `shape`, calling fn(a_off, b_off, out_linear).
template <typename Fn>
void for_each_broadcast(const Shape& shape, const std::vector<int64_t>& sa,
                        const std::vector<int64_t>& sb, Fn&& fn) {
  const int64_t n = numel_of(shape);
  const size_t r = shape.size();
  std::vector<int64_t> coord(r, 0);
  int64_t a_off = 0, b_off = 0;
  for (int64_t o = 0; o < n; ++o) {
    fn(a_off, b_off, o);
    for (int i = static_cast<int>(r) - 1; i >= 0; --i) {
      a_off += sa[i];
      b_off += sb[i];
      if (++coord[i] < shape[i]) break;
      a_off -= sa[i] * shape[i];
      b_off -= sb[i] * shape[i];
      coord[i] = 0;
    }
  }
}

}  // namespace detail

enum class EwKind { add, sub, mul, gelu, sigmoid, relu };

namespace detail {

template <typename T, typename FwdFn, typename BwdFn>
Tensor<T> binary_ew(const char* name, const Tensor<T>& a, const Tensor<T>& b, FwdFn fwd,
                    BwdFn bwd) {
  const Shape out_shape = broadcast_shape(a.shape(), b.shape());
  Tensor<T> out(out_shape);
  const bool same = a.shape() == b.shape() && a.shape() == out_shape;
  if (same) {
    const T* pa = a.data();
    const T* pb = b.data();
    T* po = out.data();
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = fwd(pa[i], pb[i]);
  } else {
    const auto sa = broadcast_strides(a.shape(), out_shape);
    const auto sb = broadcast_strides(b.shape(), out_shape);
    const T* pa = a.data();
    const T* pb = b.data();
    T* po = out.data();
    for_each_broadcast(out_shape, sa, sb,
                       [&](int64_t ai, int64_t bi, int64_t o) { po[o] = fwd(pa[ai], pb[bi]); });
  }
  check_finite(out, name);

  if (tape_should_track<T>({&a, &b})) {
    mark_tracked_output(out);
    auto as = a.storage();
    auto bs = b.storage();
    auto os = out.storage();
    Shape osh = out_shape;
    GradTape<T>::active()->record([as, bs, os, osh, bwd]() {
      const auto sa = broadcast_strides(as->shape, osh);
      const auto sb = broadcast_strides(bs->shape, osh);
      const T* g = os->grad.data();
      const T* pa = as->data.data();
      const T* pb = bs->data.data();
      T* ga = as->tracked ? as->grad.data() : nullptr;
      T* gb = bs->tracked ? bs->grad.data() : nullptr;
      for_each_broadcast(osh, sa, sb, [&](int64_t ai, int64_t bi, int64_t o) {
        bwd(g[o], pa[ai], pb[bi], ga ? &ga[ai] : nullptr, gb ? &gb[bi] : nullptr);
      });
    });
  }
  return out;
}

template <typename T, typename FwdFn, typename BwdFn>
Tensor<T> unary_ew(const char* name, const Tensor<T>& x, FwdFn fwd, BwdFn bwd) {
  Tensor<T> out(x.shape());
  const T* px = x.data();
  T* po = out.data();
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = fwd(px[i]);
  check_finite(out, name);

  if (tape_should_track<T>({&x})) {
    mark_tracked_output(out);
    auto xs = x.storage();
    auto os = out.storage();
    GradTape<T>::active()->record([xs, os, bwd]() {
      const T* g = os->grad.data();
      const T* px = xs->data.data();
      const T* py = os->data.data();
      T* gx = xs->grad.data();
      const int64_t n = static_cast<int64_t>(xs->data.size());
      for (int64_t i = 0; i < n; ++i) gx[i] += bwd(g[i], px[i], py[i]);
    });
  }
  return out;
}

inline double std_normal_cdf(double x) { return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))); }
inline double std_normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846);
}

}  // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary_ew<T>(
      "add", a, b, [](T x, T y) { return x + y; },
      [](T g, T, T, T* ga, T* gb) {
        if (ga) *ga += g;
        if (gb) *gb += g;
      });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary_ew<T>(
      "sub", a, b, [](T x, T y) { return x - y; },
      [](T g, T, T, T* ga, T* gb) {
        if (ga) *ga += g;
        if (gb) *gb -= g;
      });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary_ew<T>(
      "mul", a, b, [](T x, T y) { return x * y; },
      [](T g, T x, T y, T* ga, T* gb) {
        if (ga) *ga += g * y;
        if (gb) *gb += g * x;
      });
}

// Exact GELU, x * Phi(x) with the Gaussian CDF (not the tanh approximation).
template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  return detail::unary_ew<T>(
      "gelu", x,
      [](T v) { return static_cast<T>(static_cast<double>(v) * detail::std_normal_cdf(v)); },
      [](T g, T v, T) {
        const double d = static_cast<double>(v);
        return static_cast<T>(g * static_cast<T>(detail::std_normal_cdf(d) +
                                                 d * detail::std_normal_pdf(d)));
      });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return detail::unary_ew<T>(
      "sigmoid", x,
      [](T v) { return static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(v)))); },
      [](T g, T, T y) { return g * y * (T(1) - y); });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return detail::unary_ew<T>(
      "relu", x, [](T v) { return v > T(0) ? v : T(0); },
      [](T g, T v, T) { return v > T(0) ? g : T(0); });
}

// out = c * x for a plain scalar constant.
template <typename T>
Tensor<T> scale(const Tensor<T>& x, T c) {
  return detail::unary_ew<T>(
      "scale", x, [c](T v) { return c * v; }, [c](T g, T, T) { return c * g; });
}

// Enum-dispatch surface; binary kinds require b.
template <typename T>
Tensor<T> elementwise(EwKind kind, const Tensor<T>& a, const Tensor<T>* b = nullptr) {
  switch (kind) {
    case EwKind::add:
    case EwKind::sub:
    case EwKind::mul:
      if (b == nullptr) throw ValueError("binary elementwise kind requires two operands");
      if (kind == EwKind::add) return add(a, *b);
      if (kind == EwKind::sub) return sub(a, *b);
      return mul(a, *b);
    case EwKind::gelu:
      return gelu(a);
    case EwKind::sigmoid:
      return sigmoid(a);
    case EwKind::relu:
      return relu(a);
  }
  throw ValueError("unknown elementwise kind");
}

}  // namespace leformer

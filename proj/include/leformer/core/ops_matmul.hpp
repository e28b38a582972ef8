#pragma once

#include "leformer/core/tensor.hpp"

namespace leformer {
namespace detail {

// C[m,n] += A[m,k] * B[k,n]
template <typename T>
void mm_nn(T* c, const T* a, const T* b, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    T* ci = c + i * n;
    const T* ai = a + i * k;
    for (int64_t p = 0; p < k; ++p) {
      const T aip = ai[p];
      const T* bp = b + p * n;
      for (int64_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

// C[m,n] += A[m,k] * B[n,k]^T
template <typename T>
void mm_nt(T* c, const T* a, const T* b, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const T* ai = a + i * k;
    T* ci = c + i * n;
    for (int64_t j = 0; j < n; ++j) {
      const T* bj = b + j * k;
      T acc = T(0);
      for (int64_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] += acc;
    }
  }
}

// C[k,n] += A[m,k]^T * B[m,n]
template <typename T>
void mm_tn(T* c, const T* a, const T* b, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const T* ai = a + i * k;
    const T* bi = b + i * n;
    for (int64_t p = 0; p < k; ++p) {
      const T aip = ai[p];
      T* cp = c + p * n;
      for (int64_t j = 0; j < n; ++j) cp[j] += aip * bi[j];
    }
  }
}

}  // namespace detail

// Matrix product with an optional leading batch dimension on either operand.
// [m,k]x[k,n], [B,m,k]x[B,k,n], [B,m,k]x[k,n] are accepted.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  const size_t ra = a.rank(), rb = b.rank();
  if ((ra != 2 && ra != 3) || (rb != 2 && rb != 3))
    throw ShapeError(str_cat("matmul expects rank-2/3 operands, got ", shape_str(a.shape()),
                             " and ", shape_str(b.shape())));
  const int64_t batch = ra == 3 ? a.dim(0) : (rb == 3 ? b.dim(0) : 1);
  if (ra == 3 && rb == 3 && a.dim(0) != b.dim(0))
    throw ShapeError(str_cat("matmul batch mismatch: ", shape_str(a.shape()), " vs ",
                             shape_str(b.shape())));
  if (rb == 3 && ra == 2)
    throw ShapeError("matmul with batched rhs requires batched lhs");
  const int64_t m = a.dim(ra - 2), k = a.dim(ra - 1);
  const int64_t kb = b.dim(rb - 2), n = b.dim(rb - 1);
  if (k != kb)
    throw ShapeError(str_cat("matmul inner dimensions differ: ", shape_str(a.shape()), " vs ",
                             shape_str(b.shape())));

  Shape out_shape = (ra == 3) ? Shape{batch, m, n} : Shape{m, n};
  Tensor<T> out(out_shape);
  const int64_t a_bs = ra == 3 ? m * k : 0;
  const int64_t b_bs = rb == 3 ? k * n : 0;
  for (int64_t bi = 0; bi < batch; ++bi)
    detail::mm_nn(out.data() + bi * m * n, a.data() + bi * a_bs, b.data() + bi * b_bs, m, k, n);
  detail::check_finite(out, "matmul");

  if (detail::tape_should_track<T>({&a, &b})) {
    detail::mark_tracked_output(out);
    auto as = a.storage();
    auto bs = b.storage();
    auto os = out.storage();
    GradTape<T>::active()->record([as, bs, os, batch, m, k, n, a_bs, b_bs]() {
      for (int64_t bi = 0; bi < batch; ++bi) {
        const T* g = os->grad.data() + bi * m * n;
        const T* pa = as->data.data() + bi * a_bs;
        const T* pb = bs->data.data() + bi * b_bs;
        if (as->tracked) detail::mm_nt(as->grad.data() + bi * a_bs, g, pb, m, n, k);
        if (bs->tracked) detail::mm_tn(bs->grad.data() + bi * b_bs, pa, g, m, k, n);
      }
    });
  }
  return out;
}

// y = x W^T + b over the trailing dimension; x [..., in], w [out, in], b [out].
// Pass an empty tensor to omit the bias.
template <typename T>
Tensor<T> linear_op(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  if (x.rank() < 1 || w.rank() != 2)
    throw ShapeError("linear expects x [..., in] and w [out, in]");
  const int64_t in = w.dim(1), out_f = w.dim(0);
  if (x.dim(x.rank() - 1) != in)
    throw ShapeError(str_cat("linear trailing dim mismatch: input ", shape_str(x.shape()),
                             " vs weight ", shape_str(w.shape())));
  const bool has_bias = b.numel() > 0;
  if (has_bias && (b.rank() != 1 || b.dim(0) != out_f))
    throw ShapeError("linear bias must be [out]");

  const int64_t rows = x.numel() / in;
  Shape out_shape = x.shape();
  out_shape.back() = out_f;
  Tensor<T> y(out_shape);
  if (has_bias) {
    T* py = y.data();
    const T* pb = b.data();
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t j = 0; j < out_f; ++j) py[r * out_f + j] = pb[j];
  }
  detail::mm_nt(y.data(), x.data(), w.data(), rows, in, out_f);
  detail::check_finite(y, "linear");

  if (detail::tape_should_track<T>({&x, &w, &b})) {
    detail::mark_tracked_output(y);
    auto xs = x.storage();
    auto ws = w.storage();
    auto bs = b.storage();
    auto ys = y.storage();
    GradTape<T>::active()->record([xs, ws, bs, ys, rows, in, out_f, has_bias]() {
      const T* g = ys->grad.data();
      if (xs->tracked) detail::mm_nn(xs->grad.data(), g, ws->data.data(), rows, out_f, in);
      if (ws->tracked) detail::mm_tn(ws->grad.data(), g, xs->data.data(), rows, out_f, in);
      if (has_bias && bs->tracked) {
        T* gb = bs->grad.data();
        for (int64_t r = 0; r < rows; ++r)
          for (int64_t j = 0; j < out_f; ++j) gb[j] += g[r * out_f + j];
      }
    });
  }
  return y;
}

}  // namespace leformer

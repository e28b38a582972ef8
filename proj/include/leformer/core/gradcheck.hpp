#pragma once

#include <functional>

#include "leformer/core/tensor.hpp"

namespace leformer {

// Central differences (f(x+h*e_i) - f(x-h*e_i)) / (2h). f must be a
// deterministic scalar function; evaluation happens with recording paused so
// the oracle stays independent of the autograd path it checks.
template <typename T>
Tensor<T> finite_diff_grad(const std::function<T(const Tensor<T>&)>& f, Tensor<T>& x, T h) {
  typename GradTape<T>::Pause pause;
  Tensor<T> g(x.shape());
  T* px = x.data();
  T* pg = g.data();
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) {
    const T orig = px[i];
    px[i] = orig + h;
    const T fp = f(x);
    px[i] = orig - h;
    const T fm = f(x);
    px[i] = orig;
    pg[i] = (fp - fm) / (T(2) * h);
  }
  return g;
}

// Max elementwise relative error with an absolute floor on the denominator.
template <typename T>
double max_rel_err(const Tensor<T>& a, const Tensor<T>& b, double floor = 1e-7) {
  if (a.shape() != b.shape())
    throw ShapeError(str_cat("max_rel_err shape mismatch: ", shape_str(a.shape()), " vs ",
                             shape_str(b.shape())));
  double worst = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    const double av = static_cast<double>(a.data()[i]);
    const double bv = static_cast<double>(b.data()[i]);
    const double denom = std::max({std::abs(av), std::abs(bv), floor});
    worst = std::max(worst, std::abs(av - bv) / denom);
  }
  return worst;
}

}  // namespace leformer

#pragma once

#include <span>

#include "leformer/core/tensor.hpp"
#include "leformer/eval/metrics.hpp"

namespace leformer {

// Mean over non-ignored pixels of -log softmax(logits)[target]. Fused forward
// and backward (softmax minus one-hot), numerically stabilized by the
// log-sum-exp shift.
template <typename T>
Tensor<T> cross_entropy_loss(const Tensor<T>& logits, std::span<const int32_t> target,
                             int32_t ignore_index = kIgnoreIndex) {
  if (logits.rank() != 4) throw ShapeError("cross_entropy_loss expects logits [B,K,H,W]");
  const int64_t b = logits.dim(0), k = logits.dim(1), h = logits.dim(2), w = logits.dim(3);
  const int64_t pixels = b * h * w, plane = h * w;
  if (static_cast<int64_t>(target.size()) != pixels)
    throw ShapeError(str_cat("target has ", target.size(), " pixels, logits imply ", pixels));

  // softmax probabilities are kept for the backward rule
  auto probs = std::make_shared<std::vector<T>>(static_cast<size_t>(pixels * k));
  const T* pl = logits.data();
  double loss_sum = 0.0;
  int64_t count = 0;
  for (int64_t bi = 0; bi < b; ++bi) {
    for (int64_t px = 0; px < plane; ++px) {
      const int64_t base = bi * k * plane + px;
      const int32_t t = target[bi * plane + px];
      double mx = static_cast<double>(pl[base]);
      for (int64_t c = 1; c < k; ++c)
        mx = std::max(mx, static_cast<double>(pl[base + c * plane]));
      double denom = 0.0;
      for (int64_t c = 0; c < k; ++c)
        denom += std::exp(static_cast<double>(pl[base + c * plane]) - mx);
      const double log_denom = std::log(denom);
      for (int64_t c = 0; c < k; ++c)
        (*probs)[(bi * plane + px) * k + c] = static_cast<T>(
            std::exp(static_cast<double>(pl[base + c * plane]) - mx - log_denom));
      if (t == ignore_index) continue;
      if (t < 0 || t >= k)
        throw ValueError(str_cat("target class id ", t, " out of range [0,", k, ")"));
      loss_sum += mx + log_denom - static_cast<double>(pl[base + t * plane]);
      ++count;
    }
  }
  if (count == 0) throw ValueError("cross_entropy_loss: every pixel is ignored");
  auto out = Tensor<T>::scalar(static_cast<T>(loss_sum / static_cast<double>(count)));

  if (detail::tape_should_track<T>({&logits})) {
    detail::mark_tracked_output(out);
    auto ls = logits.storage();
    auto os = out.storage();
    std::vector<int32_t> tgt(target.begin(), target.end());
    GradTape<T>::active()->record([ls, os, probs, tgt, b, k, plane, count, ignore_index]() {
      const T g = os->grad[0] / static_cast<T>(count);
      T* gl = ls->grad.data();
      for (int64_t bi = 0; bi < b; ++bi) {
        for (int64_t px = 0; px < plane; ++px) {
          const int32_t t = tgt[bi * plane + px];
          if (t == ignore_index) continue;
          const int64_t base = bi * k * plane + px;
          for (int64_t c = 0; c < k; ++c) {
            const T p = (*probs)[(bi * plane + px) * k + c];
            gl[base + c * plane] += g * (p - (c == t ? T(1) : T(0)));
          }
        }
      }
    });
  }
  return out;
}

}  // namespace leformer

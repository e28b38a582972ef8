#pragma once

#include "leformer/data/sample.hpp"
#include "leformer/eval/metrics.hpp"
#include "leformer/model/leformer.hpp"

namespace leformer {

// Argmax over class channels -> class-id map.
template <typename T>
Mask logits_to_mask(const Tensor<T>& logits, int64_t batch_index = 0) {
  const int64_t k = logits.dim(1), h = logits.dim(2), w = logits.dim(3);
  Mask m(h, w);
  const T* p = logits.data() + batch_index * k * h * w;
  for (int64_t i = 0; i < h * w; ++i) {
    int32_t best = 0;
    T best_v = p[i];
    for (int64_t c = 1; c < k; ++c)
      if (p[c * h * w + i] > best_v) {
        best_v = p[c * h * w + i];
        best = static_cast<int32_t>(c);
      }
    m.v[i] = best;
  }
  return m;
}

template <typename T>
Mask predict_mask(const LeFormer<T>& model, const Tensor<float>& image) {
  typename GradTape<T>::Pause pause;
  Tensor<T> input({1, image.dim(0), image.dim(1), image.dim(2)});
  for (int64_t i = 0; i < image.numel(); ++i)
    input.data()[i] = static_cast<T>(image.data()[i]);
  return logits_to_mask(model.forward(input));
}

template <typename T>
Metrics evaluate(const LeFormer<T>& model, const std::vector<Sample>& samples) {
  if (samples.empty()) throw ValueError("evaluate: empty sample list");
  ConfusionMatrix cm(static_cast<int>(model.config().num_classes));
  for (const auto& s : samples) {
    const Mask pred = predict_mask(model, s.image);
    cm.accumulate(pred.v, s.mask.v);
  }
  return compute_metrics(cm);
}

}  // namespace leformer

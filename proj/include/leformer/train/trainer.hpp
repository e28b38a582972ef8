#pragma once

#include <ostream>

#include "leformer/model/leformer.hpp"
#include "leformer/train/augment.hpp"
#include "leformer/train/loss.hpp"
#include "leformer/train/optimizer.hpp"

namespace leformer {

struct TrainReport {
  std::vector<double> loss_series;
  int64_t last_iter = 0;
};

namespace detail {

inline void shuffle_indices(std::vector<size_t>& idx, Rng& rng) {
  for (size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[rng.uniform_int(0, static_cast<int64_t>(i) - 1)]);
}

}  // namespace detail

// Single-threaded training loop: shuffled batching over the dataset, per-pixel
// cross-entropy, AdamW with the poly schedule. Deterministic for a fixed
// (seed, config, data) triple. Iteration numbering is 1-based and continues
// from start_iter when resuming.
template <typename T>
TrainReport train(LeFormer<T>& model, AdamW<T>& opt, const std::vector<Sample>& data,
                  const TrainConfig& cfg, std::ostream* log = nullptr, int64_t start_iter = 0) {
  cfg.validate();
  if (data.empty()) throw ValueError("training dataset is empty");

  Rng rng(derive_seed(cfg.seed, "train"));

  std::vector<size_t> order(data.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  detail::shuffle_indices(order, rng);
  size_t cursor = 0;

  const int64_t cs = cfg.crop_size;
  TrainReport report;
  for (int64_t iter = start_iter + 1; iter <= cfg.total_iters; ++iter) {
    Tensor<T> batch({cfg.batch_size, 3, cs, cs});
    std::vector<int32_t> targets(static_cast<size_t>(cfg.batch_size * cs * cs));
    for (int64_t bi = 0; bi < cfg.batch_size; ++bi) {
      if (cursor == order.size()) {
        detail::shuffle_indices(order, rng);
        cursor = 0;
      }
      const Sample& s = data[order[cursor++]];
      auto [img, msk] = augment(s.image, s.mask, cfg, rng);
      std::copy(img.values().begin(), img.values().end(),
                batch.values().begin() + bi * 3 * cs * cs);
      std::copy(msk.v.begin(), msk.v.end(), targets.begin() + bi * cs * cs);
    }

    const double lr = poly_lr(iter - 1, cfg);
    GradTape<T> tape;
    double loss_value;
    {
      typename GradTape<T>::Scope scope(tape);
      auto logits = model.forward(batch);
      auto loss = cross_entropy_loss(logits, targets);
      loss_value = static_cast<double>(loss.item());
      tape.backward(loss);
    }
    opt.step(model.params(), lr);

    report.loss_series.push_back(loss_value);
    report.last_iter = iter;
    if (log && (iter % cfg.log_interval == 0 || iter == cfg.total_iters))
      (*log) << "iter " << iter << " lr " << lr << " loss " << loss_value << "\n";
  }
  return report;
}

}  // namespace leformer

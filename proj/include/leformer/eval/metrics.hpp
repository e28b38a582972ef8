#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "leformer/core/error.hpp"
#include "leformer/data/sample.hpp"
#include "leformer/eval/report.hpp"

namespace leformer {

// Per-class pixel counts, counts[t][p] = pixels with true class t predicted p.
// Accumulation is pure addition, so sharded matrices merge exactly.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes)
      : k_(num_classes), counts_(static_cast<size_t>(num_classes) * num_classes, 0) {
    if (num_classes < 2) throw ValueError("confusion matrix needs at least 2 classes");
  }

  void accumulate(std::span<const int32_t> pred, std::span<const int32_t> target) {
    if (pred.size() != target.size())
      throw ShapeError(str_cat("pred/target size mismatch: ", pred.size(), " vs ",
                               target.size()));
    for (size_t i = 0; i < pred.size(); ++i) {
      if (target[i] == kIgnoreIndex) continue;
      if (target[i] < 0 || target[i] >= k_)
        throw ValueError(str_cat("target class id ", target[i], " out of range [0,", k_, ")"));
      if (pred[i] < 0 || pred[i] >= k_)
        throw ValueError(str_cat("predicted class id ", pred[i], " out of range [0,", k_, ")"));
      ++counts_[static_cast<size_t>(target[i]) * k_ + pred[i]];
    }
  }

  void merge(const ConfusionMatrix& other) {
    if (other.k_ != k_) throw ShapeError("confusion matrix class count mismatch");
    for (size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  }

  uint64_t at(int t, int p) const { return counts_[static_cast<size_t>(t) * k_ + p]; }
  int num_classes() const { return k_; }

  uint64_t total() const {
    uint64_t s = 0;
    for (uint64_t c : counts_) s += c;
    return s;
  }

 private:
  int k_;
  std::vector<uint64_t> counts_;
};

struct ClassMetrics {
  double precision, recall, f1, iou;
};

struct Metrics {
  double oa = 0.0;
  double miou = 0.0;
  double mean_f1 = 0.0;
  double f1_lake = 0.0;  // class 1
  std::vector<ClassMetrics> per_class;
};

// OA, per-class precision/recall/F1/IoU, mean F1 and mIoU. All counting stays
// in exact integers; division happens once per reported figure. Classes absent
// from both prediction and target score 1.0; means average over classes
// present in the target.
inline Metrics compute_metrics(const ConfusionMatrix& cm) {
  const int k = cm.num_classes();
  const uint64_t total = cm.total();
  if (total == 0) throw ValueError("compute_metrics on an empty confusion matrix");

  Metrics m;
  uint64_t trace = 0;
  for (int c = 0; c < k; ++c) trace += cm.at(c, c);
  m.oa = static_cast<double>(trace) / static_cast<double>(total);

  double iou_sum = 0.0, f1_sum = 0.0;
  int present = 0;
  m.per_class.resize(k);
  for (int c = 0; c < k; ++c) {
    uint64_t tp = cm.at(c, c), fp = 0, fn = 0, in_target = 0;
    for (int o = 0; o < k; ++o) {
      if (o != c) {
        fp += cm.at(o, c);
        fn += cm.at(c, o);
      }
      in_target += cm.at(c, o);
    }
    auto& pc = m.per_class[c];
    pc.precision = (tp + fp) == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    pc.recall = (tp + fn) == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    pc.iou = (tp + fp + fn) == 0 ? 1.0
                                 : static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
    pc.f1 = (2 * tp + fp + fn) == 0
                ? 1.0
                : static_cast<double>(2 * tp) / static_cast<double>(2 * tp + fp + fn);
    if (in_target > 0) {
      iou_sum += pc.iou;
      f1_sum += pc.f1;
      ++present;
    }
  }
  m.miou = iou_sum / present;
  m.mean_f1 = f1_sum / present;
  if (k > 1) m.f1_lake = m.per_class[1].f1;
  return m;
}

inline ReportRow metrics_row(const std::string& name, const Metrics& m) {
  return {name, {}, {}, m.oa, m.f1_lake, m.mean_f1, m.miou};
}

}  // namespace leformer

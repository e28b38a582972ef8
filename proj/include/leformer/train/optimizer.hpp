#pragma once

#include "leformer/nn/params.hpp"

namespace leformer {

struct TrainConfig {
  int64_t total_iters = 2000;  // full-scale recipe: 160000
  int64_t batch_size = 4;      // full-scale recipe: 16
  double lr0 = 6e-5;
  double weight_decay = 0.01;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double poly_power = 1.0;
  double min_lr = 0.0;
  uint64_t seed = 0;
  int64_t crop_size = 64;
  double resize_min = 0.5, resize_max = 2.0;
  double hflip_prob = 0.5;
  int64_t log_interval = 50;

  void validate() const {
    if (total_iters <= 0) throw ValueError("total_iters must be positive");
    if (batch_size <= 0) throw ValueError("batch_size must be positive");
    if (hflip_prob < 0.0 || hflip_prob > 1.0) throw ValueError("hflip_prob must be in [0,1]");
    if (resize_min <= 0.0 || resize_max < resize_min)
      throw ValueError("resize ratio range must be positive and ordered");
    if (crop_size <= 0) throw ValueError("crop_size must be positive");
  }
};

// lr0 * (1 - iter/total)^power, decayed to min_lr at the end.
inline double poly_lr(int64_t iter, const TrainConfig& cfg) {
  if (iter < 0 || iter > cfg.total_iters)
    throw ValueError(str_cat("iter ", iter, " outside [0,", cfg.total_iters, "]"));
  const double frac = 1.0 - static_cast<double>(iter) / static_cast<double>(cfg.total_iters);
  return (cfg.lr0 - cfg.min_lr) * std::pow(frac, cfg.poly_power) + cfg.min_lr;
}

// Decoupled AdamW: theta <- theta - lr*(mhat/(sqrt(vhat)+eps)) - lr*wd*theta.
// Moment buffers exist for learnable parameters only; gradients are cleared
// after each step.
template <typename T>
class AdamW {
 public:
  AdamW() = default;
  AdamW(const ParamStore<T>& store, const TrainConfig& cfg) : cfg_(cfg) {
    for (const auto& e : store) {
      m_.emplace_back(e.learnable ? e.tensor.numel() : 0, T(0));
      v_.emplace_back(e.learnable ? e.tensor.numel() : 0, T(0));
    }
  }

  void step(ParamStore<T>& store, double lr_t) {
    if (store.size() != m_.size()) throw ValueError("optimizer/store entry count mismatch");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t i = 0; i < store.size(); ++i) {
      auto& e = store.entry(i);
      if (!e.learnable) continue;
      if (!e.tensor.has_grad())
        throw ValueError(str_cat("missing gradients for parameter ", e.name));
      const auto& g = e.tensor.grad_values();
      T* theta = e.tensor.data();
      T* m = m_[i].data();
      T* v = v_[i].data();
      const int64_t n = e.tensor.numel();
      for (int64_t j = 0; j < n; ++j) {
        const double gj = static_cast<double>(g[j]);
        const double mj = cfg_.beta1 * static_cast<double>(m[j]) + (1.0 - cfg_.beta1) * gj;
        const double vj = cfg_.beta2 * static_cast<double>(v[j]) + (1.0 - cfg_.beta2) * gj * gj;
        m[j] = static_cast<T>(mj);
        v[j] = static_cast<T>(vj);
        const double update = (mj / bc1) / (std::sqrt(vj / bc2) + cfg_.eps);
        theta[j] -= static_cast<T>(lr_t * update + lr_t * cfg_.weight_decay *
                                                       static_cast<double>(theta[j]));
      }
      e.tensor.zero_grad();
    }
  }

  int64_t step_count() const { return t_; }

  // Moment access for optimizer-state checkpointing.
  std::vector<std::vector<T>>& first_moments() { return m_; }
  std::vector<std::vector<T>>& second_moments() { return v_; }
  void set_step_count(int64_t t) { t_ = t; }

 private:
  TrainConfig cfg_;
  std::vector<std::vector<T>> m_, v_;
  int64_t t_ = 0;
};

}  // namespace leformer

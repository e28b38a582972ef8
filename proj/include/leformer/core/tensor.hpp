#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <vector>

#include "leformer/core/error.hpp"

namespace leformer {

using Shape = std::vector<int64_t>;

inline int64_t numel_of(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::string s = "(";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

inline Shape row_major_strides(const Shape& shape) {
  Shape st(shape.size(), 1);
  for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i)
    st[i] = st[i + 1] * shape[i + 1];
  return st;
}

namespace debug {
// NaN/Inf scan after every forward op. Defaults on in debug builds; tests can
// flip it explicitly since the scan is O(n) per op.
inline bool& finite_checks() {
#ifdef NDEBUG
  static bool on = false;
#else
  static bool on = true;
#endif
  return on;
}
}  // namespace debug

template <typename T>
struct TensorStorage {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;   // allocated iff tracked
  bool tracked = false;  // participates in gradient computation
};

template <typename T>
class GradTape;

// Shared-buffer tensor handle. Copies alias the same storage; values are
// immutable after construction except for gradient accumulation and explicit
// mutation by the optimizer between tapes.
template <typename T>
class Tensor {
 public:
  Tensor() : st_(std::make_shared<TensorStorage<T>>()) {}

  explicit Tensor(Shape shape) : st_(std::make_shared<TensorStorage<T>>()) {
    for (int64_t d : shape)
      if (d <= 0) throw ShapeError(str_cat("non-positive extent in shape ", shape_str(shape)));
    st_->shape = std::move(shape);
    st_->data.assign(static_cast<size_t>(numel_of(st_->shape)), T(0));
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  static Tensor full(Shape shape, T value) {
    Tensor t(std::move(shape));
    std::fill(t.st_->data.begin(), t.st_->data.end(), value);
    return t;
  }

  static Tensor ones(Shape shape) { return full(std::move(shape), T(1)); }

  static Tensor scalar(T value) { return full({1}, value); }

  static Tensor from_data(Shape shape, std::vector<T> values) {
    Tensor t;
    if (numel_of(shape) != static_cast<int64_t>(values.size()))
      throw ShapeError(str_cat("data length ", values.size(), " does not match shape ",
                               shape_str(shape)));
    t.st_->shape = std::move(shape);
    t.st_->data = std::move(values);
    return t;
  }

  const Shape& shape() const { return st_->shape; }
  size_t rank() const { return st_->shape.size(); }
  int64_t dim(size_t i) const { return st_->shape[i]; }
  int64_t numel() const { return static_cast<int64_t>(st_->data.size()); }

  T* data() { return st_->data.data(); }
  const T* data() const { return st_->data.data(); }
  std::vector<T>& values() { return st_->data; }
  const std::vector<T>& values() const { return st_->data; }

  T item() const {
    if (numel() != 1) throw ShapeError(str_cat("item() on tensor of shape ", shape_str(shape())));
    return st_->data[0];
  }

  T at(std::initializer_list<int64_t> idx) const {
    return st_->data[static_cast<size_t>(offset_of(idx))];
  }
  T& at_mut(std::initializer_list<int64_t> idx) {
    return st_->data[static_cast<size_t>(offset_of(idx))];
  }

  bool requires_grad() const { return st_->tracked; }

  void set_requires_grad(bool on = true) {
    st_->tracked = on;
    if (on)
      st_->grad.assign(st_->data.size(), T(0));
    else
      st_->grad.clear();
  }

  bool has_grad() const { return !st_->grad.empty(); }

  Tensor grad() const {
    if (!st_->tracked) throw ValueError("grad() on a tensor that does not require grad");
    return from_data(st_->shape, st_->grad);
  }

  const std::vector<T>& grad_values() const { return st_->grad; }

  void zero_grad() {
    if (st_->tracked) std::fill(st_->grad.begin(), st_->grad.end(), T(0));
  }

  std::shared_ptr<TensorStorage<T>>& storage() { return st_; }
  const std::shared_ptr<TensorStorage<T>>& storage() const { return st_; }

 private:
  int64_t offset_of(std::initializer_list<int64_t> idx) const {
    if (idx.size() != rank())
      throw ShapeError(str_cat("index rank ", idx.size(), " vs tensor rank ", rank()));
    const Shape st = row_major_strides(shape());
    int64_t off = 0;
    size_t k = 0;
    for (int64_t i : idx) off += i * st[k++];
    return off;
  }

  std::shared_ptr<TensorStorage<T>> st_;
};

// Ordered record of executed differentiable ops. One tape per forward pass;
// ops append in execution order, so reverse iteration is a valid reverse
// topological order.
template <typename T>
class GradTape {
 public:
  GradTape() = default;
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  static GradTape*& active() {
    thread_local GradTape* current = nullptr;
    return current;
  }

  // RAII activation; tapes and their tensors belong to one logical thread.
  class Scope {
   public:
    explicit Scope(GradTape& tape) : prev_(active()) { active() = &tape; }
    ~Scope() { active() = prev_; }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    GradTape* prev_;
  };

  // Temporarily disables recording (oracle/eval forwards inside a scope).
  class Pause {
   public:
    Pause() : prev_(active()) { active() = nullptr; }
    ~Pause() { active() = prev_; }
    Pause(const Pause&) = delete;
    Pause& operator=(const Pause&) = delete;

   private:
    GradTape* prev_;
  };

  void record(std::function<void()> backward_fn) { nodes_.push_back(std::move(backward_fn)); }

  size_t size() const { return nodes_.size(); }

  void backward(const Tensor<T>& root) {
    if (consumed_) throw ValueError("backward called twice on one tape");
    if (root.numel() != 1)
      throw ValueError(str_cat("backward requires a scalar root, got shape ",
                               shape_str(root.shape())));
    if (!root.requires_grad())
      throw ValueError("backward root does not participate in this tape");
    consumed_ = true;
    root.storage()->grad[0] = T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  }

 private:
  std::vector<std::function<void()>> nodes_;
  bool consumed_ = false;
};

namespace detail {

template <typename T>
bool tape_should_track(std::initializer_list<const Tensor<T>*> inputs) {
  if (GradTape<T>::active() == nullptr) return false;
  for (const Tensor<T>* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

template <typename T>
void mark_tracked_output(Tensor<T>& out) {
  out.set_requires_grad(true);
}

template <typename T>
void check_finite(const Tensor<T>& t, const char* op_name) {
  if (!debug::finite_checks()) return;
  for (const T& v : t.values())
    if (!std::isfinite(static_cast<double>(v)))
      throw ValueError(str_cat("non-finite value produced by ", op_name));
}

inline int normalize_axis(int axis, size_t rank) {
  const int r = static_cast<int>(rank);
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) throw ValueError(str_cat("invalid axis ", axis, " for rank ", r));
  return a;
}

}  // namespace detail

}  // namespace leformer

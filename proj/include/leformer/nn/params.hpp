#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "leformer/core/tensor.hpp"

namespace leformer {

// Named, ordered collection of learnable tensors; the unit of checkpointing
// and optimization. Iteration order is registration order, which is fixed by
// the model configuration.
template <typename T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor<T> tensor;
    bool learnable;
  };

  // Returns a handle sharing the stored tensor's buffer (stable across
  // later add() calls).
  Tensor<T> add(const std::string& name, Shape shape, bool learnable = true) {
    if (index_.count(name)) throw ValueError(str_cat("duplicate parameter name: ", name));
    Entry e{name, Tensor<T>(std::move(shape)), learnable};
    index_[name] = entries_.size();
    entries_.push_back(std::move(e));
    return entries_.back().tensor;
  }

  Tensor<T>* find(std::string_view name) {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : &entries_[it->second].tensor;
  }
  const Tensor<T>* find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : &entries_[it->second].tensor;
  }

  size_t size() const { return entries_.size(); }
  Entry& entry(size_t i) { return entries_[i]; }
  const Entry& entry(size_t i) const { return entries_[i]; }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  // Sum of learnable element counts under a name prefix ("" counts all).
  int64_t count_params(std::string_view prefix = "") const {
    int64_t n = 0;
    for (const auto& e : entries_)
      if (e.learnable && matches_prefix(e.name, prefix)) n += e.tensor.numel();
    return n;
  }

  void mark_all_requires_grad() {
    for (auto& e : entries_)
      if (e.learnable) e.tensor.set_requires_grad(true);
  }

  void zero_grads() {
    for (auto& e : entries_) e.tensor.zero_grad();
  }

 private:
  static bool matches_prefix(std::string_view name, std::string_view prefix) {
    if (prefix.empty()) return true;
    if (name.size() < prefix.size() || name.substr(0, prefix.size()) != prefix) return false;
    // "ce" matches "ce/..." but not "cef/..."
    return name.size() == prefix.size() || name[prefix.size()] == '/' ||
           prefix.back() == '/';
  }

  std::vector<Entry> entries_;
  std::unordered_map<std::string, size_t> index_;
};

template <typename T>
int64_t count_params(const ParamStore<T>& store, std::string_view prefix = "") {
  return store.count_params(prefix);
}

}  // namespace leformer

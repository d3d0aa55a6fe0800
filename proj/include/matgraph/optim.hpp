#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "matgraph/errors.hpp"
#include "matgraph/tensor.hpp"

namespace matgraph::ad {

/// Named tensors in insertion order. Trainable entries carry gradients;
/// the rest are buffers (batch-norm running statistics). References stay
/// valid while the store is alive.
template <typename T>
class ParamStore {
 public:
  Tensor<T>& add(const std::string& name, Tensor<T> value, bool trainable = true) {
    if (index_.count(name)) throw ConfigError("duplicate parameter " + name);
    value.requires_grad = trainable;
    value.grad.clear();
    index_[name] = entries_.size();
    entries_.push_back({name, std::move(value)});
    return entries_.back().tensor;
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  Tensor<T>& get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter " + name);
    return entries_[it->second].tensor;
  }
  const Tensor<T>& get(const std::string& name) const { return const_cast<ParamStore*>(this)->get(name); }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& e : entries_) out.push_back(e.name);
    return out;
  }

  std::vector<Tensor<T>*> trainable() {
    std::vector<Tensor<T>*> out;
    for (auto& e : entries_)
      if (e.tensor.requires_grad) out.push_back(&e.tensor);
    return out;
  }

  void zero_grad() {
    for (auto& e : entries_)
      if (e.tensor.requires_grad) e.tensor.zero_grad();
  }

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& e : entries_) out.add(e.name, e.tensor.template cast<U>(), e.tensor.requires_grad);
    return out;
  }

  ParamStore() = default;
  ParamStore(const ParamStore& other) { *this = other; }
  ParamStore& operator=(const ParamStore& other) {
    if (this == &other) return *this;
    entries_.clear();
    index_.clear();
    for (const auto& e : other.entries_) {
      add(e.name, e.tensor, e.tensor.requires_grad);
    }
    return *this;
  }
  ParamStore(ParamStore&&) noexcept = default;
  ParamStore& operator=(ParamStore&&) noexcept = default;

 private:
  struct Entry {
    std::string name;
    Tensor<T> tensor;
  };
  std::deque<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

/// Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8).
template <typename T>
class Adam {
 public:
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);

  void step(ParamStore<T>& params, T lr) {
    auto ps = params.trainable();
    if (first_.empty()) {
      for (auto* p : ps) {
        first_.emplace_back(p->size(), T(0));
        second_.emplace_back(p->size(), T(0));
      }
    }
    if (first_.size() != ps.size()) throw ShapeError("adam: parameter set changed between steps");
    ++steps_;
    const T c1 = T(1) - std::pow(beta1, T(steps_));
    const T c2 = T(1) - std::pow(beta2, T(steps_));
    for (std::size_t i = 0; i < ps.size(); ++i) {
      auto& p = *ps[i];
      if (first_[i].size() != p.size()) throw ShapeError("adam: moment shape differs from parameter");
      if (p.grad.size() != p.size()) continue;  // untouched this step
      for (std::size_t k = 0; k < p.size(); ++k) {
        const T g = p.grad[k];
        first_[i][k] = beta1 * first_[i][k] + (T(1) - beta1) * g;
        second_[i][k] = beta2 * second_[i][k] + (T(1) - beta2) * g * g;
        const T mhat = first_[i][k] / c1;
        const T vhat = second_[i][k] / c2;
        p.data[k] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }

  long steps() const { return steps_; }

 private:
  std::vector<std::vector<T>> first_;
  std::vector<std::vector<T>> second_;
  long steps_ = 0;
};

/// Cosine annealing: 0.5 * base * (1 + cos(pi * epoch / total)).
inline double cosine_lr(long epoch, long total, double base) {
  if (total <= 0) throw ConfigError("cosine_lr: total epochs must be positive");
  return 0.5 * base * (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) / static_cast<double>(total)));
}

}  // namespace matgraph::ad

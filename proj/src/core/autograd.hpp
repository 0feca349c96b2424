/* Copyright 2026 The tdrn Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#pragma once

// Minimal reverse-mode autodiff over Tensor. Each op records its parents and
// a closure that accumulates the upstream gradient into them. backward()
// consumes the graph: interior gradients and closures are released as soon as
// they have been propagated, leaves keep their accumulated .grad.

#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "error.hpp"
#include "tensor.hpp"

namespace tdrn::nn {

namespace detail {
inline thread_local bool g_grad_enabled = true;
}

/// Disables graph recording for the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard() : prev_(detail::g_grad_enabled) { detail::g_grad_enabled = false; }
  ~NoGradGuard() { detail::g_grad_enabled = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

inline bool grad_enabled() { return detail::g_grad_enabled; }

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  Tensor<T>& grad_buffer() {
    if (grad.size() != value.size()) grad = Tensor<T>(value.n, value.c, value.h, value.w);
    return grad;
  }
  bool has_grad() const { return grad.size() == value.size() && !value.data.empty(); }
};

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(Tensor<T> value, bool requires_grad = false) : node_(std::make_shared<Node<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  const Tensor<T>& grad() const { return node_->grad; }
  Tensor<T>& mutable_grad() { return node_->grad_buffer(); }
  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool r) { node_->requires_grad = r; }
  void zero_grad() { node_->grad = Tensor<T>(); }

  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Wraps an op result. The closure is only kept when some parent needs a gradient.
template <typename T, typename Backward>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> parents, Backward&& backward) {
  Var<T> out(std::move(value));
  if (!grad_enabled()) return out;
  bool needs = false;
  for (const auto& p : parents) needs = needs || p.requires_grad();
  if (!needs) return out;
  auto& node = *out.node();
  node.requires_grad = true;
  node.parents.reserve(parents.size());
  for (auto& p : parents) node.parents.push_back(p.node());
  node.backward = std::forward<Backward>(backward);
  return out;
}

/// Propagates d(root)/d(leaf) into every reachable leaf's grad. Root must be a scalar.
template <typename T>
void backward(const Var<T>& root) {
  require(root.value().size() == 1, "backward() needs a scalar root, got " + root.value().shape_str());
  if (!root.requires_grad()) return;

  // Shared ownership keeps every node alive while parents are being released.
  std::vector<std::shared_ptr<Node<T>>> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<std::shared_ptr<Node<T>>, std::size_t>> stack{{root.node(), 0}};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      auto p = node->parents[next++];
      if (p->requires_grad && seen.insert(p.get()).second) stack.push_back({std::move(p), 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->grad_buffer().data[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = it->get();
    if (!node->backward) continue;  // leaf
    if (node->has_grad()) node->backward(*node);
    node->grad = Tensor<T>();
    node->backward = nullptr;
    node->parents.clear();
  }
}

}  // namespace tdrn::nn

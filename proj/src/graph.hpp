#pragma once

// Internal helpers for building graph nodes from op implementations.

#include <cmath>
#include <string>

#include "vseg/diagnostics.hpp"
#include "vseg/tensor.hpp"

namespace vseg::ad::detail {

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

template <typename T>
void check_finite(const char* op, const std::vector<T>& v) {
  for (const T x : v) {
    if (!std::isfinite(x)) fail(ErrorCode::NonFinite, std::string(op) + " produced a non-finite value");
  }
}

/// Wraps an op output into a node. The backward closure and the input links
/// are kept only when recording is on and some input needs a gradient.
template <typename T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> value, std::vector<NodePtr<T>> inputs,
                      std::function<void(Node<T>&)> backward_fn) {
  check_finite(op, value);
  auto n = std::make_shared<Node<T>>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->op = op;
  n->is_leaf = false;
  bool needs_grad = false;
  if (grad_enabled()) {
    for (const auto& in : inputs) needs_grad = needs_grad || in->requires_grad;
  }
  if (needs_grad) {
    n->requires_grad = true;
    n->inputs = std::move(inputs);
    n->backward_fn = std::move(backward_fn);
  }
  return Tensor<T>(std::move(n));
}

/// Gradient buffer of an input, or nullptr when it does not need one.
template <typename T>
T* grad_target(const NodePtr<T>& in) {
  return in->requires_grad ? in->grad_buffer().data() : nullptr;
}

inline void require(bool ok, const std::string& message) {
  if (!ok) fail(ErrorCode::ShapeMismatch, message);
}

}  // namespace vseg::ad::detail

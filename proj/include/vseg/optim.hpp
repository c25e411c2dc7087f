#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vseg/tensor.hpp"

namespace vseg {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam on a flat buffer. `step` is the 1-based step count after this update.
///   m <- b1 m + (1 - b1) g;  v <- b2 v + (1 - b2) g^2
///   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)
template <typename T>
void adam_update(std::span<T> theta, std::span<const T> grad, std::span<T> m, std::span<T> v, std::int64_t step,
                 double lr, const AdamConfig& cfg = {});

/// First and second moments for a list of parameter tensors.
template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  std::int64_t step = 0;
};

/// One Adam step over `params` using their accumulated grads. Parameters
/// without a grad buffer are treated as having zero gradient.
template <typename T>
void adam_step(std::span<ad::Tensor<T>> params, AdamState<T>& state, double lr, const AdamConfig& cfg = {});

/// lr(t) = lr_min + 0.5 (lr0 - lr_min)(1 + cos(pi t / T)) for t in [0, T].
/// T == 0 yields lr0. Throws OutOfRange outside [0, T].
double cosine_lr(std::int64_t t, std::int64_t total, double lr0, double lr_min = 0.0);

}  // namespace vseg

#include "vseg/optim.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "vseg/diagnostics.hpp"

namespace vseg {

template <typename T>
void adam_update(std::span<T> theta, std::span<const T> grad, std::span<T> m, std::span<T> v, std::int64_t step,
                 double lr, const AdamConfig& cfg) {
  if (grad.size() != theta.size() || m.size() != theta.size() || v.size() != theta.size())
    fail(ErrorCode::ShapeMismatch, "adam_update: parameter, gradient and moment sizes differ");
  if (step < 1) fail(ErrorCode::OutOfRange, "adam_update: step must be >= 1");
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = grad[i];
    const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
    const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    theta[i] = static_cast<T>(theta[i] - lr * (mi / c1) / (std::sqrt(vi / c2) + cfg.eps));
  }
}

template <typename T>
void adam_step(std::span<ad::Tensor<T>> params, AdamState<T>& state, double lr, const AdamConfig& cfg) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.numel(), T(0));
      state.v.emplace_back(p.numel(), T(0));
    }
  }
  if (state.m.size() != params.size()) fail(ErrorCode::ShapeMismatch, "adam_step: state does not match parameters");
  ++state.step;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    if (state.m[k].size() != p.numel()) fail(ErrorCode::ShapeMismatch, "adam_step: moment shape mismatch");
    std::vector<T> zeros;
    std::span<const T> g = p.grad();
    if (!p.has_grad()) {
      zeros.assign(p.numel(), T(0));
      g = zeros;
    }
    adam_update<T>(p.values(), g, state.m[k], state.v[k], state.step, lr, cfg);
  }
}

double cosine_lr(std::int64_t t, std::int64_t total, double lr0, double lr_min) {
  if (total < 0 || t < 0 || t > total)
    fail(ErrorCode::OutOfRange, "cosine_lr: t = " + std::to_string(t) + " outside [0, " + std::to_string(total) + "]");
  if (total == 0) return lr0;
  const double phase = std::numbers::pi * static_cast<double>(t) / static_cast<double>(total);
  return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + std::cos(phase));
}

template void adam_update<float>(std::span<float>, std::span<const float>, std::span<float>, std::span<float>,
                                 std::int64_t, double, const AdamConfig&);
template void adam_update<double>(std::span<double>, std::span<const double>, std::span<double>, std::span<double>,
                                  std::int64_t, double, const AdamConfig&);
template void adam_step<float>(std::span<ad::Tensor<float>>, AdamState<float>&, double, const AdamConfig&);
template void adam_step<double>(std::span<ad::Tensor<double>>, AdamState<double>&, double, const AdamConfig&);

}  // namespace vseg

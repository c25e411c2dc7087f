#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "vseg/tensor.hpp"

namespace vseg {

struct LossConfig {
  double w_dice = 1.0;
  double w_ce = 0.5;
  double dice_eps = 1e-5;
  bool exclude_background = true;
  /// Weights of the main head and the two coarser deep-supervision heads.
  std::array<double, 3> head_weights{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};

  void validate() const;
};

/// Lower clamp on probabilities inside the cross-entropy logarithm.
inline constexpr double kProbabilityFloor = 1e-12;

/// Soft Dice loss over a batch. `probs` is [N, C, X, Y, Z] (channel-softmaxed),
/// `target` holds N*X*Y*Z labels in the same voxel order. Per class:
/// d_c = (2 sum p_c g_c + eps) / (sum p_c + sum g_c + eps); loss = 1 - mean d_c,
/// class 0 skipped when exclude_background is set.
template <typename T>
ad::Tensor<T> dice_loss(const ad::Tensor<T>& probs, std::span<const std::uint8_t> target, const LossConfig& cfg = {});

/// -mean over all voxels of log max(p_target, 1e-12), background included.
template <typename T>
ad::Tensor<T> cross_entropy(const ad::Tensor<T>& probs, std::span<const std::uint8_t> target);

/// w_dice * dice + w_ce * ce on softmax(logits).
template <typename T>
ad::Tensor<T> head_loss(const ad::Tensor<T>& logits, std::span<const std::uint8_t> target, const LossConfig& cfg = {});

/// Weighted sum of head_loss over the three supervised outputs.
template <typename T>
ad::Tensor<T> combined_loss(const std::array<ad::Tensor<T>, 3>& outputs, std::span<const std::uint8_t> target,
                            const LossConfig& cfg = {});

}  // namespace vseg

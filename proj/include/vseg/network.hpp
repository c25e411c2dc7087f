#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "vseg/loss.hpp"
#include "vseg/ops.hpp"
#include "vseg/volume.hpp"

namespace vseg {

/// Number of supervised outputs: the full-resolution head plus two coarser
/// decoder heads.
inline constexpr int kDeepSupervisionHeads = 3;

struct ModelConfig {
  int in_channels = 1;
  int num_classes = kDefaultNumClasses;
  int levels = 4;
  int base_channels = 32;
  int ds_heads = kDeepSupervisionHeads;
  Shape3 patch_shape{128, 128, 64};
  double leaky_slope = 0.01;
  double norm_eps = 1e-5;

  /// Throws BadConfig when the patch is not divisible by 2^(levels-1) or
  /// another field is out of range.
  void validate() const;
  int channels_at(int level) const { return base_channels << level; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Laptop-scale configuration: 3 levels, 8 base channels, 16x16x8 patches.
ModelConfig desk_model_config(int num_classes = kDefaultNumClasses);

template <typename T>
struct NamedParameter {
  std::string name;
  ad::Tensor<T> tensor;
};

/// Residual U-Net with deep supervision.
///
/// Encoder stage l (channels base * 2^l) is a residual block: two 3x3x3
/// conv + instance norm (leaky ReLU after the first), plus an identity or
/// 1x1x1 projection shortcut, then leaky ReLU. Stages are joined by stride-2
/// 3x3x3 convs. Each decoder stage upsamples with a 2x2x2 transposed conv,
/// concatenates the encoder skip and applies a residual block. Heads are
/// 1x1x1 convs on the features at resolution levels 0, 1, 2 (clamped to the
/// bottleneck for shallow models); coarse logits are trilinearly resized to
/// the patch shape.
template <typename T>
class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t seed);
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return cfg_; }

  /// Returns {main, ds1, ds2}, each [N, num_classes, patch_shape].
  /// With `deep_supervision` false only the main head is computed and the
  /// other two entries are left undefined.
  std::array<ad::Tensor<T>, 3> forward(const ad::Tensor<T>& batch, bool deep_supervision = true) const;

  std::vector<NamedParameter<T>>& parameters() { return params_; }
  const std::vector<NamedParameter<T>>& parameters() const { return params_; }
  std::size_t parameter_count() const;
  void zero_grad();

  /// Resolution level each supervised head reads from.
  std::array<int, 3> head_levels() const;

 private:
  struct Conv {
    ad::Tensor<T> weight;
    ad::Tensor<T> bias;
    ad::Triple stride{1, 1, 1};
    ad::Triple pad{0, 0, 0};
  };
  struct Norm {
    ad::Tensor<T> gamma;
    ad::Tensor<T> beta;
  };
  struct ResBlock {
    Conv conv1;
    Norm norm1;
    Conv conv2;
    Norm norm2;
    bool has_projection = false;
    Conv projection;
  };
  struct Down {
    Conv conv;
    Norm norm;
  };

  using InitRng = std::mt19937_64;

  Conv make_conv(InitRng& rng, const std::string& name, int cin, int cout, int k, int stride, int pad, bool bias);
  Conv make_transposed(InitRng& rng, const std::string& name, int cin, int cout);
  Norm make_norm(InitRng& rng, const std::string& name, int channels);
  ResBlock make_block(InitRng& rng, const std::string& name, int cin, int cout);
  ad::Tensor<T> run_conv(const Conv& c, const ad::Tensor<T>& x) const;
  ad::Tensor<T> run_norm(const Norm& n, const ad::Tensor<T>& x) const;
  ad::Tensor<T> run_block(const ResBlock& b, const ad::Tensor<T>& x) const;
  ad::Tensor<T> act(const ad::Tensor<T>& x) const;
  ad::Tensor<T> register_param(InitRng& rng, const std::string& name, ad::Shape shape, double stddev, double fill);

  ModelConfig cfg_;
  std::vector<NamedParameter<T>> params_;
  std::vector<ResBlock> encoder_;
  std::vector<Down> down_;
  std::vector<Conv> up_;
  std::vector<ResBlock> decoder_;
  std::vector<Conv> heads_;
};

template <typename T>
Model<T> build_model(const ModelConfig& cfg, std::uint64_t seed) {
  return Model<T>(cfg, seed);
}

extern template class Model<float>;
extern template class Model<double>;

}  // namespace vseg

#include "vseg/network.hpp"

#include <algorithm>
#include <cmath>

#include "vseg/diagnostics.hpp"

namespace vseg {

using ad::Tensor;

void ModelConfig::validate() const {
  if (in_channels < 1) fail(ErrorCode::BadConfig, "in_channels must be >= 1");
  if (num_classes < 2 || num_classes > 256) fail(ErrorCode::BadConfig, "num_classes must lie in [2, 256]");
  if (levels < 1 || levels > 8) fail(ErrorCode::BadConfig, "levels must lie in [1, 8]");
  if (base_channels < 1) fail(ErrorCode::BadConfig, "base_channels must be >= 1");
  if (ds_heads != kDeepSupervisionHeads) fail(ErrorCode::BadConfig, "ds_heads must be 3");
  const int factor = 1 << (levels - 1);
  for (int s : patch_shape) {
    if (s < 1 || s % factor != 0)
      fail(ErrorCode::BadConfig, "patch_shape must be divisible by 2^(levels-1) = " + std::to_string(factor));
  }
  if (!(leaky_slope >= 0.0)) fail(ErrorCode::BadConfig, "leaky_slope must be >= 0");
  if (!(norm_eps > 0.0)) fail(ErrorCode::BadConfig, "norm_eps must be > 0");
}

ModelConfig desk_model_config(int num_classes) {
  ModelConfig cfg;
  cfg.num_classes = num_classes;
  cfg.levels = 3;
  cfg.base_channels = 8;
  cfg.patch_shape = {16, 16, 8};
  return cfg;
}

template <typename T>
Tensor<T> Model<T>::register_param(InitRng& rng, const std::string& name, ad::Shape shape, double stddev,
                                   double fill) {
  const std::size_t n = ad::numel(shape);
  std::vector<T> values(n, static_cast<T>(fill));
  if (stddev > 0.0) {
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& v : values) v = static_cast<T>(dist(rng));
  }
  auto t = Tensor<T>::from(std::move(shape), std::move(values), true);
  params_.push_back({name, t});
  return t;
}

template <typename T>
typename Model<T>::Conv Model<T>::make_conv(InitRng& rng, const std::string& name, int cin, int cout, int k,
                                            int stride, int pad, bool bias) {
  const auto kk = static_cast<std::size_t>(k);
  Conv c;
  const double fan_in = static_cast<double>(cin) * k * k * k;
  c.weight = register_param(rng, name + ".weight",
                            {static_cast<std::size_t>(cout), static_cast<std::size_t>(cin), kk, kk, kk},
                            std::sqrt(2.0 / fan_in), 0.0);
  if (bias) c.bias = register_param(rng, name + ".bias", {static_cast<std::size_t>(cout)}, 0.0, 0.0);
  const auto s = static_cast<std::size_t>(stride);
  const auto p = static_cast<std::size_t>(pad);
  c.stride = {s, s, s};
  c.pad = {p, p, p};
  return c;
}

template <typename T>
typename Model<T>::Conv Model<T>::make_transposed(InitRng& rng, const std::string& name, int cin, int cout) {
  Conv c;
  // Each output voxel of a k=2, stride=2 transposed conv sees cin inputs.
  c.weight = register_param(rng, name + ".weight",
                            {static_cast<std::size_t>(cin), static_cast<std::size_t>(cout), 2, 2, 2},
                            std::sqrt(2.0 / cin), 0.0);
  c.bias = register_param(rng, name + ".bias", {static_cast<std::size_t>(cout)}, 0.0, 0.0);
  c.stride = {2, 2, 2};
  return c;
}

template <typename T>
typename Model<T>::Norm Model<T>::make_norm(InitRng& rng, const std::string& name, int channels) {
  const auto c = static_cast<std::size_t>(channels);
  return {register_param(rng, name + ".gamma", {c}, 0.0, 1.0), register_param(rng, name + ".beta", {c}, 0.0, 0.0)};
}

template <typename T>
typename Model<T>::ResBlock Model<T>::make_block(InitRng& rng, const std::string& name, int cin, int cout) {
  ResBlock b;
  b.conv1 = make_conv(rng, name + ".conv1", cin, cout, 3, 1, 1, false);
  b.norm1 = make_norm(rng, name + ".norm1", cout);
  b.conv2 = make_conv(rng, name + ".conv2", cout, cout, 3, 1, 1, false);
  b.norm2 = make_norm(rng, name + ".norm2", cout);
  if (cin != cout) {
    b.has_projection = true;
    b.projection = make_conv(rng, name + ".proj", cin, cout, 1, 1, 0, false);
  }
  return b;
}

template <typename T>
Model<T>::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  InitRng rng(seed);
  const int L = cfg_.levels;
  for (int l = 0; l < L; ++l) {
    if (l > 0) {
      Down d;
      d.conv = make_conv(rng, "down" + std::to_string(l) + ".conv", cfg_.channels_at(l - 1), cfg_.channels_at(l), 3,
                         2, 1, false);
      d.norm = make_norm(rng, "down" + std::to_string(l) + ".norm", cfg_.channels_at(l));
      down_.push_back(std::move(d));
    }
    const int cin = l == 0 ? cfg_.in_channels : cfg_.channels_at(l);
    encoder_.push_back(make_block(rng, "enc" + std::to_string(l), cin, cfg_.channels_at(l)));
  }
  // decoder_[l] / up_[l] produce resolution level l, for l = L-2 .. 0.
  up_.resize(static_cast<std::size_t>(std::max(L - 1, 0)));
  decoder_.resize(up_.size());
  for (int l = L - 2; l >= 0; --l) {
    up_[static_cast<std::size_t>(l)] =
        make_transposed(rng, "up" + std::to_string(l), cfg_.channels_at(l + 1), cfg_.channels_at(l));
    decoder_[static_cast<std::size_t>(l)] =
        make_block(rng, "dec" + std::to_string(l), 2 * cfg_.channels_at(l), cfg_.channels_at(l));
  }
  const auto levels = head_levels();
  for (int h = 0; h < kDeepSupervisionHeads; ++h) {
    heads_.push_back(make_conv(rng, "head" + std::to_string(h), cfg_.channels_at(levels[static_cast<std::size_t>(h)]),
                               cfg_.num_classes, 1, 1, 0, true));
  }
}

template <typename T>
std::array<int, 3> Model<T>::head_levels() const {
  const int deepest = cfg_.levels - 1;
  return {0, std::min(1, deepest), std::min(2, deepest)};
}

template <typename T>
Tensor<T> Model<T>::run_conv(const Conv& c, const Tensor<T>& x) const {
  return ad::conv3d(x, c.weight, c.bias, c.stride, c.pad);
}

template <typename T>
Tensor<T> Model<T>::run_norm(const Norm& n, const Tensor<T>& x) const {
  return ad::instance_norm(x, n.gamma, n.beta, static_cast<T>(cfg_.norm_eps));
}

template <typename T>
Tensor<T> Model<T>::act(const Tensor<T>& x) const {
  return ad::leaky_relu(x, static_cast<T>(cfg_.leaky_slope));
}

template <typename T>
Tensor<T> Model<T>::run_block(const ResBlock& b, const Tensor<T>& x) const {
  Tensor<T> y = act(run_norm(b.norm1, run_conv(b.conv1, x)));
  y = run_norm(b.norm2, run_conv(b.conv2, y));
  const Tensor<T> shortcut = b.has_projection ? run_conv(b.projection, x) : x;
  return act(ad::add(y, shortcut));
}

template <typename T>
std::array<Tensor<T>, 3> Model<T>::forward(const Tensor<T>& batch, bool deep_supervision) const {
  const ad::Shape& s = batch.shape();
  if (s.size() != 5 || s[1] != static_cast<std::size_t>(cfg_.in_channels) ||
      s[2] != static_cast<std::size_t>(cfg_.patch_shape[0]) || s[3] != static_cast<std::size_t>(cfg_.patch_shape[1]) ||
      s[4] != static_cast<std::size_t>(cfg_.patch_shape[2])) {
    fail(ErrorCode::ShapeMismatch, "model expects [N, " + std::to_string(cfg_.in_channels) + ", " +
                                       std::to_string(cfg_.patch_shape[0]) + ", " +
                                       std::to_string(cfg_.patch_shape[1]) + ", " +
                                       std::to_string(cfg_.patch_shape[2]) + "], got " + ad::shape_string(s));
  }
  const int L = cfg_.levels;
  std::vector<Tensor<T>> skips(static_cast<std::size_t>(L));
  Tensor<T> x = batch;
  for (int l = 0; l < L; ++l) {
    if (l > 0) {
      const Down& d = down_[static_cast<std::size_t>(l - 1)];
      x = act(run_norm(d.norm, run_conv(d.conv, x)));
    }
    x = run_block(encoder_[static_cast<std::size_t>(l)], x);
    skips[static_cast<std::size_t>(l)] = x;
  }
  // features[l] = decoder output at resolution level l; the bottleneck for l = L-1.
  std::vector<Tensor<T>> features(static_cast<std::size_t>(L));
  features[static_cast<std::size_t>(L - 1)] = x;
  for (int l = L - 2; l >= 0; --l) {
    const auto lu = static_cast<std::size_t>(l);
    const Conv& up = up_[lu];
    x = ad::transposed_conv3d(x, up.weight, up.bias, up.stride);
    x = run_block(decoder_[lu], ad::concat_channels(x, skips[lu]));
    features[lu] = x;
  }

  const ad::Triple full{static_cast<std::size_t>(cfg_.patch_shape[0]), static_cast<std::size_t>(cfg_.patch_shape[1]),
                        static_cast<std::size_t>(cfg_.patch_shape[2])};
  const auto levels = head_levels();
  std::array<Tensor<T>, 3> out;
  const int heads = deep_supervision ? kDeepSupervisionHeads : 1;
  for (int h = 0; h < heads; ++h) {
    const auto hu = static_cast<std::size_t>(h);
    Tensor<T> logits = run_conv(heads_[hu], features[static_cast<std::size_t>(levels[hu])]);
    if (levels[hu] > 0) logits = ad::upsample_trilinear(logits, full);
    out[hu] = logits;
  }
  return out;
}

template <typename T>
std::size_t Model<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

template <typename T>
void Model<T>::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

template class Model<float>;
template class Model<double>;

}  // namespace vseg

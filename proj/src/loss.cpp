#include "vseg/loss.hpp"

#include <cmath>

#include "graph.hpp"
#include "vseg/ops.hpp"

namespace vseg {

using ad::Node;
using ad::Tensor;
using ad::detail::grad_target;
using ad::detail::make_result;
using ad::detail::require;

void LossConfig::validate() const {
  if (w_dice < 0.0 || w_ce < 0.0) fail(ErrorCode::BadConfig, "loss weights must be >= 0");
  if (!(dice_eps > 0.0)) fail(ErrorCode::BadConfig, "dice_eps must be > 0");
  for (double w : head_weights) {
    if (w < 0.0) fail(ErrorCode::BadConfig, "head weights must be >= 0");
  }
}

namespace {

struct Layout {
  std::size_t N;
  std::size_t C;
  std::size_t M;
};

Layout check_probs(const ad::Shape& s, std::size_t target_size, const char* op) {
  require(s.size() >= 3, std::string(op) + ": probs must be [N, C, spatial...]");
  Layout l{s[0], s[1], 1};
  for (std::size_t d = 2; d < s.size(); ++d) l.M *= s[d];
  require(target_size == l.N * l.M, std::string(op) + ": target has " + std::to_string(target_size) +
                                        " voxels, probs have " + std::to_string(l.N * l.M));
  return l;
}

void check_labels(std::span<const std::uint8_t> target, std::size_t C, const char* op) {
  for (auto t : target) {
    if (t >= C) fail(ErrorCode::BadLabel, std::string(op) + ": label " + std::to_string(t) + " >= channel count");
  }
}

}  // namespace

template <typename T>
Tensor<T> dice_loss(const Tensor<T>& probs, std::span<const std::uint8_t> target, const LossConfig& cfg) {
  const Layout l = check_probs(probs.shape(), target.size(), "dice_loss");
  check_labels(target, l.C, "dice_loss");
  const std::size_t first = cfg.exclude_background ? 1 : 0;
  require(l.C > first, "dice_loss: no classes left after excluding background");
  const std::size_t K = l.C - first;
  const double eps = cfg.dice_eps;
  const auto p = probs.values();

  // Per-class intersection, prediction mass and target count.
  auto inter = std::make_shared<std::vector<double>>(l.C, 0.0);
  auto denom = std::make_shared<std::vector<double>>(l.C, 0.0);
  for (std::size_t c = first; c < l.C; ++c) {
    double I = 0.0, P = 0.0, G = 0.0;
    for (std::size_t n = 0; n < l.N; ++n) {
      const T* pc = p.data() + (n * l.C + c) * l.M;
      const std::uint8_t* t = target.data() + n * l.M;
      for (std::size_t v = 0; v < l.M; ++v) {
        P += pc[v];
        if (t[v] == c) {
          I += pc[v];
          G += 1.0;
        }
      }
    }
    (*inter)[c] = I;
    (*denom)[c] = P + G + eps;
  }
  double mean_d = 0.0;
  for (std::size_t c = first; c < l.C; ++c) mean_d += (2.0 * (*inter)[c] + eps) / (*denom)[c];
  mean_d /= static_cast<double>(K);

  auto tgt = std::make_shared<std::vector<std::uint8_t>>(target.begin(), target.end());
  return make_result<T>("dice_loss", {1}, {static_cast<T>(1.0 - mean_d)}, {probs.node_ptr()},
                        [l, first, K, eps, inter, denom, tgt](Node<T>& self) {
                          T* gp = grad_target(self.inputs[0]);
                          if (!gp) return;
                          const double up = self.grad[0];
                          for (std::size_t c = first; c < l.C; ++c) {
                            const double D = (*denom)[c];
                            const double num = 2.0 * (*inter)[c] + eps;
                            const double base = up * num / (D * D) / static_cast<double>(K);
                            const double hit = -up * 2.0 / D / static_cast<double>(K);
                            for (std::size_t n = 0; n < l.N; ++n) {
                              T* g = gp + (n * l.C + c) * l.M;
                              const std::uint8_t* t = tgt->data() + n * l.M;
                              for (std::size_t v = 0; v < l.M; ++v)
                                g[v] += static_cast<T>(t[v] == c ? base + hit : base);
                            }
                          }
                        });
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& probs, std::span<const std::uint8_t> target) {
  const Layout l = check_probs(probs.shape(), target.size(), "cross_entropy");
  check_labels(target, l.C, "cross_entropy");
  const auto p = probs.values();
  const double count = static_cast<double>(l.N * l.M);
  double acc = 0.0;
  for (std::size_t n = 0; n < l.N; ++n)
    for (std::size_t v = 0; v < l.M; ++v) {
      const double pt = p[(n * l.C + target[n * l.M + v]) * l.M + v];
      acc -= std::log(std::max(pt, kProbabilityFloor));
    }
  auto tgt = std::make_shared<std::vector<std::uint8_t>>(target.begin(), target.end());
  return make_result<T>("cross_entropy", {1}, {static_cast<T>(acc / count)}, {probs.node_ptr()},
                        [l, count, tgt](Node<T>& self) {
                          const auto& in = self.inputs[0];
                          T* gp = grad_target(in);
                          if (!gp) return;
                          const double up = self.grad[0];
                          for (std::size_t n = 0; n < l.N; ++n)
                            for (std::size_t v = 0; v < l.M; ++v) {
                              const std::size_t i = (n * l.C + (*tgt)[n * l.M + v]) * l.M + v;
                              const double pt = in->value[i];
                              if (pt > kProbabilityFloor) gp[i] += static_cast<T>(-up / (count * pt));
                            }
                        });
}

template <typename T>
Tensor<T> head_loss(const Tensor<T>& logits, std::span<const std::uint8_t> target, const LossConfig& cfg) {
  const Tensor<T> probs = ad::softmax_channels(logits);
  return ad::add(ad::scale(dice_loss(probs, target, cfg), static_cast<T>(cfg.w_dice)),
                 ad::scale(cross_entropy(probs, target), static_cast<T>(cfg.w_ce)));
}

template <typename T>
Tensor<T> combined_loss(const std::array<Tensor<T>, 3>& outputs, std::span<const std::uint8_t> target,
                        const LossConfig& cfg) {
  cfg.validate();
  Tensor<T> total;
  for (std::size_t h = 0; h < outputs.size(); ++h) {
    Tensor<T> term = ad::scale(head_loss(outputs[h], target, cfg), static_cast<T>(cfg.head_weights[h]));
    total = total.defined() ? ad::add(total, term) : term;
  }
  return total;
}

#define VSEG_INSTANTIATE(T)                                                                                   \
  template Tensor<T> dice_loss(const Tensor<T>&, std::span<const std::uint8_t>, const LossConfig&);          \
  template Tensor<T> cross_entropy(const Tensor<T>&, std::span<const std::uint8_t>);                         \
  template Tensor<T> head_loss(const Tensor<T>&, std::span<const std::uint8_t>, const LossConfig&);          \
  template Tensor<T> combined_loss(const std::array<Tensor<T>, 3>&, std::span<const std::uint8_t>,           \
                                   const LossConfig&);

VSEG_INSTANTIATE(float)
VSEG_INSTANTIATE(double)
#undef VSEG_INSTANTIATE

}  // namespace vseg

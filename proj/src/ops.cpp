#include "vseg/ops.hpp"

#include <algorithm>

#include "graph.hpp"
#include "vseg/kernels.hpp"

namespace vseg::ad {

using detail::grad_target;
using detail::make_result;
using detail::NodePtr;
using detail::require;

namespace {

std::size_t spatial_size(const Shape& s) { return s[2] * s[3] * s[4]; }

void require_5d(const Shape& s, const char* what) {
  require(s.size() == 5, std::string(what) + " must be 5D (NCXYZ), got " + shape_string(s));
}

struct AxisTaps {
  std::vector<std::size_t> i0;
  std::vector<std::size_t> i1;
  std::vector<double> w1;
};

AxisTaps axis_taps(std::size_t in, std::size_t out) {
  AxisTaps t;
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t i = 0; i < out; ++i) {
    const double p = std::clamp((static_cast<double>(i) + 0.5) * scale - 0.5, 0.0, static_cast<double>(in - 1));
    const auto a = static_cast<std::size_t>(p);
    t.i0.push_back(a);
    t.i1.push_back(std::min(a + 1, in - 1));
    t.w1.push_back(p - static_cast<double>(a));
  }
  return t;
}

}  // namespace

template <typename T>
Tensor<T> conv3d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, Triple stride,
                 Triple padding) {
  const Shape& xs = input.shape();
  const Shape& ws = weight.shape();
  require_5d(xs, "conv3d input");
  require_5d(ws, "conv3d weight");
  require(ws[1] == xs[1], "conv3d: weight expects " + std::to_string(ws[1]) + " input channels, got " +
                              std::to_string(xs[1]));
  const bool has_bias = bias.defined();
  if (has_bias) require(bias.shape() == Shape{ws[0]}, "conv3d: bias must have shape [Cout]");

  kernels::ConvGeometry g;
  g.batch = xs[0];
  g.cin = xs[1];
  g.cout = ws[0];
  g.in = {xs[2], xs[3], xs[4]};
  g.kernel = {ws[2], ws[3], ws[4]};
  g.stride = stride;
  g.pad = padding;
  require(g.resolve(), "conv3d: kernel does not fit padded input " + shape_string(xs));

  std::vector<T> out(g.output_size());
  kernels::conv3d_forward<T>(g, input.values(), weight.values(),
                             has_bias ? bias.values() : std::span<const T>{}, out);

  std::vector<NodePtr<T>> inputs{input.node_ptr(), weight.node_ptr()};
  if (has_bias) inputs.push_back(bias.node_ptr());
  return make_result<T>("conv3d", {g.batch, g.cout, g.out[0], g.out[1], g.out[2]}, std::move(out),
                        std::move(inputs), [g, has_bias](Node<T>& self) {
                          const auto& x = self.inputs[0];
                          const auto& w = self.inputs[1];
                          const std::span<const T> gout(self.grad);
                          if (T* gx = grad_target(x))
                            kernels::conv3d_backward_input<T>(g, gout, w->value, {gx, x->value.size()});
                          if (T* gw = grad_target(w))
                            kernels::conv3d_backward_weight<T>(g, x->value, gout, {gw, w->value.size()});
                          if (has_bias) {
                            const auto& b = self.inputs[2];
                            if (T* gb = grad_target(b)) kernels::conv3d_backward_bias<T>(g, gout, {gb, b->value.size()});
                          }
                        });
}

template <typename T>
Tensor<T> transposed_conv3d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, Triple stride) {
  const Shape& xs = input.shape();
  const Shape& ws = weight.shape();
  require_5d(xs, "transposed_conv3d input");
  require_5d(ws, "transposed_conv3d weight");
  require(ws[0] == xs[1], "transposed_conv3d: weight expects " + std::to_string(ws[0]) +
                              " input channels, got " + std::to_string(xs[1]));
  const bool has_bias = bias.defined();
  if (has_bias) require(bias.shape() == Shape{ws[1]}, "transposed_conv3d: bias must have shape [Cout]");

  // The equivalent forward convolution maps the output grid back onto the input.
  kernels::ConvGeometry g;
  g.batch = xs[0];
  g.cin = ws[1];
  g.cout = ws[0];
  g.kernel = {ws[2], ws[3], ws[4]};
  g.stride = stride;
  for (int d = 0; d < 3; ++d) {
    require(stride[d] > 0, "transposed_conv3d: stride must be positive");
    g.in[d] = (xs[2 + d] - 1) * stride[d] + g.kernel[d];
  }
  require(g.resolve(), "transposed_conv3d: invalid geometry");

  const std::size_t OV = g.in_voxels();
  std::vector<T> out(g.input_size(), T(0));
  kernels::conv3d_backward_input<T>(g, input.values(), weight.values(), out);
  if (has_bias) {
    const auto b = bias.values();
    for (std::size_t n = 0; n < g.batch; ++n)
      for (std::size_t c = 0; c < g.cin; ++c) {
        T* o = out.data() + (n * g.cin + c) * OV;
        for (std::size_t i = 0; i < OV; ++i) o[i] += b[c];
      }
  }

  std::vector<NodePtr<T>> inputs{input.node_ptr(), weight.node_ptr()};
  if (has_bias) inputs.push_back(bias.node_ptr());
  return make_result<T>(
      "transposed_conv3d", {g.batch, g.cin, g.in[0], g.in[1], g.in[2]}, std::move(out), std::move(inputs),
      [g, has_bias, OV](Node<T>& self) {
        const auto& x = self.inputs[0];
        const auto& w = self.inputs[1];
        const std::span<const T> gy(self.grad);
        if (T* gx = grad_target(x)) {
          std::vector<T> tmp(x->value.size());
          kernels::conv3d_forward<T>(g, gy, w->value, {}, tmp);
          for (std::size_t i = 0; i < tmp.size(); ++i) gx[i] += tmp[i];
        }
        if (T* gw = grad_target(w)) kernels::conv3d_backward_weight<T>(g, gy, x->value, {gw, w->value.size()});
        if (has_bias) {
          if (T* gb = grad_target(self.inputs[2])) {
            for (std::size_t c = 0; c < g.cin; ++c) {
              T acc = T(0);
              for (std::size_t n = 0; n < g.batch; ++n) {
                const T* go = gy.data() + (n * g.cin + c) * OV;
                for (std::size_t i = 0; i < OV; ++i) acc += go[i];
              }
              gb[c] += acc;
            }
          }
        }
      });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
  const auto xv = x.values();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > T(0) ? xv[i] : slope * xv[i];
  return make_result<T>("leaky_relu", x.shape(), std::move(out), {x.node_ptr()}, [slope](Node<T>& self) {
    const auto& in = self.inputs[0];
    if (T* g = grad_target(in)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += in->value[i] > T(0) ? self.grad[i] : slope * self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "add: shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()));
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  return make_result<T>("add", a.shape(), std::move(out), {a.node_ptr(), b.node_ptr()}, [](Node<T>& self) {
    for (const auto& in : self.inputs) {
      if (T* g = grad_target(in))
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "mul: shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()));
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  return make_result<T>("mul", a.shape(), std::move(out), {a.node_ptr(), b.node_ptr()}, [](Node<T>& self) {
    const auto& a = self.inputs[0];
    const auto& b = self.inputs[1];
    // a and b may be the same node; grads then accumulate from both factors.
    if (T* ga = grad_target(a))
      for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i] * b->value[i];
    if (T* gb = grad_target(b))
      for (std::size_t i = 0; i < self.grad.size(); ++i) gb[i] += self.grad[i] * a->value[i];
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  const auto xv = x.values();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] * factor;
  return make_result<T>("scale", x.shape(), std::move(out), {x.node_ptr()}, [factor](Node<T>& self) {
    if (T* g = grad_target(self.inputs[0]))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * factor;
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  double acc = 0.0;
  for (const T v : x.values()) acc += static_cast<double>(v);
  return make_result<T>("sum", {1}, {static_cast<T>(acc)}, {x.node_ptr()}, [](Node<T>& self) {
    const auto& in = self.inputs[0];
    if (T* g = grad_target(in))
      for (std::size_t i = 0; i < in->value.size(); ++i) g[i] += self.grad[0];
  });
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  require(as.size() >= 2 && as.size() == bs.size(), "concat_channels: rank mismatch");
  require(as[0] == bs[0], "concat_channels: batch mismatch");
  for (std::size_t d = 2; d < as.size(); ++d) require(as[d] == bs[d], "concat_channels: spatial mismatch");
  std::size_t inner = 1;
  for (std::size_t d = 2; d < as.size(); ++d) inner *= as[d];
  const std::size_t na = as[1] * inner;
  const std::size_t nb = bs[1] * inner;
  Shape out_shape = as;
  out_shape[1] = as[1] + bs[1];
  std::vector<T> out(as[0] * (na + nb));
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t n = 0; n < as[0]; ++n) {
    std::copy_n(av.begin() + static_cast<std::ptrdiff_t>(n * na), na, out.begin() + static_cast<std::ptrdiff_t>(n * (na + nb)));
    std::copy_n(bv.begin() + static_cast<std::ptrdiff_t>(n * nb), nb,
                out.begin() + static_cast<std::ptrdiff_t>(n * (na + nb) + na));
  }
  return make_result<T>("concat_channels", std::move(out_shape), std::move(out), {a.node_ptr(), b.node_ptr()},
                        [na, nb, batch = as[0]](Node<T>& self) {
                          T* ga = grad_target(self.inputs[0]);
                          T* gb = grad_target(self.inputs[1]);
                          for (std::size_t n = 0; n < batch; ++n) {
                            const T* g = self.grad.data() + n * (na + nb);
                            if (ga)
                              for (std::size_t i = 0; i < na; ++i) ga[n * na + i] += g[i];
                            if (gb)
                              for (std::size_t i = 0; i < nb; ++i) gb[n * nb + i] += g[na + i];
                          }
                        });
}

template <typename T>
Tensor<T> instance_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  const Shape& xs = x.shape();
  require_5d(xs, "instance_norm input");
  const std::size_t N = xs[0], C = xs[1], M = spatial_size(xs);
  require(gamma.shape() == Shape{C} && beta.shape() == Shape{C}, "instance_norm: gamma/beta must have shape [C]");
  const auto xv = x.values();
  const auto gv = gamma.values();
  const auto bv = beta.values();
  std::vector<T> out(xv.size());
  auto xhat = std::make_shared<std::vector<T>>(xv.size());
  auto inv_std = std::make_shared<std::vector<T>>(N * C);

  const auto planes = static_cast<std::int64_t>(N * C);
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < planes; ++p) {
    const std::size_t c = static_cast<std::size_t>(p) % C;
    const T* in = xv.data() + static_cast<std::size_t>(p) * M;
    double mean = 0.0;
    for (std::size_t i = 0; i < M; ++i) mean += in[i];
    mean /= static_cast<double>(M);
    double var = 0.0;
    for (std::size_t i = 0; i < M; ++i) var += (in[i] - mean) * (in[i] - mean);
    var /= static_cast<double>(M);
    const double inv = 1.0 / std::sqrt(var + static_cast<double>(eps));
    (*inv_std)[static_cast<std::size_t>(p)] = static_cast<T>(inv);
    T* xh = xhat->data() + static_cast<std::size_t>(p) * M;
    T* o = out.data() + static_cast<std::size_t>(p) * M;
    for (std::size_t i = 0; i < M; ++i) {
      xh[i] = static_cast<T>((in[i] - mean) * inv);
      o[i] = gv[c] * xh[i] + bv[c];
    }
  }

  return make_result<T>(
      "instance_norm", xs, std::move(out), {x.node_ptr(), gamma.node_ptr(), beta.node_ptr()},
      [N, C, M, xhat, inv_std](Node<T>& self) {
        T* gx = grad_target(self.inputs[0]);
        T* ggamma = grad_target(self.inputs[1]);
        T* gbeta = grad_target(self.inputs[2]);
        const auto& gam = self.inputs[1]->value;
        std::vector<double> part_gamma(N * C, 0.0), part_beta(N * C, 0.0);
        const auto planes = static_cast<std::int64_t>(N * C);
#pragma omp parallel for schedule(static)
        for (std::int64_t p = 0; p < planes; ++p) {
          const auto pu = static_cast<std::size_t>(p);
          const std::size_t c = pu % C;
          const T* gy = self.grad.data() + pu * M;
          const T* xh = xhat->data() + pu * M;
          double sum_g = 0.0, sum_gx = 0.0;
          for (std::size_t i = 0; i < M; ++i) {
            sum_g += gy[i];
            sum_gx += static_cast<double>(gy[i]) * xh[i];
          }
          part_beta[pu] = sum_g;
          part_gamma[pu] = sum_gx;
          if (gx) {
            const double k = static_cast<double>(gam[c]) * (*inv_std)[pu] / static_cast<double>(M);
            T* g = gx + pu * M;
            for (std::size_t i = 0; i < M; ++i) {
              g[i] += static_cast<T>(k * (static_cast<double>(M) * gy[i] - sum_g - xh[i] * sum_gx));
            }
          }
        }
        for (std::size_t c = 0; c < C; ++c) {
          double sg = 0.0, sb = 0.0;
          for (std::size_t n = 0; n < N; ++n) {
            sg += part_gamma[n * C + c];
            sb += part_beta[n * C + c];
          }
          if (ggamma) ggamma[c] += static_cast<T>(sg);
          if (gbeta) gbeta[c] += static_cast<T>(sb);
        }
      });
}

template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& logits) {
  const Shape& s = logits.shape();
  require(s.size() >= 2, "softmax_channels: need at least [N, C]");
  const std::size_t N = s[0], C = s[1];
  std::size_t M = 1;
  for (std::size_t d = 2; d < s.size(); ++d) M *= s[d];
  const auto xv = logits.values();
  std::vector<T> out(xv.size());
  const auto total = static_cast<std::int64_t>(N * M);
#pragma omp parallel for schedule(static)
  for (std::int64_t q = 0; q < total; ++q) {
    const std::size_t n = static_cast<std::size_t>(q) / M, v = static_cast<std::size_t>(q) % M;
    const std::size_t base = n * C * M + v;
    T mx = xv[base];
    for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, xv[base + c * M]);
    double denom = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      const double e = std::exp(static_cast<double>(xv[base + c * M] - mx));
      out[base + c * M] = static_cast<T>(e);
      denom += e;
    }
    for (std::size_t c = 0; c < C; ++c) out[base + c * M] = static_cast<T>(out[base + c * M] / denom);
  }
  return make_result<T>("softmax_channels", s, std::move(out), {logits.node_ptr()}, [N, C, M](Node<T>& self) {
    T* gx = grad_target(self.inputs[0]);
    if (!gx) return;
    const auto& p = self.value;
    const auto& g = self.grad;
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t v = 0; v < M; ++v) {
        const std::size_t base = n * C * M + v;
        double dot = 0.0;
        for (std::size_t c = 0; c < C; ++c) dot += static_cast<double>(g[base + c * M]) * p[base + c * M];
        for (std::size_t c = 0; c < C; ++c)
          gx[base + c * M] += static_cast<T>(p[base + c * M] * (g[base + c * M] - dot));
      }
  });
}

template <typename T>
Tensor<T> upsample_trilinear(const Tensor<T>& x, Triple size) {
  const Shape& xs = x.shape();
  require_5d(xs, "upsample_trilinear input");
  for (auto s : size) require(s >= 1, "upsample_trilinear: target size must be >= 1");
  const AxisTaps tx = axis_taps(xs[2], size[0]);
  const AxisTaps ty = axis_taps(xs[3], size[1]);
  const AxisTaps tz = axis_taps(xs[4], size[2]);
  const std::size_t planes = xs[0] * xs[1];
  const std::size_t IM = spatial_size(xs);
  const std::size_t OM = size[0] * size[1] * size[2];
  const std::size_t I1 = xs[3], I2 = xs[4];

  // Visits the 8 (weight, input offset) taps of output voxel (a, b, c).
  auto for_taps = [=](std::size_t a, std::size_t b, std::size_t c, auto&& f) {
    const std::size_t xi[2] = {tx.i0[a], tx.i1[a]};
    const std::size_t yi[2] = {ty.i0[b], ty.i1[b]};
    const std::size_t zi[2] = {tz.i0[c], tz.i1[c]};
    const double xw[2] = {1.0 - tx.w1[a], tx.w1[a]};
    const double yw[2] = {1.0 - ty.w1[b], ty.w1[b]};
    const double zw[2] = {1.0 - tz.w1[c], tz.w1[c]};
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k) f(xw[i] * yw[j] * zw[k], (xi[i] * I1 + yi[j]) * I2 + zi[k]);
  };

  const auto xv = x.values();
  std::vector<T> out(planes * OM);
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < static_cast<std::int64_t>(planes); ++p) {
    const T* in = xv.data() + static_cast<std::size_t>(p) * IM;
    T* o = out.data() + static_cast<std::size_t>(p) * OM;
    for (std::size_t a = 0; a < size[0]; ++a)
      for (std::size_t b = 0; b < size[1]; ++b)
        for (std::size_t c = 0; c < size[2]; ++c) {
          double acc = 0.0;
          for_taps(a, b, c, [&](double w, std::size_t off) { acc += w * in[off]; });
          o[(a * size[1] + b) * size[2] + c] = static_cast<T>(acc);
        }
  }
  return make_result<T>("upsample_trilinear", {xs[0], xs[1], size[0], size[1], size[2]}, std::move(out),
                        {x.node_ptr()}, [=](Node<T>& self) {
                          T* gx = grad_target(self.inputs[0]);
                          if (!gx) return;
#pragma omp parallel for schedule(static)
                          for (std::int64_t p = 0; p < static_cast<std::int64_t>(planes); ++p) {
                            T* gi = gx + static_cast<std::size_t>(p) * IM;
                            const T* go = self.grad.data() + static_cast<std::size_t>(p) * OM;
                            for (std::size_t a = 0; a < size[0]; ++a)
                              for (std::size_t b = 0; b < size[1]; ++b)
                                for (std::size_t c = 0; c < size[2]; ++c) {
                                  const double g = go[(a * size[1] + b) * size[2] + c];
                                  for_taps(a, b, c, [&](double w, std::size_t off) { gi[off] += static_cast<T>(w * g); });
                                }
                          }
                        });
}

#define VSEG_INSTANTIATE(T)                                                                                   \
  template Tensor<T> conv3d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Triple, Triple);           \
  template Tensor<T> transposed_conv3d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Triple);        \
  template Tensor<T> leaky_relu(const Tensor<T>&, T);                                                        \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                                \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                                \
  template Tensor<T> scale(const Tensor<T>&, T);                                                             \
  template Tensor<T> sum(const Tensor<T>&);                                                                  \
  template Tensor<T> concat_channels(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> instance_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);                 \
  template Tensor<T> softmax_channels(const Tensor<T>&);                                                     \
  template Tensor<T> upsample_trilinear(const Tensor<T>&, Triple);

VSEG_INSTANTIATE(float)
VSEG_INSTANTIATE(double)
#undef VSEG_INSTANTIATE

}  // namespace vseg::ad

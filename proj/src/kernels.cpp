#include "vseg/kernels.hpp"

#include <algorithm>
#include <cstdint>

namespace vseg::kernels {

bool ConvGeometry::resolve() {
  for (int d = 0; d < 3; ++d) {
    if (stride[d] == 0 || kernel[d] == 0) return false;
    const std::size_t padded = in[d] + 2 * pad[d];
    if (kernel[d] > padded) return false;
    out[d] = (padded - kernel[d]) / stride[d] + 1;
  }
  return true;
}

namespace {

using Idx = std::int64_t;

// Output indices o in [lo, hi) with 0 <= o*stride - pad + k < in.
struct Range {
  Idx lo;
  Idx hi;
};

Range valid_outputs(std::size_t in, std::size_t out, std::size_t stride, std::size_t pad, std::size_t k) {
  const Idx s = static_cast<Idx>(stride);
  const Idx shift = static_cast<Idx>(pad) - static_cast<Idx>(k);
  // o*s >= shift  ->  o >= ceil(shift / s)
  Idx lo = shift > 0 ? (shift + s - 1) / s : 0;
  // o*s - shift <= in - 1  ->  o <= floor((in - 1 + shift) / s)
  const Idx top = static_cast<Idx>(in) - 1 + shift;
  Idx hi = top < 0 ? 0 : top / s + 1;
  hi = std::min<Idx>(hi, static_cast<Idx>(out));
  lo = std::min(lo, hi);
  return {lo, hi};
}

}  // namespace

template <typename T>
void conv3d_forward(const ConvGeometry& g, std::span<const T> input, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> out) {
  const Idx I1 = static_cast<Idx>(g.in[1]), I2 = static_cast<Idx>(g.in[2]);
  const Idx O1 = static_cast<Idx>(g.out[1]), O2 = static_cast<Idx>(g.out[2]);
  const Idx K1 = static_cast<Idx>(g.kernel[1]), K2 = static_cast<Idx>(g.kernel[2]);
  const Idx s0 = static_cast<Idx>(g.stride[0]), s1 = static_cast<Idx>(g.stride[1]),
            s2 = static_cast<Idx>(g.stride[2]);
  const Idx p0 = static_cast<Idx>(g.pad[0]), p1 = static_cast<Idx>(g.pad[1]), p2 = static_cast<Idx>(g.pad[2]);
  const std::size_t IV = g.in_voxels(), OV = g.out_voxels(), KV = g.kernel_voxels();
  const Idx batch = static_cast<Idx>(g.batch), cout = static_cast<Idx>(g.cout);

#pragma omp parallel for collapse(2) schedule(static)
  for (Idx n = 0; n < batch; ++n) {
    for (Idx co = 0; co < cout; ++co) {
      T* o = out.data() + (static_cast<std::size_t>(n) * g.cout + static_cast<std::size_t>(co)) * OV;
      std::fill(o, o + OV, bias.empty() ? T(0) : bias[static_cast<std::size_t>(co)]);
      for (std::size_t ci = 0; ci < g.cin; ++ci) {
        const T* x = input.data() + (static_cast<std::size_t>(n) * g.cin + ci) * IV;
        const T* w = weight.data() + (static_cast<std::size_t>(co) * g.cin + ci) * KV;
        for (Idx kx = 0; kx < static_cast<Idx>(g.kernel[0]); ++kx) {
          const Range rx = valid_outputs(g.in[0], g.out[0], g.stride[0], g.pad[0], static_cast<std::size_t>(kx));
          for (Idx ky = 0; ky < K1; ++ky) {
            const Range ry = valid_outputs(g.in[1], g.out[1], g.stride[1], g.pad[1], static_cast<std::size_t>(ky));
            for (Idx kz = 0; kz < K2; ++kz) {
              const Range rz =
                  valid_outputs(g.in[2], g.out[2], g.stride[2], g.pad[2], static_cast<std::size_t>(kz));
              const T wv = w[(kx * K1 + ky) * K2 + kz];
              for (Idx ox = rx.lo; ox < rx.hi; ++ox) {
                const Idx ix = ox * s0 - p0 + kx;
                for (Idx oy = ry.lo; oy < ry.hi; ++oy) {
                  const Idx iy = oy * s1 - p1 + ky;
                  T* orow = o + (ox * O1 + oy) * O2;
                  const T* xrow = x + (ix * I1 + iy) * I2;
                  if (s2 == 1) {
                    const Idx off = kz - p2;
                    for (Idx oz = rz.lo; oz < rz.hi; ++oz) orow[oz] += wv * xrow[oz + off];
                  } else {
                    for (Idx oz = rz.lo; oz < rz.hi; ++oz) orow[oz] += wv * xrow[oz * s2 - p2 + kz];
                  }
                }
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv3d_backward_input(const ConvGeometry& g, std::span<const T> grad_out, std::span<const T> weight,
                           std::span<T> grad_input) {
  const Idx I1 = static_cast<Idx>(g.in[1]), I2 = static_cast<Idx>(g.in[2]);
  const Idx O1 = static_cast<Idx>(g.out[1]), O2 = static_cast<Idx>(g.out[2]);
  const Idx K1 = static_cast<Idx>(g.kernel[1]), K2 = static_cast<Idx>(g.kernel[2]);
  const Idx s0 = static_cast<Idx>(g.stride[0]), s1 = static_cast<Idx>(g.stride[1]),
            s2 = static_cast<Idx>(g.stride[2]);
  const Idx p0 = static_cast<Idx>(g.pad[0]), p1 = static_cast<Idx>(g.pad[1]), p2 = static_cast<Idx>(g.pad[2]);
  const std::size_t IV = g.in_voxels(), OV = g.out_voxels(), KV = g.kernel_voxels();
  const Idx batch = static_cast<Idx>(g.batch), cin = static_cast<Idx>(g.cin);

#pragma omp parallel for collapse(2) schedule(static)
  for (Idx n = 0; n < batch; ++n) {
    for (Idx ci = 0; ci < cin; ++ci) {
      T* gi = grad_input.data() + (static_cast<std::size_t>(n) * g.cin + static_cast<std::size_t>(ci)) * IV;
      for (std::size_t co = 0; co < g.cout; ++co) {
        const T* go = grad_out.data() + (static_cast<std::size_t>(n) * g.cout + co) * OV;
        const T* w = weight.data() + (co * g.cin + static_cast<std::size_t>(ci)) * KV;
        for (Idx kx = 0; kx < static_cast<Idx>(g.kernel[0]); ++kx) {
          const Range rx = valid_outputs(g.in[0], g.out[0], g.stride[0], g.pad[0], static_cast<std::size_t>(kx));
          for (Idx ky = 0; ky < K1; ++ky) {
            const Range ry = valid_outputs(g.in[1], g.out[1], g.stride[1], g.pad[1], static_cast<std::size_t>(ky));
            for (Idx kz = 0; kz < K2; ++kz) {
              const Range rz =
                  valid_outputs(g.in[2], g.out[2], g.stride[2], g.pad[2], static_cast<std::size_t>(kz));
              const T wv = w[(kx * K1 + ky) * K2 + kz];
              for (Idx ox = rx.lo; ox < rx.hi; ++ox) {
                const Idx ix = ox * s0 - p0 + kx;
                for (Idx oy = ry.lo; oy < ry.hi; ++oy) {
                  const Idx iy = oy * s1 - p1 + ky;
                  const T* grow = go + (ox * O1 + oy) * O2;
                  T* irow = gi + (ix * I1 + iy) * I2;
                  if (s2 == 1) {
                    const Idx off = kz - p2;
                    for (Idx oz = rz.lo; oz < rz.hi; ++oz) irow[oz + off] += wv * grow[oz];
                  } else {
                    for (Idx oz = rz.lo; oz < rz.hi; ++oz) irow[oz * s2 - p2 + kz] += wv * grow[oz];
                  }
                }
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv3d_backward_weight(const ConvGeometry& g, std::span<const T> input, std::span<const T> grad_out,
                            std::span<T> grad_weight) {
  const Idx I1 = static_cast<Idx>(g.in[1]), I2 = static_cast<Idx>(g.in[2]);
  const Idx O1 = static_cast<Idx>(g.out[1]), O2 = static_cast<Idx>(g.out[2]);
  const Idx K1 = static_cast<Idx>(g.kernel[1]), K2 = static_cast<Idx>(g.kernel[2]);
  const Idx s0 = static_cast<Idx>(g.stride[0]), s1 = static_cast<Idx>(g.stride[1]),
            s2 = static_cast<Idx>(g.stride[2]);
  const Idx p0 = static_cast<Idx>(g.pad[0]), p1 = static_cast<Idx>(g.pad[1]), p2 = static_cast<Idx>(g.pad[2]);
  const std::size_t IV = g.in_voxels(), OV = g.out_voxels(), KV = g.kernel_voxels();
  const Idx cout = static_cast<Idx>(g.cout), cin = static_cast<Idx>(g.cin);

#pragma omp parallel for collapse(2) schedule(static)
  for (Idx co = 0; co < cout; ++co) {
    for (Idx ci = 0; ci < cin; ++ci) {
      T* gw = grad_weight.data() + (static_cast<std::size_t>(co) * g.cin + static_cast<std::size_t>(ci)) * KV;
      for (Idx kx = 0; kx < static_cast<Idx>(g.kernel[0]); ++kx) {
        const Range rx = valid_outputs(g.in[0], g.out[0], g.stride[0], g.pad[0], static_cast<std::size_t>(kx));
        for (Idx ky = 0; ky < K1; ++ky) {
          const Range ry = valid_outputs(g.in[1], g.out[1], g.stride[1], g.pad[1], static_cast<std::size_t>(ky));
          for (Idx kz = 0; kz < K2; ++kz) {
            const Range rz = valid_outputs(g.in[2], g.out[2], g.stride[2], g.pad[2], static_cast<std::size_t>(kz));
            T acc = T(0);
            for (std::size_t n = 0; n < g.batch; ++n) {
              const T* x = input.data() + (n * g.cin + static_cast<std::size_t>(ci)) * IV;
              const T* go = grad_out.data() + (n * g.cout + static_cast<std::size_t>(co)) * OV;
              for (Idx ox = rx.lo; ox < rx.hi; ++ox) {
                const Idx ix = ox * s0 - p0 + kx;
                for (Idx oy = ry.lo; oy < ry.hi; ++oy) {
                  const Idx iy = oy * s1 - p1 + ky;
                  const T* grow = go + (ox * O1 + oy) * O2;
                  const T* xrow = x + (ix * I1 + iy) * I2;
                  if (s2 == 1) {
                    const Idx off = kz - p2;
                    for (Idx oz = rz.lo; oz < rz.hi; ++oz) acc += grow[oz] * xrow[oz + off];
                  } else {
                    for (Idx oz = rz.lo; oz < rz.hi; ++oz) acc += grow[oz] * xrow[oz * s2 - p2 + kz];
                  }
                }
              }
            }
            gw[(kx * K1 + ky) * K2 + kz] += acc;
          }
        }
      }
    }
  }
}

template <typename T>
void conv3d_backward_bias(const ConvGeometry& g, std::span<const T> grad_out, std::span<T> grad_bias) {
  const std::size_t OV = g.out_voxels();
  for (std::size_t co = 0; co < g.cout; ++co) {
    T acc = T(0);
    for (std::size_t n = 0; n < g.batch; ++n) {
      const T* go = grad_out.data() + (n * g.cout + co) * OV;
      for (std::size_t i = 0; i < OV; ++i) acc += go[i];
    }
    grad_bias[co] += acc;
  }
}

#define VSEG_INSTANTIATE(T)                                                                                  \
  template void conv3d_forward<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,              \
                                  std::span<const T>, std::span<T>);                                        \
  template void conv3d_backward_input<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,       \
                                         std::span<T>);                                                     \
  template void conv3d_backward_weight<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,      \
                                          std::span<T>);                                                    \
  template void conv3d_backward_bias<T>(const ConvGeometry&, std::span<const T>, std::span<T>);

VSEG_INSTANTIATE(float)
VSEG_INSTANTIATE(double)
#undef VSEG_INSTANTIATE

}  // namespace vseg::kernels

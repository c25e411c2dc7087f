#include <cstdint>

#include "vseg/kernels.hpp"

namespace vseg::kernels::reference {

namespace {

using Idx = std::int64_t;

struct Indexer {
  const ConvGeometry& g;
  std::size_t input(std::size_t n, std::size_t c, Idx x, Idx y, Idx z) const {
    return (((n * g.cin + c) * g.in[0] + static_cast<std::size_t>(x)) * g.in[1] + static_cast<std::size_t>(y)) *
               g.in[2] +
           static_cast<std::size_t>(z);
  }
  std::size_t output(std::size_t n, std::size_t c, std::size_t x, std::size_t y, std::size_t z) const {
    return (((n * g.cout + c) * g.out[0] + x) * g.out[1] + y) * g.out[2] + z;
  }
  std::size_t weight(std::size_t co, std::size_t ci, std::size_t x, std::size_t y, std::size_t z) const {
    return (((co * g.cin + ci) * g.kernel[0] + x) * g.kernel[1] + y) * g.kernel[2] + z;
  }
  // Input coordinate touched by output o and kernel tap k on axis d, or -1.
  Idx source(int d, std::size_t o, std::size_t k) const {
    const Idx i = static_cast<Idx>(o * g.stride[d] + k) - static_cast<Idx>(g.pad[d]);
    return (i < 0 || i >= static_cast<Idx>(g.in[d])) ? -1 : i;
  }
};

// Visits every (output, input, weight) index triple with a valid input tap.
template <typename F>
void for_each_tap(const ConvGeometry& g, F&& f) {
  const Indexer ix{g};
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t co = 0; co < g.cout; ++co)
      for (std::size_t ox = 0; ox < g.out[0]; ++ox)
        for (std::size_t oy = 0; oy < g.out[1]; ++oy)
          for (std::size_t oz = 0; oz < g.out[2]; ++oz)
            for (std::size_t ci = 0; ci < g.cin; ++ci)
              for (std::size_t kx = 0; kx < g.kernel[0]; ++kx)
                for (std::size_t ky = 0; ky < g.kernel[1]; ++ky)
                  for (std::size_t kz = 0; kz < g.kernel[2]; ++kz) {
                    const Idx x = ix.source(0, ox, kx), y = ix.source(1, oy, ky), z = ix.source(2, oz, kz);
                    if (x < 0 || y < 0 || z < 0) continue;
                    f(ix.output(n, co, ox, oy, oz), ix.input(n, ci, x, y, z), ix.weight(co, ci, kx, ky, kz));
                  }
}

}  // namespace

template <typename T>
void conv3d_forward(const ConvGeometry& g, std::span<const T> input, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> out) {
  const std::size_t OV = g.out_voxels();
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t co = 0; co < g.cout; ++co)
      for (std::size_t i = 0; i < OV; ++i) out[(n * g.cout + co) * OV + i] = bias.empty() ? T(0) : bias[co];
  for_each_tap(g, [&](std::size_t o, std::size_t i, std::size_t w) { out[o] += weight[w] * input[i]; });
}

template <typename T>
void conv3d_backward_input(const ConvGeometry& g, std::span<const T> grad_out, std::span<const T> weight,
                           std::span<T> grad_input) {
  for_each_tap(g, [&](std::size_t o, std::size_t i, std::size_t w) { grad_input[i] += weight[w] * grad_out[o]; });
}

template <typename T>
void conv3d_backward_weight(const ConvGeometry& g, std::span<const T> input, std::span<const T> grad_out,
                            std::span<T> grad_weight) {
  for_each_tap(g, [&](std::size_t o, std::size_t i, std::size_t w) { grad_weight[w] += input[i] * grad_out[o]; });
}

#define VSEG_INSTANTIATE(T)                                                                                  \
  template void conv3d_forward<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,              \
                                  std::span<const T>, std::span<T>);                                        \
  template void conv3d_backward_input<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,       \
                                         std::span<T>);                                                     \
  template void conv3d_backward_weight<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,      \
                                          std::span<T>);

VSEG_INSTANTIATE(float)
VSEG_INSTANTIATE(double)
#undef VSEG_INSTANTIATE

}  // namespace vseg::kernels::reference

#pragma once

#include <array>
#include <cstddef>
#include <span>

namespace vseg::kernels {

/// Geometry of a 3D cross-correlation over NCXYZ tensors (z fastest).
/// Weight layout is [cout][cin][kx][ky][kz].
struct ConvGeometry {
  std::size_t batch = 1;
  std::size_t cin = 1;
  std::size_t cout = 1;
  std::array<std::size_t, 3> in{1, 1, 1};
  std::array<std::size_t, 3> kernel{1, 1, 1};
  std::array<std::size_t, 3> stride{1, 1, 1};
  std::array<std::size_t, 3> pad{0, 0, 0};
  std::array<std::size_t, 3> out{1, 1, 1};

  /// Fills `out` from in/kernel/stride/pad; returns false if the kernel does
  /// not fit the padded input.
  bool resolve();

  std::size_t in_voxels() const { return in[0] * in[1] * in[2]; }
  std::size_t out_voxels() const { return out[0] * out[1] * out[2]; }
  std::size_t kernel_voxels() const { return kernel[0] * kernel[1] * kernel[2]; }
  std::size_t input_size() const { return batch * cin * in_voxels(); }
  std::size_t output_size() const { return batch * cout * out_voxels(); }
  std::size_t weight_size() const { return cout * cin * kernel_voxels(); }
};

// OpenMP kernels. Each output element is owned by exactly one thread and
// reduced in a fixed order, so results do not depend on the thread count.

/// out = conv(input, weight) + bias. `bias` may be empty.
template <typename T>
void conv3d_forward(const ConvGeometry& g, std::span<const T> input, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> out);

/// grad_input += conv^T(grad_out, weight).
template <typename T>
void conv3d_backward_input(const ConvGeometry& g, std::span<const T> grad_out, std::span<const T> weight,
                           std::span<T> grad_input);

/// grad_weight += correlation of input with grad_out.
template <typename T>
void conv3d_backward_weight(const ConvGeometry& g, std::span<const T> input, std::span<const T> grad_out,
                            std::span<T> grad_weight);

/// grad_bias[c] += sum of grad_out over batch and voxels of channel c.
template <typename T>
void conv3d_backward_bias(const ConvGeometry& g, std::span<const T> grad_out, std::span<T> grad_bias);

namespace reference {

// Serial textbook loops. Kept as the oracle for the parallel kernels.

template <typename T>
void conv3d_forward(const ConvGeometry& g, std::span<const T> input, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> out);

template <typename T>
void conv3d_backward_input(const ConvGeometry& g, std::span<const T> grad_out, std::span<const T> weight,
                           std::span<T> grad_input);

template <typename T>
void conv3d_backward_weight(const ConvGeometry& g, std::span<const T> input, std::span<const T> grad_out,
                            std::span<T> grad_weight);

}  // namespace reference

}  // namespace vseg::kernels

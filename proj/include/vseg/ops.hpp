#pragma once

#include <array>

#include "vseg/tensor.hpp"

namespace vseg::ad {

using Triple = std::array<std::size_t, 3>;

// All spatial tensors are NCXYZ with z varying fastest. Every op checks that
// its output is finite and throws NonFinite otherwise.

/// Cross-correlation; weight [Cout, Cin, kx, ky, kz], bias [Cout] or undefined.
template <typename T>
Tensor<T> conv3d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, Triple stride,
                 Triple padding);

/// Adjoint of conv3d without padding; weight [Cin, Cout, kx, ky, kz].
/// Output spatial size is (in - 1) * stride + k.
template <typename T>
Tensor<T> transposed_conv3d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                            Triple stride = {2, 2, 2});

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope = T(0.01));

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

/// Elementwise product.
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);

/// Sum of all elements as a scalar of shape [1].
template <typename T>
Tensor<T> sum(const Tensor<T>& x);

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

/// Per (sample, channel) standardization over voxels, then gamma * xhat + beta
/// with gamma/beta of shape [C].
template <typename T>
Tensor<T> instance_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps = T(1e-5));

template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& logits);

/// Center-aligned trilinear resize of the spatial axes to `size`.
template <typename T>
Tensor<T> upsample_trilinear(const Tensor<T>& x, Triple size);

}  // namespace vseg::ad

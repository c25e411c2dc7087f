#pragma once

#include <cstddef>
#include <span>

#include "vseg/volume.hpp"

namespace vseg {

// Volumes and patches store voxels x-fastest; tensors are NCXYZ with z
// fastest. These copy one spatial block between the two orders.

template <typename Src, typename Dst>
void volume_to_tensor_order(std::span<const Src> src, const Shape3& shape, Dst* dst) {
  const auto X = static_cast<std::size_t>(shape[0]), Y = static_cast<std::size_t>(shape[1]),
             Z = static_cast<std::size_t>(shape[2]);
  for (std::size_t z = 0; z < Z; ++z)
    for (std::size_t y = 0; y < Y; ++y)
      for (std::size_t x = 0; x < X; ++x) dst[(x * Y + y) * Z + z] = static_cast<Dst>(src[x + X * (y + Y * z)]);
}

template <typename Src, typename Dst>
void tensor_to_volume_order(const Src* src, const Shape3& shape, std::span<Dst> dst) {
  const auto X = static_cast<std::size_t>(shape[0]), Y = static_cast<std::size_t>(shape[1]),
             Z = static_cast<std::size_t>(shape[2]);
  for (std::size_t z = 0; z < Z; ++z)
    for (std::size_t y = 0; y < Y; ++y)
      for (std::size_t x = 0; x < X; ++x) dst[x + X * (y + Y * z)] = static_cast<Dst>(src[(x * Y + y) * Z + z]);
}

}  // namespace vseg

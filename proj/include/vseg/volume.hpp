#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace vseg {

/// Number of classes in the abdominal label space: background plus 15 organs.
inline constexpr int kDefaultNumClasses = 16;

enum class Modality { CT, MRI };

std::string_view to_string(Modality m);
Modality modality_from_string(std::string_view s);

using Shape3 = std::array<int, 3>;
using Spacing3 = std::array<double, 3>;
using Index3 = std::array<int, 3>;

/// Voxel grid geometry: shape in voxels and physical spacing in mm. Voxel
/// storage is x-fastest, then y, then z.
struct Geometry {
  Shape3 shape{1, 1, 1};
  Spacing3 spacing{1.0, 1.0, 1.0};

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(shape[0]) * shape[1] * shape[2];
  }
  std::size_t index(int x, int y, int z) const {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(shape[0]) * (static_cast<std::size_t>(y) +
                                                 static_cast<std::size_t>(shape[1]) * z);
  }
  bool contains(const Index3& v) const {
    return v[0] >= 0 && v[1] >= 0 && v[2] >= 0 && v[0] < shape[0] && v[1] < shape[1] &&
           v[2] < shape[2];
  }
  Index3 coords(std::size_t i) const {
    const auto sx = static_cast<std::size_t>(shape[0]);
    const auto sy = static_cast<std::size_t>(shape[1]);
    return {static_cast<int>(i % sx), static_cast<int>((i / sx) % sy),
            static_cast<int>(i / (sx * sy))};
  }

  friend bool operator==(const Geometry&, const Geometry&) = default;

  /// Throws BadConfig when shape < 1 or spacing <= 0 on any axis.
  void validate() const;
};

struct Volume {
  Geometry geometry;
  Modality modality = Modality::CT;
  std::vector<float> values;
  /// Geometry before resampling; set by preprocessing so predictions can be
  /// restored to the native grid.
  std::optional<Geometry> original;

  Volume() = default;
  Volume(Geometry g, Modality m);
  Volume(Geometry g, Modality m, std::vector<float> v);

  float& at(int x, int y, int z) { return values[geometry.index(x, y, z)]; }
  float at(int x, int y, int z) const { return values[geometry.index(x, y, z)]; }

  /// Throws on shape/spacing violations, length mismatch or non-finite values.
  void validate() const;
};

struct LabelVolume {
  Geometry geometry;
  int num_classes = kDefaultNumClasses;
  std::vector<std::uint8_t> labels;
  std::optional<Geometry> original;

  LabelVolume() = default;
  LabelVolume(Geometry g, int classes);
  LabelVolume(Geometry g, int classes, std::vector<std::uint8_t> l);

  std::uint8_t& at(int x, int y, int z) { return labels[geometry.index(x, y, z)]; }
  std::uint8_t at(int x, int y, int z) const { return labels[geometry.index(x, y, z)]; }

  /// Throws BadLabel when any label >= num_classes.
  void validate() const;
};

}  // namespace vseg

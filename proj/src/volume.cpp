#include "vseg/volume.hpp"

#include <cmath>
#include <string>

#include "vseg/diagnostics.hpp"

namespace vseg {

std::string_view to_string(Modality m) { return m == Modality::CT ? "CT" : "MRI"; }

Modality modality_from_string(std::string_view s) {
  if (s == "CT" || s == "ct") return Modality::CT;
  if (s == "MRI" || s == "mri") return Modality::MRI;
  fail(ErrorCode::BadConfig, "unknown modality '" + std::string(s) + "'");
}

void Geometry::validate() const {
  for (int d = 0; d < 3; ++d) {
    if (shape[d] < 1) fail(ErrorCode::BadConfig, "shape components must be >= 1");
    if (!(spacing[d] > 0.0) || !std::isfinite(spacing[d]))
      fail(ErrorCode::BadConfig, "spacing components must be finite and > 0");
  }
}

Volume::Volume(Geometry g, Modality m) : geometry(g), modality(m), values(g.voxel_count(), 0.0f) {}

Volume::Volume(Geometry g, Modality m, std::vector<float> v)
    : geometry(g), modality(m), values(std::move(v)) {}

void Volume::validate() const {
  geometry.validate();
  if (values.size() != geometry.voxel_count())
    fail(ErrorCode::SizeMismatch, "value count " + std::to_string(values.size()) +
                                      " does not match shape (" +
                                      std::to_string(geometry.voxel_count()) + ")");
  for (float v : values) {
    if (!std::isfinite(v)) fail(ErrorCode::NonFinite, "volume contains a non-finite value");
  }
}

LabelVolume::LabelVolume(Geometry g, int classes)
    : geometry(g), num_classes(classes), labels(g.voxel_count(), 0) {}

LabelVolume::LabelVolume(Geometry g, int classes, std::vector<std::uint8_t> l)
    : geometry(g), num_classes(classes), labels(std::move(l)) {}

void LabelVolume::validate() const {
  geometry.validate();
  if (num_classes < 1 || num_classes > 256)
    fail(ErrorCode::BadConfig, "num_classes must lie in [1, 256]");
  if (labels.size() != geometry.voxel_count())
    fail(ErrorCode::SizeMismatch, "label count does not match shape");
  for (auto l : labels) {
    if (l >= num_classes)
      fail(ErrorCode::BadLabel, "label " + std::to_string(l) + " >= num_classes " +
                                    std::to_string(num_classes));
  }
}

}  // namespace vseg

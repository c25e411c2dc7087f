#pragma once

#include <optional>

#include "vseg/volume.hpp"

namespace vseg {

struct PreprocessConfig {
  Spacing3 target_spacing_mm{1.0, 1.0, 2.0};
  double ct_clip_min = -100.0;
  double ct_clip_max = 250.0;
  /// Rescale the clipped CT window to [0, 1].
  bool ct_rescale = true;
  double mri_std_floor = 1e-8;

  void validate() const;
};

enum class Interpolation { Trilinear, Nearest };

/// Output shape of resampling `g` to `target`: max(1, round(n * s / t)) per axis.
Shape3 resampled_shape(const Geometry& g, const Spacing3& target);

/// Center-aligned resampling: i_old = (i_new + 0.5) * target / spacing - 0.5,
/// clamped to the input grid. Images must use Trilinear, labels Nearest.
Volume resample(const Volume& v, const Spacing3& target, Interpolation mode = Interpolation::Trilinear);
LabelVolume resample(const LabelVolume& v, const Spacing3& target,
                     Interpolation mode = Interpolation::Nearest);

/// Nearest-neighbour resampling onto an explicit grid. The mapping uses the
/// ratio of spacings, so the output shape is exactly `target.shape`.
LabelVolume resample_labels_to(const LabelVolume& v, const Geometry& target);
/// Trilinear counterpart of resample_labels_to.
Volume resample_volume_to(const Volume& v, const Geometry& target);

Volume normalize_ct(const Volume& v, const PreprocessConfig& cfg = {});
Volume normalize_mri(const Volume& v, const PreprocessConfig& cfg = {});

struct PreprocessedCase {
  Volume image;
  std::optional<LabelVolume> labels;
};

/// Resample then normalize by modality. The input geometry is recorded in
/// `image.original` (and `labels->original`).
PreprocessedCase preprocess_case(const Volume& image, const std::optional<LabelVolume>& labels,
                                 const PreprocessConfig& cfg = {});

}  // namespace vseg

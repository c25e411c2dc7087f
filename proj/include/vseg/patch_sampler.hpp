#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "vseg/volume.hpp"

namespace vseg {

/// A training crop. Image and labels are stored x-fastest over `shape`.
struct Patch {
  Shape3 shape{};
  std::vector<float> image;
  std::vector<std::uint8_t> labels;
  std::string case_id;
  Index3 center{};
  bool positive = false;
};

struct SamplerConfig {
  Shape3 patch_shape{128, 128, 64};
  int ratio_positive = 1;
  int ratio_negative = 1;
  /// Half-width of the additive intensity shift on the normalized scale.
  double shift_fraction = 0.05;
  /// Scale intensities by (1 + delta) instead of adding delta.
  bool multiplicative_shift = false;
  std::uint64_t seed = 0;

  void validate() const;
};

using Rng = std::mt19937_64;

/// Crop of `shape` whose voxel `shape / 2` sits on `center`. Voxels outside the
/// volume are padded with image 0.0 and label 0.
Patch extract_patch(const Volume& image, const LabelVolume& labels, const Index3& center, const Shape3& shape);

/// Whether the i-th patch of a sequence is positive. Positives are spread as
/// evenly as the ratio allows and lead the sequence.
bool is_positive_slot(std::size_t i, int ratio_positive, int ratio_negative);

/// n patches, positives centered on uniformly drawn foreground voxels and
/// negatives on uniformly drawn voxels of the whole volume. Deterministic in
/// cfg.seed. Without foreground every patch is drawn as a negative.
std::vector<Patch> sample_patches(const Volume& image, const LabelVolume& labels, std::size_t n,
                                  const SamplerConfig& cfg, const std::string& case_id = {});

/// Applies one shift delta ~ U[-shift_fraction, shift_fraction] to the whole
/// patch image; returns the delta used.
double intensity_shift(Patch& p, Rng& rng, const SamplerConfig& cfg);
void apply_shift(Patch& p, double delta, bool multiplicative = false);

}  // namespace vseg

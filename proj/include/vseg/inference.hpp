#pragma once

#include <optional>
#include <span>
#include <vector>

#include "vseg/network.hpp"
#include "vseg/volume.hpp"

namespace vseg {

struct InferenceConfig {
  double overlap = 0.5;
  /// Gaussian window weighting instead of uniform averaging.
  bool gaussian = false;
  /// Restore the probability map trilinearly before argmax instead of
  /// restoring the argmax labels by nearest neighbour.
  bool restore_probabilities = false;

  void validate() const;
};

/// Per-voxel class probabilities, channel-major, x-fastest within a channel.
struct ProbabilityMap {
  Geometry geometry;
  int channels = 0;
  std::vector<float> values;

  std::size_t voxel_count() const { return geometry.voxel_count(); }
  float at(int c, std::size_t voxel) const { return values[static_cast<std::size_t>(c) * voxel_count() + voxel]; }
  float& at(int c, std::size_t voxel) { return values[static_cast<std::size_t>(c) * voxel_count() + voxel]; }
};

/// Window start offsets along one axis: multiples of round(window * (1 - overlap))
/// plus a final start at dim - window when the last regular window stops short.
/// `dim` must already be >= window.
std::vector<int> window_starts(int dim, int window, double overlap);

/// Window origins for a volume; axes shorter than the window are treated as
/// padded up to the window size.
std::vector<Index3> sliding_windows(const Shape3& volume, const Shape3& window, double overlap = 0.5);

/// Sliding-window softmax probabilities of the main head, blended over
/// overlapping windows. Window results are reduced in window order, so the
/// output does not depend on the number of worker threads.
ProbabilityMap predict_volume(const Model<float>& model, const Volume& volume, const InferenceConfig& cfg = {});

/// Arithmetic mean of per-model probability maps.
ProbabilityMap ensemble_predict(std::span<const Model<float>> models, const Volume& volume,
                                const InferenceConfig& cfg = {});

/// Arithmetic mean of maps with identical geometry and channel count.
ProbabilityMap average_maps(std::span<const ProbabilityMap> maps);

/// Per-voxel argmax; ties resolve to the lowest class index.
LabelVolume labels_from_probs(const ProbabilityMap& p);

/// Nearest-neighbour restoration of predicted labels onto `original`.
/// Throws MissingProvenance when no original geometry is known.
LabelVolume restore_to_original_grid(const LabelVolume& labels, const std::optional<Geometry>& original);

/// Trilinear per-channel restoration of a probability map onto `original`.
ProbabilityMap restore_probabilities(const ProbabilityMap& p, const std::optional<Geometry>& original);

}  // namespace vseg

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vseg/volume.hpp"

namespace vseg {

enum class ModalityMix { CT, MRI, Mixed };

ModalityMix modality_mix_from_string(const std::string& s);
std::string to_string(ModalityMix m);

struct SynthConfig {
  int cases = 4;
  Shape3 shape{32, 32, 16};
  Spacing3 spacing{1.0, 1.0, 2.0};
  int num_classes = 4;
  ModalityMix modality = ModalityMix::CT;
  std::uint64_t seed = 7;
  /// Standard deviation of the additive noise, in raw intensity units.
  double noise = 10.0;

  /// Throws BadArgs.
  void validate() const;
};

struct SynthCase {
  std::string id;
  Volume image;
  LabelVolume labels;
};

/// Case `index` of a synthetic dataset: num_classes - 1 non-overlapping
/// ellipsoid organs, each with its own intensity, inside a body ellipsoid.
/// Every organ covers at least one voxel. CT cases use Hounsfield-like values
/// (air -1000, soft tissue near 0); MRI cases are positive.
SynthCase synth_case(const SynthConfig& cfg, int index);
std::vector<SynthCase> synth_dataset(const SynthConfig& cfg);

std::string synth_case_id(int index);

}  // namespace vseg

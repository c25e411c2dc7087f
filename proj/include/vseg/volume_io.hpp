#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <variant>

#include "vseg/volume.hpp"

namespace vseg {

/// Native on-disk layout: `<base>.vseg.json` header (shape, spacing_mm, dtype,
/// modality, byte_order) next to `<base>.vseg.raw` holding X*Y*Z little-endian
/// elements, x varying fastest. Multi-channel float volumes add "channels": C
/// and store the channels back to back.
struct NativePaths {
  std::filesystem::path header;
  std::filesystem::path raw;
};

/// Accepts either the base path or a path ending in `.vseg.json`/`.vseg.raw`.
NativePaths native_paths(const std::filesystem::path& base);

using AnyVolume = std::variant<Volume, LabelVolume>;

AnyVolume read_native(const std::filesystem::path& base);
Volume read_native_volume(const std::filesystem::path& base);
LabelVolume read_native_labels(const std::filesystem::path& base);

void write_native(const Volume& v, const std::filesystem::path& base);
void write_native(const LabelVolume& v, const std::filesystem::path& base);

/// Multi-channel f32 volume, channel-major. Used for probability map dumps.
struct ChannelVolume {
  Geometry geometry;
  int channels = 1;
  std::vector<float> values;
};
void write_native_channels(const ChannelVolume& v, const std::filesystem::path& base);
ChannelVolume read_native_channels(const std::filesystem::path& base);

/// Minimal NIfTI-1 reader: single-file "n+1", little-endian, uncompressed,
/// datatypes u8 (labels), i16 and f32 (images). Orientation beyond pixdim is
/// ignored. NIfTI carries no modality, so the caller supplies it.
AnyVolume import_nifti(const std::filesystem::path& path, Modality modality = Modality::CT,
                       int num_classes = kDefaultNumClasses);
AnyVolume import_nifti_bytes(std::span<const unsigned char> bytes, Modality modality = Modality::CT,
                             int num_classes = kDefaultNumClasses);

}  // namespace vseg

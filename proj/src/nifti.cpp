#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "vseg/diagnostics.hpp"
#include "vseg/volume_io.hpp"

namespace vseg {

namespace {

// NIfTI-1 header field offsets (bytes).
constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffMagic = 344;

constexpr std::int16_t kDtUint8 = 2;
constexpr std::int16_t kDtInt16 = 4;
constexpr std::int16_t kDtFloat32 = 16;

// Reads a little-endian scalar independent of host byte order.
template <typename T>
T load_le(std::span<const unsigned char> bytes, std::size_t offset) {
  std::uint64_t raw = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) raw |= static_cast<std::uint64_t>(bytes[offset + i]) << (8 * i);
  T out;
  if constexpr (sizeof(T) == 2) {
    auto r = static_cast<std::uint16_t>(raw);
    std::memcpy(&out, &r, sizeof(T));
  } else {
    auto r = static_cast<std::uint32_t>(raw);
    std::memcpy(&out, &r, sizeof(T));
  }
  return out;
}

template <typename T>
T load_be(std::span<const unsigned char> bytes, std::size_t offset) {
  std::uint32_t raw = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) raw = (raw << 8) | bytes[offset + i];
  T out;
  std::memcpy(&out, &raw, sizeof(T));
  return out;
}

}  // namespace

AnyVolume import_nifti_bytes(std::span<const unsigned char> bytes, Modality modality, int num_classes) {
  if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b)
    fail(ErrorCode::NotNifti, "gzip-compressed input is not supported; decompress first");
  if (bytes.size() < kHeaderSize) fail(ErrorCode::Truncated, "file shorter than the 348-byte header");

  const auto sizeof_hdr = load_le<std::int32_t>(bytes, 0);
  if (sizeof_hdr != 348) {
    if (load_be<std::int32_t>(bytes, 0) == 348)
      fail(ErrorCode::UnsupportedEndianness, "big-endian NIfTI files are not supported");
    fail(ErrorCode::NotNifti, "sizeof_hdr is " + std::to_string(sizeof_hdr) + ", expected 348");
  }
  if (std::memcmp(bytes.data() + kOffMagic, "n+1\0", 4) != 0)
    fail(ErrorCode::NotNifti, "magic is not \"n+1\" (only single-file NIfTI-1 is supported)");

  std::array<std::int16_t, 8> dim{};
  for (std::size_t i = 0; i < 8; ++i) dim[i] = load_le<std::int16_t>(bytes, kOffDim + 2 * i);
  if (dim[0] < 1 || dim[0] > 7) fail(ErrorCode::NotNifti, "dim[0] out of range");
  Geometry g;
  for (int d = 0; d < 3; ++d) {
    const int n = (d + 1 <= dim[0]) ? dim[d + 1] : 1;
    if (n < 1) fail(ErrorCode::UnsupportedLayout, "non-positive spatial dimension");
    g.shape[d] = n;
  }
  for (int d = 4; d <= dim[0]; ++d) {
    if (dim[d] > 1) fail(ErrorCode::UnsupportedLayout, "only 3D volumes are supported");
  }
  for (int d = 0; d < 3; ++d) {
    const float p = load_le<float>(bytes, kOffPixdim + 4 * (d + 1));
    // pixdim of 0 in unused axes is common; treat as unit spacing.
    g.spacing[d] = (d + 1 <= dim[0] && std::isfinite(p) && p != 0.0f) ? std::fabs(static_cast<double>(p)) : 1.0;
  }

  const auto datatype = load_le<std::int16_t>(bytes, kOffDatatype);
  std::size_t elem = 0;
  switch (datatype) {
    case kDtUint8: elem = 1; break;
    case kDtInt16: elem = 2; break;
    case kDtFloat32: elem = 4; break;
    default: fail(ErrorCode::UnsupportedDatatype, "datatype " + std::to_string(datatype));
  }

  const float vox_offset_f = load_le<float>(bytes, kOffVoxOffset);
  if (!std::isfinite(vox_offset_f) || vox_offset_f < 0.0f) fail(ErrorCode::NotNifti, "invalid vox_offset");
  // Single-file NIfTI stores voxels no earlier than byte 352.
  const auto vox_offset = std::max<std::size_t>(static_cast<std::size_t>(vox_offset_f), kHeaderSize);
  const std::size_t count = g.voxel_count();
  if (bytes.size() < vox_offset + count * elem)
    fail(ErrorCode::Truncated, "voxel data needs " + std::to_string(vox_offset + count * elem) +
                                   " bytes, file has " + std::to_string(bytes.size()));

  if (datatype == kDtUint8) {
    LabelVolume labels(g, num_classes);
    std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(vox_offset), count, labels.labels.begin());
    labels.validate();
    return labels;
  }

  float slope = load_le<float>(bytes, kOffSclSlope);
  float inter = load_le<float>(bytes, kOffSclInter);
  if (slope == 0.0f || !std::isfinite(slope)) {
    slope = 1.0f;
    inter = 0.0f;
  }
  if (!std::isfinite(inter)) inter = 0.0f;
  const bool scaled = !(slope == 1.0f && inter == 0.0f);

  Volume v(g, modality);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t off = vox_offset + i * elem;
    float x = (datatype == kDtInt16) ? static_cast<float>(load_le<std::int16_t>(bytes, off))
                                     : load_le<float>(bytes, off);
    if (scaled) x = x * slope + inter;
    v.values[i] = x;
  }
  v.validate();
  return v;
}

AnyVolume import_nifti(const std::filesystem::path& path, Modality modality, int num_classes) {
  if (!std::filesystem::exists(path)) fail(ErrorCode::MissingFile, path.string());
  std::ifstream in(path, std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorCode::IoFailure, "cannot read " + path.string());
  try {
    return import_nifti_bytes(bytes, modality, num_classes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace vseg

#include "vseg/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <string>

#include "vseg/diagnostics.hpp"

namespace vseg {

namespace {

// Per-axis sample positions in the source grid for each destination index.
std::vector<double> source_positions(int n_new, int n_old, double scale) {
  std::vector<double> pos(static_cast<std::size_t>(n_new));
  for (int i = 0; i < n_new; ++i) {
    const double p = (i + 0.5) * scale - 0.5;
    pos[static_cast<std::size_t>(i)] = std::clamp(p, 0.0, static_cast<double>(n_old - 1));
  }
  return pos;
}

struct LinearTap {
  int i0;
  int i1;
  double w1;
};

std::vector<LinearTap> linear_taps(const std::vector<double>& pos, int n_old) {
  std::vector<LinearTap> taps;
  taps.reserve(pos.size());
  for (double p : pos) {
    const int i0 = static_cast<int>(std::floor(p));
    const int i1 = std::min(i0 + 1, n_old - 1);
    taps.push_back({i0, i1, p - i0});
  }
  return taps;
}

std::vector<int> nearest_taps(const std::vector<double>& pos, int n_old) {
  std::vector<int> idx;
  idx.reserve(pos.size());
  for (double p : pos) idx.push_back(std::clamp(static_cast<int>(std::floor(p + 0.5)), 0, n_old - 1));
  return idx;
}

template <typename VolumeT>
void check_target(const VolumeT& v, const Spacing3& target) {
  v.geometry.validate();
  for (double t : target) {
    if (!(t > 0.0) || !std::isfinite(t)) fail(ErrorCode::BadConfig, "target spacing must be > 0");
  }
}

template <typename Elem>
std::vector<Elem> nearest_resample(const Geometry& src, std::span<const Elem> data, const Geometry& dst,
                                   const std::array<std::vector<int>, 3>& idx) {
  std::vector<Elem> out(dst.voxel_count());
#pragma omp parallel for schedule(static)
  for (int z = 0; z < dst.shape[2]; ++z) {
    for (int y = 0; y < dst.shape[1]; ++y) {
      for (int x = 0; x < dst.shape[0]; ++x) {
        out[dst.index(x, y, z)] = data[src.index(idx[0][x], idx[1][y], idx[2][z])];
      }
    }
  }
  return out;
}

}  // namespace

void PreprocessConfig::validate() const {
  for (double t : target_spacing_mm) {
    if (!(t > 0.0)) fail(ErrorCode::BadConfig, "target_spacing_mm must be > 0");
  }
  if (!(ct_clip_min < ct_clip_max)) fail(ErrorCode::BadConfig, "ct_clip_min must be < ct_clip_max");
  if (!(mri_std_floor > 0.0)) fail(ErrorCode::BadConfig, "mri_std_floor must be > 0");
}

Shape3 resampled_shape(const Geometry& g, const Spacing3& target) {
  Shape3 out{};
  for (int d = 0; d < 3; ++d) {
    const auto n = static_cast<long>(std::lround(g.shape[d] * g.spacing[d] / target[d]));
    if (n < 1) {
      warn("DegenerateShape: axis " + std::to_string(d) + " resamples to " + std::to_string(n) +
           " voxels; clamped to 1");
    }
    out[d] = static_cast<int>(std::max(1L, n));
  }
  return out;
}

namespace {

Volume trilinear_resample(const Volume& v, const Geometry& dst, const Spacing3& scale) {
  std::array<std::vector<LinearTap>, 3> taps;
  for (int d = 0; d < 3; ++d) {
    taps[d] = linear_taps(source_positions(dst.shape[d], v.geometry.shape[d], scale[d]), v.geometry.shape[d]);
  }
  Volume out(dst, v.modality);
  out.original = v.original;
  const Geometry& src = v.geometry;
#pragma omp parallel for schedule(static)
  for (int z = 0; z < dst.shape[2]; ++z) {
    const LinearTap tz = taps[2][z];
    for (int y = 0; y < dst.shape[1]; ++y) {
      const LinearTap ty = taps[1][y];
      for (int x = 0; x < dst.shape[0]; ++x) {
        const LinearTap tx = taps[0][x];
        auto lerp_x = [&](int yy, int zz) {
          const double a = v.values[src.index(tx.i0, yy, zz)];
          const double b = v.values[src.index(tx.i1, yy, zz)];
          return tx.w1 == 0.0 ? a : a + (b - a) * tx.w1;
        };
        auto lerp_xy = [&](int zz) {
          const double a = lerp_x(ty.i0, zz);
          if (ty.w1 == 0.0) return a;
          return a + (lerp_x(ty.i1, zz) - a) * ty.w1;
        };
        double val = lerp_xy(tz.i0);
        if (tz.w1 != 0.0) val += (lerp_xy(tz.i1) - val) * tz.w1;
        out.values[dst.index(x, y, z)] = static_cast<float>(val);
      }
    }
  }
  return out;
}

}  // namespace

Volume resample(const Volume& v, const Spacing3& target, Interpolation mode) {
  check_target(v, target);
  if (mode != Interpolation::Trilinear) fail(ErrorCode::BadMode, "image volumes are resampled trilinearly");
  const Geometry dst{resampled_shape(v.geometry, target), target};
  Spacing3 scale{};
  for (int d = 0; d < 3; ++d) scale[d] = target[d] / v.geometry.spacing[d];
  return trilinear_resample(v, dst, scale);
}

Volume resample_volume_to(const Volume& v, const Geometry& target) {
  v.geometry.validate();
  target.validate();
  Spacing3 scale{};
  for (int d = 0; d < 3; ++d) scale[d] = target.spacing[d] / v.geometry.spacing[d];
  return trilinear_resample(v, target, scale);
}

LabelVolume resample(const LabelVolume& v, const Spacing3& target, Interpolation mode) {
  check_target(v, target);
  if (mode != Interpolation::Nearest) fail(ErrorCode::BadMode, "label volumes are resampled by nearest neighbour");
  Geometry dst{resampled_shape(v.geometry, target), target};
  std::array<std::vector<int>, 3> idx;
  for (int d = 0; d < 3; ++d) {
    idx[d] = nearest_taps(source_positions(dst.shape[d], v.geometry.shape[d], target[d] / v.geometry.spacing[d]),
                          v.geometry.shape[d]);
  }
  LabelVolume out(dst, v.num_classes,
                  nearest_resample<std::uint8_t>(v.geometry, v.labels, dst, idx));
  out.original = v.original;
  return out;
}

LabelVolume resample_labels_to(const LabelVolume& v, const Geometry& target) {
  v.geometry.validate();
  target.validate();
  std::array<std::vector<int>, 3> idx;
  for (int d = 0; d < 3; ++d) {
    idx[d] = nearest_taps(
        source_positions(target.shape[d], v.geometry.shape[d], target.spacing[d] / v.geometry.spacing[d]),
        v.geometry.shape[d]);
  }
  return LabelVolume(target, v.num_classes, nearest_resample<std::uint8_t>(v.geometry, v.labels, target, idx));
}

Volume normalize_ct(const Volume& v, const PreprocessConfig& cfg) {
  if (v.modality != Modality::CT) fail(ErrorCode::WrongModality, "normalize_ct requires a CT volume");
  cfg.validate();
  Volume out = v;
  const double lo = cfg.ct_clip_min;
  const double hi = cfg.ct_clip_max;
  const double width = hi - lo;
  for (auto& x : out.values) {
    const double c = std::clamp(static_cast<double>(x), lo, hi);
    x = static_cast<float>(cfg.ct_rescale ? (c - lo) / width : c);
  }
  return out;
}

Volume normalize_mri(const Volume& v, const PreprocessConfig& cfg) {
  if (v.modality != Modality::MRI) fail(ErrorCode::WrongModality, "normalize_mri requires an MRI volume");
  cfg.validate();
  Volume out = v;
  const auto n = static_cast<double>(v.values.size());
  double mean = 0.0;
  for (float x : v.values) mean += x;
  mean /= n;
  double ss = 0.0;
  for (float x : v.values) ss += (x - mean) * (x - mean);
  const double stddev = std::sqrt(ss / n);
  if (stddev < cfg.mri_std_floor) {
    warn("normalize_mri: standard deviation below floor; output set to zero");
    std::fill(out.values.begin(), out.values.end(), 0.0f);
    return out;
  }
  for (auto& x : out.values) x = static_cast<float>((x - mean) / stddev);
  return out;
}

PreprocessedCase preprocess_case(const Volume& image, const std::optional<LabelVolume>& labels,
                                 const PreprocessConfig& cfg) {
  cfg.validate();
  image.validate();
  if (labels && labels->geometry != image.geometry)
    fail(ErrorCode::GeometryMismatch, "image and label geometry differ");

  PreprocessedCase out;
  Volume resampled = resample(image, cfg.target_spacing_mm, Interpolation::Trilinear);
  out.image = image.modality == Modality::CT ? normalize_ct(resampled, cfg) : normalize_mri(resampled, cfg);
  out.image.original = image.geometry;
  if (labels) {
    out.labels = resample(*labels, cfg.target_spacing_mm, Interpolation::Nearest);
    out.labels->original = labels->geometry;
  }
  return out;
}

}  // namespace vseg

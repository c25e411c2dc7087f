#include "vseg/patch_sampler.hpp"

#include "vseg/diagnostics.hpp"

namespace vseg {

void SamplerConfig::validate() const {
  for (int s : patch_shape) {
    if (s < 1) fail(ErrorCode::BadConfig, "patch_shape components must be >= 1");
  }
  if (ratio_positive < 0 || ratio_negative < 0 || ratio_positive + ratio_negative == 0)
    fail(ErrorCode::BadConfig, "sampling ratio components must be >= 0 and not both 0");
  if (!(shift_fraction >= 0.0)) fail(ErrorCode::BadConfig, "shift_fraction must be >= 0");
}

Patch extract_patch(const Volume& image, const LabelVolume& labels, const Index3& center, const Shape3& shape) {
  if (image.geometry.shape != labels.geometry.shape)
    fail(ErrorCode::GeometryMismatch, "image and label shapes differ");
  if (!image.geometry.contains(center)) fail(ErrorCode::CenterOutOfBounds, "patch center outside the volume");
  for (int s : shape) {
    if (s < 1) fail(ErrorCode::BadConfig, "patch shape components must be >= 1");
  }
  Patch p;
  p.shape = shape;
  p.center = center;
  const std::size_t n = static_cast<std::size_t>(shape[0]) * shape[1] * shape[2];
  p.image.assign(n, 0.0f);
  p.labels.assign(n, 0);
  const Geometry& g = image.geometry;
  const Index3 start{center[0] - shape[0] / 2, center[1] - shape[1] / 2, center[2] - shape[2] / 2};
  std::size_t i = 0;
  for (int z = 0; z < shape[2]; ++z) {
    const int vz = start[2] + z;
    for (int y = 0; y < shape[1]; ++y) {
      const int vy = start[1] + y;
      for (int x = 0; x < shape[0]; ++x, ++i) {
        const int vx = start[0] + x;
        if (vx < 0 || vy < 0 || vz < 0 || vx >= g.shape[0] || vy >= g.shape[1] || vz >= g.shape[2]) continue;
        const auto src = g.index(vx, vy, vz);
        p.image[i] = image.values[src];
        p.labels[i] = labels.labels[src];
      }
    }
  }
  return p;
}

bool is_positive_slot(std::size_t i, int ratio_positive, int ratio_negative) {
  const auto total = static_cast<std::size_t>(ratio_positive + ratio_negative);
  const auto pos = static_cast<std::size_t>(ratio_positive);
  // Number of positives among the first k slots is ceil(k * pos / total).
  auto positives_before = [&](std::size_t k) { return (k * pos + total - 1) / total; };
  return positives_before(i + 1) > positives_before(i);
}

std::vector<Patch> sample_patches(const Volume& image, const LabelVolume& labels, std::size_t n,
                                  const SamplerConfig& cfg, const std::string& case_id) {
  cfg.validate();
  if (image.geometry != labels.geometry) fail(ErrorCode::GeometryMismatch, "image and label geometry differ");

  std::vector<std::size_t> foreground;
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    if (labels.labels[i] > 0) foreground.push_back(i);
  }
  const bool any_positive_slot = n > 0 && cfg.ratio_positive > 0;
  if (foreground.empty() && any_positive_slot)
    warn("sample_patches: case '" + case_id + "' has no foreground; all patches drawn as negatives");

  Rng rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> any_voxel(0, image.geometry.voxel_count() - 1);
  std::vector<Patch> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool positive = !foreground.empty() && is_positive_slot(i, cfg.ratio_positive, cfg.ratio_negative);
    std::size_t voxel = 0;
    if (positive) {
      std::uniform_int_distribution<std::size_t> pick(0, foreground.size() - 1);
      voxel = foreground[pick(rng)];
    } else {
      voxel = any_voxel(rng);
    }
    Patch p = extract_patch(image, labels, image.geometry.coords(voxel), cfg.patch_shape);
    p.case_id = case_id;
    p.positive = positive;
    out.push_back(std::move(p));
  }
  return out;
}

void apply_shift(Patch& p, double delta, bool multiplicative) {
  if (delta == 0.0) return;
  for (auto& v : p.image) {
    v = static_cast<float>(multiplicative ? v * (1.0 + delta) : v + delta);
  }
}

double intensity_shift(Patch& p, Rng& rng, const SamplerConfig& cfg) {
  std::uniform_real_distribution<double> dist(-cfg.shift_fraction, cfg.shift_fraction);
  const double delta = cfg.shift_fraction > 0.0 ? dist(rng) : 0.0;
  apply_shift(p, delta, cfg.multiplicative_shift);
  return delta;
}

}  // namespace vseg

#include "vseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "vseg/diagnostics.hpp"
#include "vseg/seed.hpp"

namespace vseg {

namespace {

struct Ellipsoid {
  std::array<double, 3> center;  // mm
  std::array<double, 3> radii;   // mm

  bool contains(const Geometry& g, int x, int y, int z) const {
    const double p[3] = {(x + 0.5) * g.spacing[0], (y + 0.5) * g.spacing[1], (z + 0.5) * g.spacing[2]};
    double r = 0.0;
    for (int d = 0; d < 3; ++d) {
      const double t = (p[d] - center[d]) / radii[d];
      r += t * t;
    }
    return r <= 1.0;
  }
};

// Voxels of `e`, or empty when any of them is outside `allowed`.
std::vector<std::size_t> rasterize(const Geometry& g, const Ellipsoid& e, const std::vector<std::uint8_t>& allowed) {
  std::vector<std::size_t> out;
  for (int z = 0; z < g.shape[2]; ++z)
    for (int y = 0; y < g.shape[1]; ++y)
      for (int x = 0; x < g.shape[0]; ++x) {
        if (!e.contains(g, x, y, z)) continue;
        const auto i = g.index(x, y, z);
        if (!allowed[i]) return {};
        out.push_back(i);
      }
  return out;
}

// Marks `voxels` and their 6-neighbours as no longer available.
void block(const Geometry& g, const std::vector<std::size_t>& voxels, std::vector<std::uint8_t>& allowed) {
  for (auto i : voxels) {
    const Index3 p = g.coords(i);
    allowed[i] = 0;
    for (int d = 0; d < 3; ++d)
      for (int s : {-1, 1}) {
        Index3 q = p;
        q[d] += s;
        if (g.contains(q)) allowed[g.index(q[0], q[1], q[2])] = 0;
      }
  }
}

double organ_intensity(Modality m, int k, int num_classes) {
  const double t = num_classes > 2 ? static_cast<double>(k - 1) / (num_classes - 2) : 0.0;
  return m == Modality::CT ? 20.0 + 220.0 * t : 200.0 + 400.0 * t;
}

}  // namespace

ModalityMix modality_mix_from_string(const std::string& s) {
  if (s == "CT") return ModalityMix::CT;
  if (s == "MRI") return ModalityMix::MRI;
  if (s == "mixed") return ModalityMix::Mixed;
  fail(ErrorCode::BadArgs, "modality mix must be CT, MRI or mixed, got '" + s + "'");
}

std::string to_string(ModalityMix m) {
  switch (m) {
    case ModalityMix::CT: return "CT";
    case ModalityMix::MRI: return "MRI";
    case ModalityMix::Mixed: return "mixed";
  }
  return "CT";
}

void SynthConfig::validate() const {
  if (cases < 1) fail(ErrorCode::BadArgs, "synth needs at least one case");
  for (int d = 0; d < 3; ++d) {
    if (shape[d] < 4) fail(ErrorCode::BadArgs, "synthetic shape components must be >= 4");
    if (!(spacing[d] > 0.0)) fail(ErrorCode::BadArgs, "synthetic spacing must be > 0");
  }
  if (num_classes < 2 || num_classes > 255) fail(ErrorCode::BadArgs, "num_classes must lie in [2, 255]");
  if (!(noise >= 0.0)) fail(ErrorCode::BadArgs, "noise must be >= 0");
}

std::string synth_case_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "case_%03d", index);
  return buf;
}

SynthCase synth_case(const SynthConfig& cfg, int index) {
  cfg.validate();
  std::mt19937_64 rng(derive_seed(cfg.seed, {static_cast<std::uint64_t>(index)}));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Geometry g{cfg.shape, cfg.spacing};
  const Modality modality = cfg.modality == ModalityMix::Mixed ? (index % 2 == 0 ? Modality::CT : Modality::MRI)
                            : cfg.modality == ModalityMix::CT  ? Modality::CT
                                                               : Modality::MRI;

  std::array<double, 3> extent{};
  for (int d = 0; d < 3; ++d) extent[d] = g.shape[d] * g.spacing[d];
  const Ellipsoid body{{extent[0] / 2, extent[1] / 2, extent[2] / 2},
                       {extent[0] * 0.46, extent[1] * 0.46, extent[2] * 0.46}};

  std::vector<std::uint8_t> inside(g.voxel_count(), 0);
  for (int z = 0; z < g.shape[2]; ++z)
    for (int y = 0; y < g.shape[1]; ++y)
      for (int x = 0; x < g.shape[0]; ++x) inside[g.index(x, y, z)] = body.contains(g, x, y, z);

  LabelVolume labels(g, cfg.num_classes);
  std::vector<std::uint8_t> allowed = inside;
  const int organs = cfg.num_classes - 1;
  const double scale = 1.0 / std::cbrt(static_cast<double>(organs));
  for (int k = 1; k <= organs; ++k) {
    std::vector<std::size_t> voxels;
    for (int attempt = 0; attempt < 200 && voxels.empty(); ++attempt) {
      const double shrink = 1.0 - 0.8 * attempt / 200.0;
      Ellipsoid e{};
      for (int d = 0; d < 3; ++d) {
        const double r_max = std::max(extent[d] * 0.22 * scale * shrink, g.spacing[d] * 0.75);
        e.radii[d] = r_max * (0.6 + 0.4 * unit(rng));
        e.center[d] = body.center[d] + (2.0 * unit(rng) - 1.0) * body.radii[d] * 0.7;
      }
      voxels = rasterize(g, e, allowed);
    }
    if (voxels.empty()) {
      // Fall back to a single free voxel so every class is present.
      std::vector<std::size_t> free;
      for (std::size_t i = 0; i < allowed.size(); ++i)
        if (allowed[i]) free.push_back(i);
      if (free.empty()) {
        for (std::size_t i = 0; i < labels.labels.size(); ++i)
          if (inside[i] && labels.labels[i] == 0) free.push_back(i);
      }
      if (free.empty()) fail(ErrorCode::BadArgs, "volume too small to place " + std::to_string(organs) + " organs");
      std::uniform_int_distribution<std::size_t> pick(0, free.size() - 1);
      voxels = {free[pick(rng)]};
    }
    for (auto i : voxels) labels.labels[i] = static_cast<std::uint8_t>(k);
    block(g, voxels, allowed);
  }

  Volume image(g, modality);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double air = modality == Modality::CT ? -1000.0 : 5.0;
  const double tissue = modality == Modality::CT ? -60.0 : 100.0;
  for (std::size_t i = 0; i < image.values.size(); ++i) {
    double v = inside[i] ? tissue : air;
    if (labels.labels[i] > 0) v = organ_intensity(modality, labels.labels[i], cfg.num_classes);
    v += cfg.noise * noise(rng);
    if (modality == Modality::MRI) v = std::max(v, 1.0);
    image.values[i] = static_cast<float>(v);
  }
  return {synth_case_id(index), std::move(image), std::move(labels)};
}

std::vector<SynthCase> synth_dataset(const SynthConfig& cfg) {
  std::vector<SynthCase> out;
  for (int i = 0; i < cfg.cases; ++i) out.push_back(synth_case(cfg, i));
  return out;
}

}  // namespace vseg

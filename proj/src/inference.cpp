#include "vseg/inference.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>

#include "vseg/diagnostics.hpp"
#include "vseg/layout.hpp"
#include "vseg/preprocess.hpp"

namespace vseg {

void InferenceConfig::validate() const {
  if (!(overlap >= 0.0 && overlap < 1.0)) fail(ErrorCode::BadConfig, "overlap must lie in [0, 1)");
}

std::vector<int> window_starts(int dim, int window, double overlap) {
  if (window < 1 || dim < window) fail(ErrorCode::BadConfig, "window must fit the (padded) axis");
  const int stride = std::max(1, static_cast<int>(std::lround(window * (1.0 - overlap))));
  std::vector<int> starts;
  for (int s = 0; s + window <= dim; s += stride) starts.push_back(s);
  if (starts.back() + window < dim) starts.push_back(dim - window);
  return starts;
}

std::vector<Index3> sliding_windows(const Shape3& volume, const Shape3& window, double overlap) {
  std::array<std::vector<int>, 3> axes;
  for (int d = 0; d < 3; ++d) axes[d] = window_starts(std::max(volume[d], window[d]), window[d], overlap);
  std::vector<Index3> out;
  for (int z : axes[2])
    for (int y : axes[1])
      for (int x : axes[0]) out.push_back({x, y, z});
  return out;
}

namespace {

std::vector<double> window_weights(const Shape3& w, bool gaussian) {
  const std::size_t n = static_cast<std::size_t>(w[0]) * w[1] * w[2];
  std::vector<double> out(n, 1.0);
  if (!gaussian) return out;
  std::array<std::vector<double>, 3> axis;
  for (int d = 0; d < 3; ++d) {
    const double sigma = std::max(w[d] / 8.0, 0.5);
    const double mid = w[d] / 2.0;
    for (int i = 0; i < w[d]; ++i) {
      const double t = (i + 0.5 - mid) / sigma;
      axis[d].push_back(std::exp(-0.5 * t * t));
    }
  }
  std::size_t i = 0;
  for (int z = 0; z < w[2]; ++z)
    for (int y = 0; y < w[1]; ++y)
      for (int x = 0; x < w[0]; ++x, ++i) out[i] = axis[0][x] * axis[1][y] * axis[2][z];
  return out;
}

}  // namespace

ProbabilityMap predict_volume(const Model<float>& model, const Volume& volume, const InferenceConfig& cfg) {
  cfg.validate();
  volume.validate();
  const ModelConfig& mc = model.config();
  if (mc.in_channels != 1) fail(ErrorCode::ModelShapeMismatch, "model expects " + std::to_string(mc.in_channels) +
                                                                   " input channels, volumes have 1");
  const Shape3 win = mc.patch_shape;
  const Shape3 vs = volume.geometry.shape;
  const Geometry padded{{std::max(vs[0], win[0]), std::max(vs[1], win[1]), std::max(vs[2], win[2])},
                        volume.geometry.spacing};
  const auto C = static_cast<std::size_t>(mc.num_classes);
  const std::size_t PV = padded.voxel_count();
  const std::size_t WV = static_cast<std::size_t>(win[0]) * win[1] * win[2];

  std::vector<float> source(PV, 0.0f);
  for (int z = 0; z < vs[2]; ++z)
    for (int y = 0; y < vs[1]; ++y)
      for (int x = 0; x < vs[0]; ++x) source[padded.index(x, y, z)] = volume.at(x, y, z);

  const auto windows = sliding_windows(vs, win, cfg.overlap);
  const auto weights = window_weights(win, cfg.gaussian);
  std::vector<double> acc(C * PV, 0.0);
  std::vector<double> norm(PV, 0.0);

  const std::size_t chunk = static_cast<std::size_t>(std::max(1, omp_get_max_threads())) * 2;
  std::vector<std::vector<float>> probs(chunk);
  for (std::size_t first = 0; first < windows.size(); first += chunk) {
    const std::size_t count = std::min(chunk, windows.size() - first);
    std::string error;
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t k = 0; k < static_cast<std::int64_t>(count); ++k) {
      try {
        ad::NoGradGuard no_grad;
        const Index3 o = windows[first + static_cast<std::size_t>(k)];
        std::vector<float> crop(WV);
        std::size_t i = 0;
        for (int z = 0; z < win[2]; ++z)
          for (int y = 0; y < win[1]; ++y)
            for (int x = 0; x < win[0]; ++x, ++i) crop[i] = source[padded.index(o[0] + x, o[1] + y, o[2] + z)];
        std::vector<float> input(WV);
        volume_to_tensor_order<float, float>(crop, win, input.data());
        auto batch = ad::Tensor<float>::from(
            {1, 1, static_cast<std::size_t>(win[0]), static_cast<std::size_t>(win[1]), static_cast<std::size_t>(win[2])},
            std::move(input));
        const auto logits = model.forward(batch, false)[0];
        const auto p = ad::softmax_channels(logits);
        auto& out = probs[static_cast<std::size_t>(k)];
        out.resize(C * WV);
        for (std::size_t c = 0; c < C; ++c)
          tensor_to_volume_order<float, float>(p.values().data() + c * WV, win, std::span<float>(out.data() + c * WV, WV));
      } catch (const std::exception& e) {
#pragma omp critical
        error = e.what();
      }
    }
    if (!error.empty()) fail(ErrorCode::NonFinite, "window inference failed: " + error);
    // Ordered reduction over this chunk's windows.
    for (std::size_t k = 0; k < count; ++k) {
      const Index3 o = windows[first + k];
      const auto& p = probs[k];
      std::size_t i = 0;
      for (int z = 0; z < win[2]; ++z)
        for (int y = 0; y < win[1]; ++y)
          for (int x = 0; x < win[0]; ++x, ++i) {
            const std::size_t dst = padded.index(o[0] + x, o[1] + y, o[2] + z);
            norm[dst] += weights[i];
            for (std::size_t c = 0; c < C; ++c) acc[c * PV + dst] += weights[i] * p[c * WV + i];
          }
    }
  }

  ProbabilityMap out;
  out.geometry = volume.geometry;
  out.channels = mc.num_classes;
  const std::size_t V = volume.geometry.voxel_count();
  out.values.resize(C * V);
  for (int z = 0; z < vs[2]; ++z)
    for (int y = 0; y < vs[1]; ++y)
      for (int x = 0; x < vs[0]; ++x) {
        const std::size_t src = padded.index(x, y, z);
        const std::size_t dst = volume.geometry.index(x, y, z);
        for (std::size_t c = 0; c < C; ++c) out.values[c * V + dst] = static_cast<float>(acc[c * PV + src] / norm[src]);
      }
  return out;
}

ProbabilityMap average_maps(std::span<const ProbabilityMap> maps) {
  if (maps.empty()) fail(ErrorCode::ConfigMismatch, "cannot average an empty set of probability maps");
  const ProbabilityMap& first = maps.front();
  for (const auto& m : maps) {
    if (m.channels != first.channels)
      fail(ErrorCode::ConfigMismatch, "probability maps disagree on class count (" + std::to_string(m.channels) +
                                          " vs " + std::to_string(first.channels) + ")");
    if (m.geometry != first.geometry) fail(ErrorCode::GeometryMismatch, "probability maps disagree on geometry");
  }
  ProbabilityMap out;
  out.geometry = first.geometry;
  out.channels = first.channels;
  out.values.resize(first.values.size());
  const double k = static_cast<double>(maps.size());
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    double s = 0.0;
    for (const auto& m : maps) s += m.values[i];
    out.values[i] = static_cast<float>(s / k);
  }
  return out;
}

ProbabilityMap ensemble_predict(std::span<const Model<float>> models, const Volume& volume,
                                const InferenceConfig& cfg) {
  if (models.empty()) fail(ErrorCode::ConfigMismatch, "ensemble needs at least one model");
  for (const auto& m : models) {
    if (m.config().num_classes != models.front().config().num_classes)
      fail(ErrorCode::ConfigMismatch, "ensemble members disagree on num_classes");
  }
  std::vector<ProbabilityMap> maps;
  maps.reserve(models.size());
  for (const auto& m : models) maps.push_back(predict_volume(m, volume, cfg));
  return average_maps(maps);
}

LabelVolume labels_from_probs(const ProbabilityMap& p) {
  LabelVolume out(p.geometry, p.channels);
  const std::size_t V = p.voxel_count();
  for (std::size_t v = 0; v < V; ++v) {
    int best = 0;
    float best_p = p.at(0, v);
    for (int c = 1; c < p.channels; ++c) {
      if (p.at(c, v) > best_p) {
        best_p = p.at(c, v);
        best = c;
      }
    }
    out.labels[v] = static_cast<std::uint8_t>(best);
  }
  return out;
}

LabelVolume restore_to_original_grid(const LabelVolume& labels, const std::optional<Geometry>& original) {
  if (!original) fail(ErrorCode::MissingProvenance, "no original geometry recorded for restoration");
  LabelVolume out = resample_labels_to(labels, *original);
  return out;
}

ProbabilityMap restore_probabilities(const ProbabilityMap& p, const std::optional<Geometry>& original) {
  if (!original) fail(ErrorCode::MissingProvenance, "no original geometry recorded for restoration");
  ProbabilityMap out;
  out.geometry = *original;
  out.channels = p.channels;
  const std::size_t V = p.voxel_count();
  const std::size_t OV = original->voxel_count();
  out.values.resize(static_cast<std::size_t>(p.channels) * OV);
  for (int c = 0; c < p.channels; ++c) {
    const auto cu = static_cast<std::size_t>(c);
    Volume channel(p.geometry, Modality::CT,
                   std::vector<float>(p.values.begin() + static_cast<std::ptrdiff_t>(cu * V),
                                      p.values.begin() + static_cast<std::ptrdiff_t>((cu + 1) * V)));
    const Volume r = resample_volume_to(channel, *original);
    std::copy(r.values.begin(), r.values.end(), out.values.begin() + static_cast<std::ptrdiff_t>(cu * OV));
  }
  return out;
}

}  // namespace vseg

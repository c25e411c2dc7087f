#pragma once

// Shared test helpers: finite-difference checker, fixtures and brute-force
// metric oracles written independently of the library code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "vseg/ops.hpp"
#include "vseg/volume.hpp"

namespace testing {

using vseg::ad::Shape;
using vseg::ad::Tensor;

inline Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, bool requires_grad = true, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  std::vector<double> v(vseg::ad::numel(shape));
  for (auto& x : v) x = n(rng);
  return Tensor<double>::from(std::move(shape), std::move(v), requires_grad);
}

inline Tensor<float> random_tensor_f(Shape shape, std::mt19937_64& rng, bool requires_grad = true) {
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::vector<float> v(vseg::ad::numel(shape));
  for (auto& x : v) x = n(rng);
  return Tensor<float>::from(std::move(shape), std::move(v), requires_grad);
}

/// Normwise relative error max|analytic - numeric| / max|numeric| of the
/// gradient of `loss(inputs)` with respect to every input that requires grad.
/// Central differences with step h. Only `probe` elements per input are
/// checked when probe > 0 (chosen with `rng`).
inline double gradient_error(std::vector<Tensor<double>> inputs,
                             const std::function<Tensor<double>(const std::vector<Tensor<double>>&)>& loss,
                             std::mt19937_64& rng, double h = 1e-6, std::size_t probe = 0) {
  for (auto& t : inputs) t.zero_grad();
  const Tensor<double> l = loss(inputs);
  l.backward();
  double max_diff = 0.0, max_ref = 0.0;
  for (auto& t : inputs) {
    if (!t.requires_grad()) continue;
    std::vector<double> analytic(t.numel(), 0.0);
    if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());
    std::vector<std::size_t> idx(t.numel());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (probe > 0 && probe < idx.size()) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(probe);
    }
    vseg::ad::NoGradGuard no_grad;
    for (std::size_t i : idx) {
      auto v = t.values();
      const double x0 = v[i];
      v[i] = x0 + h;
      const double lp = loss(inputs).item();
      v[i] = x0 - h;
      const double lm = loss(inputs).item();
      v[i] = x0;
      const double numeric = (lp - lm) / (2.0 * h);
      max_diff = std::max(max_diff, std::abs(analytic[i] - numeric));
      max_ref = std::max(max_ref, std::abs(numeric));
    }
  }
  return max_diff / std::max(max_ref, 1e-12);
}

/// sum(f(x) * R) for a fixed random R, turning any op into a scalar loss
/// with a generic upstream gradient.
inline std::function<Tensor<double>(const std::vector<Tensor<double>>&)> projected(
    const std::function<Tensor<double>(const std::vector<Tensor<double>>&)>& f, std::mt19937_64& rng) {
  auto probe = std::make_shared<Tensor<double>>();
  auto seed = rng();
  return [f, probe, seed](const std::vector<Tensor<double>>& in) {
    Tensor<double> y = f(in);
    if (!probe->defined()) {
      std::mt19937_64 r(seed);
      *probe = random_tensor(y.shape(), r, false);
    }
    return vseg::ad::sum(vseg::ad::mul(y, *probe));
  };
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("vseg_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// ---- NIfTI-1 fixture ------------------------------------------------------

struct NiftiFixture {
  std::vector<std::int16_t> dim{3, 1, 1, 1, 1, 1, 1, 1};
  std::int16_t datatype = 16;
  std::vector<float> pixdim{1, 1, 1, 1, 1, 1, 1, 1};
  float vox_offset = 352.0f;
  float scl_slope = 0.0f;
  float scl_inter = 0.0f;
  std::int32_t sizeof_hdr = 348;
  char magic[4] = {'n', '+', '1', '\0'};
  std::vector<unsigned char> payload;

  template <typename T>
  static void put(std::vector<unsigned char>& b, std::size_t off, T v) {
    std::memcpy(b.data() + off, &v, sizeof(T));  // tests run on little-endian hosts
  }

  std::vector<unsigned char> bytes() const {
    std::vector<unsigned char> b(static_cast<std::size_t>(vox_offset), 0);
    put(b, 0, sizeof_hdr);
    for (int i = 0; i < 8; ++i) put(b, 40 + 2 * i, dim[i]);
    put(b, 70, datatype);
    const std::int16_t bitpix = datatype == 2 ? 8 : datatype == 4 ? 16 : datatype == 16 ? 32 : 64;
    put(b, 72, bitpix);
    for (int i = 0; i < 8; ++i) put(b, 76 + 4 * i, pixdim[i]);
    put(b, 108, vox_offset);
    put(b, 112, scl_slope);
    put(b, 116, scl_inter);
    std::memcpy(b.data() + 344, magic, 4);
    b.insert(b.end(), payload.begin(), payload.end());
    return b;
  }

  template <typename T>
  void set_values(const std::vector<T>& v) {
    payload.resize(v.size() * sizeof(T));
    std::memcpy(payload.data(), v.data(), payload.size());
  }
};

// ---- metric oracles ---------------------------------------------------------

/// Set-counting Dice.
inline double dsc_oracle(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b, int c) {
  std::vector<std::size_t> sa, sb, both;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == c) sa.push_back(i);
    if (b[i] == c) sb.push_back(i);
  }
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(both));
  if (sa.empty() && sb.empty()) return 1.0;
  return 2.0 * static_cast<double>(both.size()) / static_cast<double>(sa.size() + sb.size());
}

struct Point {
  int x, y, z;
};

/// Boundary points by direct neighbour inspection, with out-of-grid
/// neighbours treated as outside.
inline std::vector<Point> boundary_oracle(const vseg::Shape3& s, const std::vector<std::uint8_t>& labels, int c) {
  auto in = [&](int x, int y, int z) {
    if (x < 0 || y < 0 || z < 0 || x >= s[0] || y >= s[1] || z >= s[2]) return false;
    return labels[static_cast<std::size_t>(x + s[0] * (y + s[1] * z))] == c;
  };
  std::vector<Point> out;
  for (int z = 0; z < s[2]; ++z)
    for (int y = 0; y < s[1]; ++y)
      for (int x = 0; x < s[0]; ++x) {
        if (!in(x, y, z)) continue;
        if (!in(x + 1, y, z) || !in(x - 1, y, z) || !in(x, y + 1, z) || !in(x, y - 1, z) || !in(x, y, z + 1) ||
            !in(x, y, z - 1))
          out.push_back({x, y, z});
      }
  return out;
}

/// All-pairs NSD: a boundary point counts when some boundary point of the
/// other mask lies within tau (squared physical distance <= tau^2).
inline double nsd_oracle(const vseg::Shape3& s, const vseg::Spacing3& sp, const std::vector<std::uint8_t>& a,
                         const std::vector<std::uint8_t>& b, int c, double tau) {
  const auto ea = boundary_oracle(s, a, c);
  const auto eb = boundary_oracle(s, b, c);
  if (ea.empty() && eb.empty()) return 1.0;
  if (ea.empty() || eb.empty()) return 0.0;
  auto close = [&](const Point& p, const std::vector<Point>& other) {
    for (const auto& q : other) {
      const double dx = (p.x - q.x) * sp[0], dy = (p.y - q.y) * sp[1], dz = (p.z - q.z) * sp[2];
      if (dx * dx + dy * dy + dz * dz <= tau * tau) return true;
    }
    return false;
  };
  std::size_t hits = 0;
  for (const auto& p : ea) hits += close(p, eb);
  for (const auto& q : eb) hits += close(q, ea);
  return static_cast<double>(hits) / static_cast<double>(ea.size() + eb.size());
}

/// Random label pair on an 8x8x8 grid: a few blobs plus scattered voxels,
/// with the second volume a perturbed copy of the first.
inline std::pair<std::vector<std::uint8_t>, std::vector<std::uint8_t>> random_label_pair(std::mt19937_64& rng,
                                                                                          int classes = 3) {
  const int n = 8;
  std::vector<std::uint8_t> a(n * n * n, 0);
  std::uniform_int_distribution<int> coord(0, n - 1), cls(1, classes - 1), rad(1, 3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int blob = 0; blob < 3; ++blob) {
    const int cx = coord(rng), cy = coord(rng), cz = coord(rng), r = rad(rng), c = cls(rng);
    for (int z = 0; z < n; ++z)
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
          if ((x - cx) * (x - cx) + (y - cy) * (y - cy) + (z - cz) * (z - cz) <= r * r)
            a[static_cast<std::size_t>(x + n * (y + n * z))] = static_cast<std::uint8_t>(c);
  }
  std::vector<std::uint8_t> b = a;
  for (auto& v : b) {
    const double p = u(rng);
    if (p < 0.1) v = static_cast<std::uint8_t>(cls(rng));
    else if (p < 0.2) v = 0;
  }
  return {a, b};
}

}  // namespace testing

#include "vseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>

#include "vseg/diagnostics.hpp"

namespace vseg {

namespace {

void check_pair(const LabelVolume& a, const LabelVolume& b) {
  if (a.geometry != b.geometry) fail(ErrorCode::GeometryMismatch, "prediction and ground truth grids differ");
}

std::vector<std::uint8_t> class_mask(const LabelVolume& v, int c) {
  std::vector<std::uint8_t> m(v.labels.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = v.labels[i] == c;
  return m;
}

struct Offset {
  int dx, dy, dz;
  double d2;
};

// Every voxel offset whose physical length is within tau, shortest first.
std::vector<Offset> offsets_within(const Spacing3& s, double tau) {
  const double t2 = tau * tau;
  Index3 r{};
  // One extra voxel of reach so rounding in tau / s never drops a candidate.
  for (int d = 0; d < 3; ++d) r[d] = static_cast<int>(std::floor(tau / s[d])) + 1;
  std::vector<Offset> out;
  for (int dz = -r[2]; dz <= r[2]; ++dz)
    for (int dy = -r[1]; dy <= r[1]; ++dy)
      for (int dx = -r[0]; dx <= r[0]; ++dx) {
        const double ex = dx * s[0], ey = dy * s[1], ez = dz * s[2];
        const double d2 = ex * ex + ey * ey + ez * ez;
        if (d2 <= t2) out.push_back({dx, dy, dz, d2});
      }
  std::stable_sort(out.begin(), out.end(), [](const Offset& a, const Offset& b) { return a.d2 < b.d2; });
  return out;
}

// Boundary points of `from` that have a boundary point of `to` within the
// offset window.
std::size_t count_within(const Geometry& g, const std::vector<std::size_t>& from, const std::vector<std::uint8_t>& to,
                         const std::vector<Offset>& window) {
  std::size_t hits = 0;
#pragma omp parallel for reduction(+ : hits) schedule(static)
  for (std::int64_t k = 0; k < static_cast<std::int64_t>(from.size()); ++k) {
    const Index3 p = g.coords(from[static_cast<std::size_t>(k)]);
    for (const Offset& o : window) {
      const Index3 q{p[0] + o.dx, p[1] + o.dy, p[2] + o.dz};
      if (g.contains(q) && to[g.index(q[0], q[1], q[2])]) {
        ++hits;
        break;
      }
    }
  }
  return hits;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

double dsc(const LabelVolume& pred, const LabelVolume& gt, int c) {
  check_pair(pred, gt);
  std::size_t a = 0, b = 0, both = 0;
  for (std::size_t i = 0; i < pred.labels.size(); ++i) {
    const bool in_a = pred.labels[i] == c;
    const bool in_b = gt.labels[i] == c;
    a += in_a;
    b += in_b;
    both += in_a && in_b;
  }
  if (a == 0 && b == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(a + b);
}

std::vector<std::size_t> boundary_voxels(const Geometry& g, const std::vector<std::uint8_t>& mask) {
  if (mask.size() != g.voxel_count()) fail(ErrorCode::SizeMismatch, "mask length does not match geometry");
  static constexpr int kNeighbours[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    const Index3 p = g.coords(i);
    for (const auto& n : kNeighbours) {
      const Index3 q{p[0] + n[0], p[1] + n[1], p[2] + n[2]};
      if (!g.contains(q) || !mask[g.index(q[0], q[1], q[2])]) {
        out.push_back(i);
        break;
      }
    }
  }
  return out;
}

double nsd(const LabelVolume& pred, const LabelVolume& gt, int c, double tau_mm) {
  if (!(tau_mm > 0.0) || !std::isfinite(tau_mm)) fail(ErrorCode::BadTolerance, "NSD tolerance must be > 0");
  check_pair(pred, gt);
  const Geometry& g = pred.geometry;
  const auto edge_a = boundary_voxels(g, class_mask(pred, c));
  const auto edge_b = boundary_voxels(g, class_mask(gt, c));
  if (edge_a.empty() && edge_b.empty()) return 1.0;
  if (edge_a.empty() || edge_b.empty()) return 0.0;

  std::vector<std::uint8_t> bitmap_a(g.voxel_count(), 0), bitmap_b(g.voxel_count(), 0);
  for (auto i : edge_a) bitmap_a[i] = 1;
  for (auto i : edge_b) bitmap_b[i] = 1;
  const auto window = offsets_within(g.spacing, tau_mm);
  const std::size_t hits = count_within(g, edge_a, bitmap_b, window) + count_within(g, edge_b, bitmap_a, window);
  return static_cast<double>(hits) / static_cast<double>(edge_a.size() + edge_b.size());
}

MetricsReport evaluate_cases(const std::vector<LabeledCase>& preds, const std::vector<LabeledCase>& gts,
                             int num_classes, double tau_mm) {
  if (num_classes < 2) fail(ErrorCode::BadConfig, "num_classes must be >= 2");
  if (!(tau_mm > 0.0)) fail(ErrorCode::BadTolerance, "NSD tolerance must be > 0");
  std::map<std::string, const LabelVolume*> gt_by_id;
  for (const auto& g : gts) gt_by_id[g.id] = &g.labels;
  if (gt_by_id.size() != preds.size())
    fail(ErrorCode::CaseMismatch, std::to_string(preds.size()) + " predictions vs " + std::to_string(gts.size()) +
                                      " ground-truth cases");

  MetricsReport r;
  r.num_classes = num_classes;
  r.tolerance_mm = tau_mm;
  r.cases.resize(preds.size());
  for (const auto& p : preds) {
    if (!gt_by_id.count(p.id)) fail(ErrorCode::CaseMismatch, "no ground truth for case '" + p.id + "'");
  }
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& p = preds[i];
    const LabelVolume& gt = *gt_by_id.at(p.id);
    CaseMetrics& cm = r.cases[i];
    cm.case_id = p.id;
    for (int c = 1; c < num_classes; ++c) {
      cm.dsc.push_back(dsc(p.labels, gt, c));
      cm.nsd.push_back(nsd(p.labels, gt, c, tau_mm));
    }
  }
  const auto K = static_cast<std::size_t>(num_classes - 1);
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<double> d, n;
    for (const auto& cm : r.cases) {
      d.push_back(cm.dsc[k]);
      n.push_back(cm.nsd[k]);
    }
    r.class_mean_dsc.push_back(mean_of(d));
    r.class_mean_nsd.push_back(mean_of(n));
  }
  r.mean_dsc = mean_of(r.class_mean_dsc);
  r.mean_nsd = mean_of(r.class_mean_nsd);
  return r;
}

void write_metrics_csv(const MetricsReport& r, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoFailure, "cannot write " + path.string());
  char line[256];
  out << "case,class,dsc,nsd\n";
  for (const auto& cm : r.cases) {
    for (std::size_t k = 0; k < cm.dsc.size(); ++k) {
      std::snprintf(line, sizeof line, "%s,%zu,%.6f,%.6f\n", cm.case_id.c_str(), k + 1, cm.dsc[k], cm.nsd[k]);
      out << line;
    }
  }
  for (std::size_t k = 0; k < r.class_mean_dsc.size(); ++k) {
    std::snprintf(line, sizeof line, "mean,%zu,%.6f,%.6f\n", k + 1, r.class_mean_dsc[k], r.class_mean_nsd[k]);
    out << line;
  }
  std::snprintf(line, sizeof line, "all,foreground,%.6f,%.6f\n", r.mean_dsc, r.mean_nsd);
  out << line;
  std::snprintf(line, sizeof line, "# tolerance_mm=%g\n", r.tolerance_mm);
  out << line;
}

void print_metrics_table(const MetricsReport& r, std::ostream& os) {
  char line[128];
  std::snprintf(line, sizeof line, "NSD tolerance: %g mm, %zu case(s)\n", r.tolerance_mm, r.cases.size());
  os << line;
  os << "class      DSC      NSD\n";
  for (std::size_t k = 0; k < r.class_mean_dsc.size(); ++k) {
    std::snprintf(line, sizeof line, "%5zu  %7.4f  %7.4f\n", k + 1, r.class_mean_dsc[k], r.class_mean_nsd[k]);
    os << line;
  }
  std::snprintf(line, sizeof line, " mean  %7.4f  %7.4f\n", r.mean_dsc, r.mean_nsd);
  os << line;
}

}  // namespace vseg

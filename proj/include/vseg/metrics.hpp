#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "vseg/volume.hpp"

namespace vseg {

/// Dice of class `c`: 2|A n B| / (|A| + |B|). Both empty gives 1, one empty 0.
double dsc(const LabelVolume& pred, const LabelVolume& gt, int c);

/// Mask voxels with a 6-neighbour outside the mask; the volume edge counts
/// as outside. Returned as flat indices in ascending order.
std::vector<std::size_t> boundary_voxels(const Geometry& g, const std::vector<std::uint8_t>& mask);

/// Normalized surface Dice of class `c` at tolerance `tau_mm`, with distances
/// between voxel centers in physical units. Empty conventions as for dsc.
/// Throws BadTolerance for tau <= 0 and GeometryMismatch on differing grids.
double nsd(const LabelVolume& pred, const LabelVolume& gt, int c, double tau_mm);

struct CaseMetrics {
  std::string case_id;
  std::vector<double> dsc;  // index k holds class k + 1
  std::vector<double> nsd;
};

struct MetricsReport {
  int num_classes = 0;
  double tolerance_mm = 1.0;
  std::vector<CaseMetrics> cases;
  std::vector<double> class_mean_dsc;  // index k holds class k + 1
  std::vector<double> class_mean_nsd;
  double mean_dsc = 0.0;
  double mean_nsd = 0.0;
};

struct LabeledCase {
  std::string id;
  LabelVolume labels;
};

/// Foreground classes 1..num_classes-1 for each paired case. Throws
/// CaseMismatch when the id sets differ.
MetricsReport evaluate_cases(const std::vector<LabeledCase>& preds, const std::vector<LabeledCase>& gts,
                             int num_classes, double tau_mm);

/// Rows `case,class,dsc,nsd`, then per-class `mean` rows and an `all` row.
void write_metrics_csv(const MetricsReport& r, const std::filesystem::path& path);
void print_metrics_table(const MetricsReport& r, std::ostream& os);

}  // namespace vseg

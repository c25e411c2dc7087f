#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "vseg/preprocess.hpp"
#include "vseg/synth.hpp"
#include "vseg/trainer.hpp"

namespace vseg {

struct PathsConfig {
  std::string raw_dir = "data/raw";
  std::string preprocessed_dir = "data/preprocessed";
  std::string checkpoints_dir = "runs/checkpoints";
  std::string predictions_dir = "runs/predictions";
  std::string report_dir = "runs/report";
};

struct MetricsConfig {
  double tolerance_mm = 1.0;
};

/// Every module config plus paths and the master seed. The master seed feeds
/// synthesis, sampling and training.
struct RunConfig {
  std::uint64_t seed = 0;
  /// Worker thread cap; 0 leaves the OpenMP default.
  int jobs = 0;
  PathsConfig paths;
  SynthConfig synth;
  PreprocessConfig preprocess;
  Recipe recipe;
  MetricsConfig metrics;
  /// Dump per-case probability maps next to predicted labels.
  bool write_probabilities = false;

  void validate() const;
};

/// Desk-scale defaults: 4 classes, 3-level model, short schedule.
RunConfig desk_run_config();

nlohmann::json to_json(const RunConfig& cfg);
/// Overlays `j` on `base`. Unknown keys raise BadConfig naming the key path.
RunConfig from_json(const nlohmann::json& j, RunConfig base = desk_run_config());
RunConfig load_run_config(const std::filesystem::path& path);
void write_effective_config(const RunConfig& cfg, const std::filesystem::path& dir);

}  // namespace vseg

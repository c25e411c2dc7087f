#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "vseg/config.hpp"
#include "vseg/metrics.hpp"

namespace vseg {

// On-disk naming, relative to each stage's directory:
//   synth       <id>_image, <id>_label
//   preprocess  <id>_pre, <id>_pre_label
//   train       fold_<k>/ checkpoints, training_fold_<k>.csv
//   infer       <id>_pred (and <id>_prob when enabled)
//   evaluate    metrics.csv
// Every stage also writes effective_config.json into its output directory.

/// Case ids with a `<id><suffix>.vseg.json` header in `dir`, sorted.
std::vector<std::string> list_cases(const std::filesystem::path& dir, const std::string& suffix);

std::vector<std::string> run_synth(const RunConfig& cfg, const std::filesystem::path& out, std::ostream* log = nullptr);
std::vector<std::string> run_preprocess(const RunConfig& cfg, const std::filesystem::path& in,
                                        const std::filesystem::path& out, std::ostream* log = nullptr);
std::vector<TrainingCase> load_training_cases(const std::filesystem::path& dir);
std::vector<Checkpoint> run_train(const RunConfig& cfg, const std::filesystem::path& in,
                                  const std::filesystem::path& out, std::ostream* log = nullptr);
/// Checkpoints in `dir`: the `fold_*` subdirectories, or `dir` itself when it
/// holds a manifest. Throws MissingFile naming `dir` when none exist.
std::vector<Checkpoint> load_checkpoints(const std::filesystem::path& dir);
std::vector<std::string> run_infer(const RunConfig& cfg, const std::filesystem::path& checkpoints,
                                   const std::filesystem::path& in, const std::filesystem::path& out,
                                   std::ostream* log = nullptr);
MetricsReport run_evaluate(const RunConfig& cfg, const std::filesystem::path& predictions,
                           const std::filesystem::path& ground_truth, const std::filesystem::path& out,
                           std::ostream* log = nullptr);

}  // namespace vseg

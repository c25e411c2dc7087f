// vseg: synth | preprocess | train | infer | evaluate
#include <omp.h>

#include <CLI11.hpp>
#include <iostream>
#include <optional>

#include "vseg/diagnostics.hpp"
#include "vseg/pipeline.hpp"

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> folds;
  std::optional<double> tolerance_mm;
  std::optional<int> jobs;
  std::string raw, preprocessed, checkpoints, predictions, ground_truth;
  std::optional<int> cases, classes;
  std::optional<std::vector<int>> shape;
  std::string modality;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--out", o.out, "output directory (defaults to the config path for this stage)");
  cmd->add_option("--jobs", o.jobs, "worker thread cap")->check(CLI::NonNegativeNumber);
}

vseg::RunConfig effective_config(const Options& o) {
  vseg::RunConfig c = o.config.empty() ? vseg::desk_run_config() : vseg::load_run_config(o.config);
  if (o.seed) {
    c.seed = *o.seed;
    c.synth.seed = c.recipe.train.seed = c.recipe.sampler.seed = *o.seed;
  }
  if (o.folds) c.recipe.train.folds = *o.folds;
  if (o.tolerance_mm) c.metrics.tolerance_mm = *o.tolerance_mm;
  if (o.jobs) c.jobs = *o.jobs;
  if (o.cases) c.synth.cases = *o.cases;
  if (o.classes) {
    c.synth.num_classes = *o.classes;
    c.recipe.model.num_classes = *o.classes;
  }
  if (o.shape) {
    if (o.shape->size() != 3) vseg::fail(vseg::ErrorCode::BadArgs, "--shape takes three integers");
    c.synth.shape = {(*o.shape)[0], (*o.shape)[1], (*o.shape)[2]};
  }
  if (!o.modality.empty()) c.synth.modality = vseg::modality_mix_from_string(o.modality);
  if (!o.raw.empty()) c.paths.raw_dir = o.raw;
  if (!o.preprocessed.empty()) c.paths.preprocessed_dir = o.preprocessed;
  if (!o.checkpoints.empty()) c.paths.checkpoints_dir = o.checkpoints;
  if (!o.predictions.empty()) c.paths.predictions_dir = o.predictions;
  c.validate();
  if (c.jobs > 0) omp_set_num_threads(c.jobs);
  return c;
}

std::string pick(const std::string& flag, const std::string& fallback) { return flag.empty() ? fallback : flag; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale 3D multi-organ segmentation pipeline"};
  app.require_subcommand(1);
  Options o;

  auto* synth = app.add_subcommand("synth", "generate a synthetic labelled dataset");
  add_common(synth, o);
  synth->add_option("--cases", o.cases, "number of cases");
  synth->add_option("--shape", o.shape, "volume shape X Y Z")->expected(3);
  synth->add_option("--classes", o.classes, "label classes including background");
  synth->add_option("--modality", o.modality, "CT, MRI or mixed");

  auto* pre = app.add_subcommand("preprocess", "resample and normalize raw cases");
  add_common(pre, o);
  pre->add_option("--raw", o.raw, "directory with <id>_image / <id>_label volumes");

  auto* train = app.add_subcommand("train", "train one model per fold");
  add_common(train, o);
  train->add_option("--folds", o.folds, "number of folds (1 trains and validates on all cases)");
  train->add_option("--preprocessed", o.preprocessed, "directory with preprocessed cases");

  auto* infer = app.add_subcommand("infer", "ensemble prediction restored to the original grid");
  add_common(infer, o);
  infer->add_option("--checkpoints", o.checkpoints, "checkpoint directory (fold_* subdirectories)");
  infer->add_option("--preprocessed", o.preprocessed, "directory with preprocessed cases");

  auto* eval = app.add_subcommand("evaluate", "DSC / NSD report");
  add_common(eval, o);
  eval->add_option("--tolerance-mm", o.tolerance_mm, "NSD tolerance in mm");
  eval->add_option("--predictions", o.predictions, "directory with <id>_pred volumes");
  eval->add_option("--gt", o.ground_truth, "directory with <id>_label volumes (defaults to the raw dir)");

  CLI11_PARSE(app, argc, argv);

  try {
    const vseg::RunConfig c = effective_config(o);
    const auto& p = c.paths;
    if (synth->parsed()) {
      vseg::run_synth(c, pick(o.out, p.raw_dir), &std::cout);
    } else if (pre->parsed()) {
      vseg::run_preprocess(c, p.raw_dir, pick(o.out, p.preprocessed_dir), &std::cout);
    } else if (train->parsed()) {
      vseg::run_train(c, p.preprocessed_dir, pick(o.out, p.checkpoints_dir), &std::cout);
    } else if (infer->parsed()) {
      vseg::run_infer(c, p.checkpoints_dir, p.preprocessed_dir, pick(o.out, p.predictions_dir), &std::cout);
    } else if (eval->parsed()) {
      vseg::run_evaluate(c, p.predictions_dir, pick(o.ground_truth, p.raw_dir), pick(o.out, p.report_dir),
                         &std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "vseg: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

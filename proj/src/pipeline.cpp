#include "vseg/pipeline.hpp"

#include <algorithm>
#include <ostream>

#include "vseg/diagnostics.hpp"
#include "vseg/inference.hpp"
#include "vseg/volume_io.hpp"

namespace vseg {

namespace fs = std::filesystem;

namespace {

void note(std::ostream* log, const std::string& line) {
  if (log) *log << line << '\n';
}

// Re-raises module errors with the file or case they concern.
template <typename F>
auto with_context(const std::string& context, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    fail(e.code(), context + ": " + e.what());
  }
}

}  // namespace

std::vector<std::string> list_cases(const fs::path& dir, const std::string& suffix) {
  if (!fs::is_directory(dir)) fail(ErrorCode::MissingFile, dir.string() + " is not a directory");
  const std::string tail = suffix + ".vseg.json";
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() > tail.size() && name.compare(name.size() - tail.size(), tail.size(), tail) == 0)
      ids.push_back(name.substr(0, name.size() - tail.size()));
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<std::string> run_synth(const RunConfig& cfg, const fs::path& out, std::ostream* log) {
  cfg.synth.validate();
  fs::create_directories(out);
  std::vector<std::string> ids;
  for (int i = 0; i < cfg.synth.cases; ++i) {
    const SynthCase c = synth_case(cfg.synth, i);
    write_native(c.image, out / (c.id + "_image"));
    write_native(c.labels, out / (c.id + "_label"));
    note(log, "synth " + c.id + " (" + std::string(to_string(c.image.modality)) + ")");
    ids.push_back(c.id);
  }
  write_effective_config(cfg, out);
  return ids;
}

std::vector<std::string> run_preprocess(const RunConfig& cfg, const fs::path& in, const fs::path& out,
                                        std::ostream* log) {
  cfg.preprocess.validate();
  const auto ids = list_cases(in, "_image");
  if (ids.empty()) fail(ErrorCode::MissingFile, "no *_image volumes in " + in.string());
  fs::create_directories(out);
  for (const auto& id : ids) {
    with_context("case " + id, [&] {
      const Volume image = read_native_volume(in / (id + "_image"));
      std::optional<LabelVolume> labels;
      if (fs::exists(native_paths(in / (id + "_label")).header)) labels = read_native_labels(in / (id + "_label"));
      const PreprocessedCase pc = preprocess_case(image, labels, cfg.preprocess);
      write_native(pc.image, out / (id + "_pre"));
      if (pc.labels) write_native(*pc.labels, out / (id + "_pre_label"));
      return 0;
    });
    note(log, "preprocess " + id);
  }
  write_effective_config(cfg, out);
  return ids;
}

std::vector<TrainingCase> load_training_cases(const fs::path& dir) {
  std::vector<TrainingCase> cases;
  for (const auto& id : list_cases(dir, "_pre")) {
    const fs::path label = dir / (id + "_pre_label");
    if (!fs::exists(native_paths(label).header)) fail(ErrorCode::MissingFile, native_paths(label).header.string());
    cases.push_back({id, read_native_volume(dir / (id + "_pre")), read_native_labels(label)});
  }
  if (cases.empty()) fail(ErrorCode::MissingFile, "no preprocessed cases in " + dir.string());
  return cases;
}

std::vector<Checkpoint> run_train(const RunConfig& cfg, const fs::path& in, const fs::path& out, std::ostream* log) {
  cfg.recipe.validate();
  const auto dataset = load_training_cases(in);
  fs::create_directories(out);
  write_effective_config(cfg, out);
  auto on_epoch = [&](int fold, const EpochRecord& r) {
    char line[160];
    std::snprintf(line, sizeof line, "fold %d epoch %d lr %.6g train %.6f val %.6f", fold, r.epoch, r.lr,
                  r.train_loss, r.val_loss);
    note(log, line);
  };
  auto checkpoints = train_ensemble(dataset, cfg.recipe, on_epoch);
  for (auto& ck : checkpoints) {
    ck.config_snapshot = to_json(cfg);
    const std::string name = "fold_" + std::to_string(ck.fold);
    save_checkpoint(ck, out / name);
    write_training_csv(ck.curve, out / ("training_" + name + ".csv"));
    note(log, name + ": best val " + std::to_string(ck.best_val_loss) + " at epoch " +
                  std::to_string(ck.epoch_of_best));
  }
  return checkpoints;
}

std::vector<Checkpoint> load_checkpoints(const fs::path& dir) {
  if (!fs::exists(dir)) fail(ErrorCode::MissingFile, "checkpoint path " + dir.string() + " does not exist");
  if (fs::exists(dir / "manifest.json")) return {load_checkpoint(dir)};
  std::vector<fs::path> folds;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_directory() && name.rfind("fold_", 0) == 0 && fs::exists(entry.path() / "manifest.json"))
      folds.push_back(entry.path());
  }
  if (folds.empty()) fail(ErrorCode::MissingFile, "no checkpoints under " + dir.string());
  std::sort(folds.begin(), folds.end());
  std::vector<Checkpoint> out;
  for (const auto& f : folds) out.push_back(with_context(f.string(), [&] { return load_checkpoint(f); }));
  return out;
}

std::vector<std::string> run_infer(const RunConfig& cfg, const fs::path& checkpoints, const fs::path& in,
                                   const fs::path& out, std::ostream* log) {
  const InferenceConfig& ic = cfg.recipe.inference;
  ic.validate();
  std::vector<Model<float>> models;
  for (const auto& ck : load_checkpoints(checkpoints)) models.push_back(restore_model(ck));
  note(log, "ensemble of " + std::to_string(models.size()) + " model(s)");
  const auto ids = list_cases(in, "_pre");
  if (ids.empty()) fail(ErrorCode::MissingFile, "no *_pre volumes in " + in.string());
  fs::create_directories(out);
  for (const auto& id : ids) {
    with_context("case " + id, [&] {
      const Volume image = read_native_volume(in / (id + "_pre"));
      const ProbabilityMap probs = ensemble_predict(models, image, ic);
      LabelVolume labels;
      ProbabilityMap restored;
      if (ic.restore_probabilities) {
        restored = restore_probabilities(probs, image.original);
        labels = labels_from_probs(restored);
      } else {
        labels = restore_to_original_grid(labels_from_probs(probs), image.original);
      }
      write_native(labels, out / (id + "_pred"));
      if (cfg.write_probabilities) {
        const ProbabilityMap& p = ic.restore_probabilities ? restored : probs;
        write_native_channels({p.geometry, p.channels, p.values}, out / (id + "_prob"));
      }
      return 0;
    });
    note(log, "infer " + id);
  }
  write_effective_config(cfg, out);
  return ids;
}

MetricsReport run_evaluate(const RunConfig& cfg, const fs::path& predictions, const fs::path& ground_truth,
                           const fs::path& out, std::ostream* log) {
  const auto pred_ids = list_cases(predictions, "_pred");
  if (pred_ids.empty()) fail(ErrorCode::MissingFile, "no *_pred volumes in " + predictions.string());
  std::vector<LabeledCase> preds, gts;
  for (const auto& id : pred_ids) {
    preds.push_back({id, read_native_labels(predictions / (id + "_pred"))});
    const fs::path gt = ground_truth / (id + "_label");
    if (!fs::exists(native_paths(gt).header))
      fail(ErrorCode::CaseMismatch, "no ground truth " + native_paths(gt).header.string());
    gts.push_back({id, read_native_labels(gt)});
  }
  const MetricsReport r = evaluate_cases(preds, gts, cfg.recipe.model.num_classes, cfg.metrics.tolerance_mm);
  fs::create_directories(out);
  write_metrics_csv(r, out / "metrics.csv");
  write_effective_config(cfg, out);
  if (log) print_metrics_table(r, *log);
  return r;
}

}  // namespace vseg

#include "vseg/config.hpp"

#include <fstream>
#include <set>

#include "vseg/checkpoint.hpp"
#include "vseg/diagnostics.hpp"

namespace vseg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Reads known keys from one JSON object and rejects the rest.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(ErrorCode::BadConfig, where() + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      fail(ErrorCode::BadConfig, where() + "." + key + " has the wrong type");
    }
  }

  std::optional<Section> child(const char* key) {
    seen_.insert(key);
    if (!j_.contains(key)) return std::nullopt;
    return Section(j_.at(key), path_ + "." + key);
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) fail(ErrorCode::BadConfig, "unknown config key " + path_ + "." + key);
    }
  }

 private:
  std::string where() const { return path_; }
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

void RunConfig::validate() const {
  if (jobs < 0) fail(ErrorCode::BadConfig, "jobs must be >= 0");
  synth.validate();
  preprocess.validate();
  recipe.validate();
  if (!(metrics.tolerance_mm > 0.0)) fail(ErrorCode::BadTolerance, "metrics.tolerance_mm must be > 0");
  if (synth.num_classes != recipe.model.num_classes)
    fail(ErrorCode::ConfigMismatch, "synth.num_classes and model.num_classes differ");
}

RunConfig desk_run_config() {
  RunConfig c;
  c.recipe = desk_recipe(c.synth.num_classes);
  return c;
}

json to_json(const RunConfig& c) {
  const Recipe& r = c.recipe;
  const auto& t = r.train;
  json j;
  j["seed"] = c.seed;
  j["jobs"] = c.jobs;
  j["write_probabilities"] = c.write_probabilities;
  j["paths"] = {{"raw_dir", c.paths.raw_dir},
                {"preprocessed_dir", c.paths.preprocessed_dir},
                {"checkpoints_dir", c.paths.checkpoints_dir},
                {"predictions_dir", c.paths.predictions_dir},
                {"report_dir", c.paths.report_dir}};
  j["synth"] = {{"cases", c.synth.cases},
                {"shape", c.synth.shape},
                {"spacing_mm", c.synth.spacing},
                {"num_classes", c.synth.num_classes},
                {"modality", to_string(c.synth.modality)},
                {"noise", c.synth.noise}};
  j["preprocess"] = {{"target_spacing_mm", c.preprocess.target_spacing_mm},
                     {"ct_clip_min", c.preprocess.ct_clip_min},
                     {"ct_clip_max", c.preprocess.ct_clip_max},
                     {"ct_rescale", c.preprocess.ct_rescale},
                     {"mri_std_floor", c.preprocess.mri_std_floor}};
  j["sampler"] = {{"patch_shape", r.sampler.patch_shape},
                  {"ratio_positive", r.sampler.ratio_positive},
                  {"ratio_negative", r.sampler.ratio_negative},
                  {"shift_fraction", r.sampler.shift_fraction},
                  {"multiplicative_shift", r.sampler.multiplicative_shift}};
  j["model"] = model_config_to_json(r.model);
  j["loss"] = {{"w_dice", r.loss.w_dice},
               {"w_ce", r.loss.w_ce},
               {"dice_eps", r.loss.dice_eps},
               {"exclude_background", r.loss.exclude_background},
               {"head_weights", r.loss.head_weights}};
  j["train"] = {{"epochs", t.epochs},
                {"steps_per_epoch", t.steps_per_epoch},
                {"batch_size", t.batch_size},
                {"lr0", t.lr0},
                {"lr_min", t.lr_min},
                {"adam_beta1", t.adam.beta1},
                {"adam_beta2", t.adam.beta2},
                {"adam_eps", t.adam.eps},
                {"folds", t.folds},
                {"per_step_schedule", t.per_step_schedule},
                {"val_patches_per_case", t.val_patches_per_case},
                {"val_full_volume", t.val_full_volume},
                {"augment", t.augment}};
  j["inference"] = {{"overlap", r.inference.overlap},
                    {"gaussian", r.inference.gaussian},
                    {"restore_probabilities", r.inference.restore_probabilities}};
  j["metrics"] = {{"tolerance_mm", c.metrics.tolerance_mm}};
  return j;
}

RunConfig from_json(const json& j, RunConfig c) {
  Section root(j, "config");
  root.get("seed", c.seed);
  root.get("jobs", c.jobs);
  root.get("write_probabilities", c.write_probabilities);
  if (auto s = root.child("paths")) {
    s->get("raw_dir", c.paths.raw_dir);
    s->get("preprocessed_dir", c.paths.preprocessed_dir);
    s->get("checkpoints_dir", c.paths.checkpoints_dir);
    s->get("predictions_dir", c.paths.predictions_dir);
    s->get("report_dir", c.paths.report_dir);
    s->finish();
  }
  if (auto s = root.child("synth")) {
    std::string mix = to_string(c.synth.modality);
    s->get("cases", c.synth.cases);
    s->get("shape", c.synth.shape);
    s->get("spacing_mm", c.synth.spacing);
    s->get("num_classes", c.synth.num_classes);
    s->get("modality", mix);
    s->get("noise", c.synth.noise);
    s->finish();
    c.synth.modality = modality_mix_from_string(mix);
  }
  if (auto s = root.child("preprocess")) {
    auto& p = c.preprocess;
    s->get("target_spacing_mm", p.target_spacing_mm);
    s->get("ct_clip_min", p.ct_clip_min);
    s->get("ct_clip_max", p.ct_clip_max);
    s->get("ct_rescale", p.ct_rescale);
    s->get("mri_std_floor", p.mri_std_floor);
    s->finish();
  }
  Recipe& r = c.recipe;
  if (auto s = root.child("sampler")) {
    s->get("patch_shape", r.sampler.patch_shape);
    s->get("ratio_positive", r.sampler.ratio_positive);
    s->get("ratio_negative", r.sampler.ratio_negative);
    s->get("shift_fraction", r.sampler.shift_fraction);
    s->get("multiplicative_shift", r.sampler.multiplicative_shift);
    s->finish();
  }
  if (auto s = root.child("model")) {
    auto& m = r.model;
    s->get("in_channels", m.in_channels);
    s->get("num_classes", m.num_classes);
    s->get("levels", m.levels);
    s->get("base_channels", m.base_channels);
    s->get("ds_heads", m.ds_heads);
    s->get("patch_shape", m.patch_shape);
    s->get("leaky_slope", m.leaky_slope);
    s->get("norm_eps", m.norm_eps);
    s->finish();
  }
  if (auto s = root.child("loss")) {
    s->get("w_dice", r.loss.w_dice);
    s->get("w_ce", r.loss.w_ce);
    s->get("dice_eps", r.loss.dice_eps);
    s->get("exclude_background", r.loss.exclude_background);
    s->get("head_weights", r.loss.head_weights);
    s->finish();
  }
  if (auto s = root.child("train")) {
    auto& t = r.train;
    s->get("epochs", t.epochs);
    s->get("steps_per_epoch", t.steps_per_epoch);
    s->get("batch_size", t.batch_size);
    s->get("lr0", t.lr0);
    s->get("lr_min", t.lr_min);
    s->get("adam_beta1", t.adam.beta1);
    s->get("adam_beta2", t.adam.beta2);
    s->get("adam_eps", t.adam.eps);
    s->get("folds", t.folds);
    s->get("per_step_schedule", t.per_step_schedule);
    s->get("val_patches_per_case", t.val_patches_per_case);
    s->get("val_full_volume", t.val_full_volume);
    s->get("augment", t.augment);
    s->finish();
  }
  if (auto s = root.child("inference")) {
    s->get("overlap", r.inference.overlap);
    s->get("gaussian", r.inference.gaussian);
    s->get("restore_probabilities", r.inference.restore_probabilities);
    s->finish();
  }
  if (auto s = root.child("metrics")) {
    s->get("tolerance_mm", c.metrics.tolerance_mm);
    s->finish();
  }
  root.finish();
  c.synth.seed = c.seed;
  c.recipe.train.seed = c.seed;
  c.recipe.sampler.seed = c.seed;
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorCode::MissingFile, path.string());
  std::ifstream in(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::BadConfig, path.string() + ": " + e.what());
  }
  RunConfig c = from_json(j);
  c.validate();
  return c;
}

void write_effective_config(const RunConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream out(dir / "effective_config.json");
  if (!out) fail(ErrorCode::IoFailure, "cannot write " + (dir / "effective_config.json").string());
  out << to_json(cfg).dump(2) << '\n';
}

}  // namespace vseg

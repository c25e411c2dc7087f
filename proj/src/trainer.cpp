#include "vseg/trainer.hpp"

#include <algorithm>
#include <map>

#include "vseg/diagnostics.hpp"
#include "vseg/layout.hpp"
#include "vseg/seed.hpp"

namespace vseg {

namespace {

// Stream tags for derive_seed.
enum : std::uint64_t { kInitStream = 1, kValStream = 2, kStepStream = 3 };

struct Batch {
  ad::Tensor<float> images;
  std::vector<std::uint8_t> labels;  // tensor voxel order
};

Batch make_batch(const std::vector<Patch>& patches) {
  const Shape3 s = patches.front().shape;
  const std::size_t V = static_cast<std::size_t>(s[0]) * s[1] * s[2];
  std::vector<float> img(patches.size() * V);
  std::vector<std::uint8_t> lab(patches.size() * V);
  for (std::size_t n = 0; n < patches.size(); ++n) {
    volume_to_tensor_order<float, float>(patches[n].image, s, img.data() + n * V);
    volume_to_tensor_order<std::uint8_t, std::uint8_t>(patches[n].labels, s, lab.data() + n * V);
  }
  ad::Shape shape{patches.size(), 1, static_cast<std::size_t>(s[0]), static_cast<std::size_t>(s[1]),
                  static_cast<std::size_t>(s[2])};
  return {ad::Tensor<float>::from(std::move(shape), std::move(img)), std::move(lab)};
}

// Non-overlapping tiles covering the volume, as patch centers.
std::vector<Patch> tile_patches(const TrainingCase& c, const Shape3& shape) {
  std::vector<Patch> out;
  const Shape3 vs = c.image.geometry.shape;
  for (const Index3& o : sliding_windows(vs, shape, 0.0)) {
    Index3 center{};
    for (int d = 0; d < 3; ++d) center[d] = std::min(o[d] + shape[d] / 2, vs[d] - 1);
    out.push_back(extract_patch(c.image, c.labels, center, shape));
    out.back().case_id = c.id;
  }
  return out;
}

template <typename F>
auto guard_finite(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NonFinite) fail(ErrorCode::NonFiniteLoss, std::string("training diverged: ") + e.what());
    throw;
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) fail(ErrorCode::BadConfig, "epochs must be >= 1");
  if (steps_per_epoch < 1) fail(ErrorCode::BadConfig, "steps_per_epoch must be >= 1");
  if (batch_size < 1) fail(ErrorCode::BadConfig, "batch_size must be >= 1");
  if (!(lr_min >= 0.0 && lr0 > lr_min)) fail(ErrorCode::BadConfig, "need lr0 > lr_min >= 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0))
    fail(ErrorCode::BadConfig, "Adam betas must lie in [0, 1)");
  if (!(adam.eps > 0.0)) fail(ErrorCode::BadConfig, "Adam eps must be > 0");
  if (folds < 1) fail(ErrorCode::BadConfig, "folds must be >= 1");
  if (val_patches_per_case < 1) fail(ErrorCode::BadConfig, "val_patches_per_case must be >= 1");
}

void Recipe::validate() const {
  model.validate();
  loss.validate();
  sampler.validate();
  train.validate();
  inference.validate();
  if (sampler.patch_shape != model.patch_shape)
    fail(ErrorCode::ConfigMismatch, "sampler and model patch shapes differ");
}

Recipe desk_recipe(int num_classes) {
  Recipe r;
  r.model = desk_model_config(num_classes);
  r.sampler.patch_shape = r.model.patch_shape;
  // 200 steps. At 0.001 the tiny model does not fit one volume in that budget.
  r.train.epochs = 20;
  r.train.steps_per_epoch = 10;
  r.train.batch_size = 8;
  r.train.lr0 = 0.01;
  r.train.folds = 5;
  return r;
}

Checkpoint train_fold(const std::vector<TrainingCase>& dataset, const Split& split, const Recipe& recipe, int fold,
                      std::uint64_t seed, const EpochCallback& on_epoch) {
  recipe.validate();
  if (split.train.empty()) fail(ErrorCode::EmptySplit, "fold " + std::to_string(fold) + " has no training cases");
  if (split.val.empty()) fail(ErrorCode::EmptySplit, "fold " + std::to_string(fold) + " has no validation cases");

  std::map<std::string, const TrainingCase*> by_id;
  for (const auto& c : dataset) by_id[c.id] = &c;
  auto lookup = [&](const std::string& id) {
    auto it = by_id.find(id);
    if (it == by_id.end()) fail(ErrorCode::CaseMismatch, "split references unknown case '" + id + "'");
    const TrainingCase* c = it->second;
    if (c->labels.num_classes != recipe.model.num_classes)
      fail(ErrorCode::ConfigMismatch, "case '" + id + "' has " + std::to_string(c->labels.num_classes) +
                                          " classes, model expects " + std::to_string(recipe.model.num_classes));
    return c;
  };
  std::vector<const TrainingCase*> train_cases, val_cases;
  for (const auto& id : split.train) train_cases.push_back(lookup(id));
  for (const auto& id : split.val) val_cases.push_back(lookup(id));

  const TrainConfig& tc = recipe.train;
  Model<float> model(recipe.model, derive_seed(seed, {kInitStream}));
  std::vector<ad::Tensor<float>> params;
  for (auto& p : model.parameters()) params.push_back(p.tensor);
  AdamState<float> adam;

  // Validation batches are drawn once and reused every epoch.
  std::vector<Batch> val_batches;
  for (std::size_t i = 0; i < val_cases.size(); ++i) {
    const TrainingCase& c = *val_cases[i];
    std::vector<Patch> patches;
    if (tc.val_full_volume) {
      patches = tile_patches(c, recipe.model.patch_shape);
    } else {
      SamplerConfig sc = recipe.sampler;
      sc.seed = derive_seed(seed, {kValStream, i});
      patches = sample_patches(c.image, c.labels, static_cast<std::size_t>(tc.val_patches_per_case), sc, c.id);
    }
    val_batches.push_back(make_batch(patches));
  }
  auto validation_loss = [&] {
    ad::NoGradGuard no_grad;
    double total = 0.0;
    for (const auto& b : val_batches) {
      const auto out = model.forward(b.images, true);
      total += combined_loss(out, b.labels, recipe.loss).item();
    }
    return total / static_cast<double>(val_batches.size());
  };

  Checkpoint ck;
  ck.model = recipe.model;
  ck.fold = fold;
  bool have_best = false;
  const std::int64_t total_steps = static_cast<std::int64_t>(tc.epochs) * tc.steps_per_epoch;

  for (int e = 0; e < tc.epochs; ++e) {
    const double epoch_lr = cosine_lr(e, tc.epochs - 1, tc.lr0, tc.lr_min);
    double train_sum = 0.0;
    for (int s = 0; s < tc.steps_per_epoch; ++s) {
      const double lr =
          tc.per_step_schedule
              ? cosine_lr(static_cast<std::int64_t>(e) * tc.steps_per_epoch + s, total_steps - 1, tc.lr0, tc.lr_min)
              : epoch_lr;
      Rng rng(derive_seed(seed, {kStepStream, static_cast<std::uint64_t>(e), static_cast<std::uint64_t>(s)}));
      std::uniform_int_distribution<std::size_t> pick(0, train_cases.size() - 1);
      const TrainingCase& c = *train_cases[pick(rng)];
      SamplerConfig sc = recipe.sampler;
      sc.seed = rng();
      auto patches = sample_patches(c.image, c.labels, static_cast<std::size_t>(tc.batch_size), sc, c.id);
      if (tc.augment) {
        for (auto& p : patches) intensity_shift(p, rng, recipe.sampler);
      }
      const Batch batch = make_batch(patches);

      const double loss_value = guard_finite([&] {
        const auto out = model.forward(batch.images, true);
        const auto loss = combined_loss(out, batch.labels, recipe.loss);
        model.zero_grad();
        loss.backward();
        return loss.item();
      });
      adam_step<float>(params, adam, lr, tc.adam);
      train_sum += loss_value;
    }

    const double val = guard_finite(validation_loss);
    const EpochRecord rec{e, epoch_lr, train_sum / tc.steps_per_epoch, val};
    ck.curve.push_back(rec);
    if (!have_best || val < ck.best_val_loss) {
      have_best = true;
      ck.best_val_loss = val;
      ck.epoch_of_best = e;
      ck.parameters = snapshot_parameters(model);
    }
    if (on_epoch) on_epoch(fold, rec);
  }
  return ck;
}

std::vector<Split> ensemble_splits(const std::vector<TrainingCase>& dataset, int folds, std::uint64_t seed) {
  std::vector<std::string> ids;
  for (const auto& c : dataset) ids.push_back(c.id);
  if (folds == 1) {
    if (ids.empty()) fail(ErrorCode::TooFewCases, "no cases to train on");
    return {Split{ids, ids}};
  }
  return make_folds(ids, folds, seed);
}

std::vector<Checkpoint> train_ensemble(const std::vector<TrainingCase>& dataset, const Recipe& recipe,
                                       const EpochCallback& on_epoch) {
  recipe.validate();
  const auto splits = ensemble_splits(dataset, recipe.train.folds, recipe.train.seed);
  std::vector<Checkpoint> out;
  for (std::size_t f = 0; f < splits.size(); ++f) {
    out.push_back(train_fold(dataset, splits[f], recipe, static_cast<int>(f), recipe.train.seed + f, on_epoch));
  }
  return out;
}

}  // namespace vseg

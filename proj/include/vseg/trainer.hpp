#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vseg/checkpoint.hpp"
#include "vseg/folds.hpp"
#include "vseg/inference.hpp"
#include "vseg/loss.hpp"
#include "vseg/network.hpp"
#include "vseg/optim.hpp"
#include "vseg/patch_sampler.hpp"

namespace vseg {

struct TrainConfig {
  int epochs = 300;
  int steps_per_epoch = 16;
  int batch_size = 2;
  double lr0 = 1e-3;
  double lr_min = 0.0;
  AdamConfig adam;
  std::uint64_t seed = 0;
  int folds = 5;
  /// Anneal per optimization step instead of per epoch.
  bool per_step_schedule = false;
  /// Fixed validation patches drawn once per validation case.
  int val_patches_per_case = 4;
  /// Validate on non-overlapping tiles covering each validation volume
  /// instead of sampled patches.
  bool val_full_volume = false;
  /// Random intensity shift on training patches.
  bool augment = true;

  void validate() const;
};

/// Everything that shapes a training run.
struct Recipe {
  ModelConfig model;
  LossConfig loss;
  SamplerConfig sampler;
  TrainConfig train;
  InferenceConfig inference;

  /// Throws BadConfig/ConfigMismatch when the sub-configs disagree (for
  /// example sampler and model patch shapes).
  void validate() const;
};

/// Laptop-scale recipe: 3-level, 8-channel model on 16x16x8 patches, 200
/// steps of batch 8 starting at lr 0.01.
Recipe desk_recipe(int num_classes = 4);

/// A preprocessed case.
struct TrainingCase {
  std::string id;
  Volume image;
  LabelVolume labels;
};

using EpochCallback = std::function<void(int fold, const EpochRecord&)>;

/// Trains one model on `split.train` and keeps the parameters with the lowest
/// validation loss on `split.val`. Learning rate at epoch e is
/// cosine_lr(e, epochs - 1). The run is a pure function of its inputs and `seed`.
Checkpoint train_fold(const std::vector<TrainingCase>& dataset, const Split& split, const Recipe& recipe, int fold,
                      std::uint64_t seed, const EpochCallback& on_epoch = {});

/// One checkpoint per fold of make_folds(ids, train.folds, train.seed); fold f
/// trains with seed train.seed + f. With a single fold the model trains and
/// validates on every case.
std::vector<Checkpoint> train_ensemble(const std::vector<TrainingCase>& dataset, const Recipe& recipe,
                                       const EpochCallback& on_epoch = {});

std::vector<Split> ensemble_splits(const std::vector<TrainingCase>& dataset, int folds, std::uint64_t seed);

}  // namespace vseg

// Published recipe constants. Each case states the rule it pins.
#include <doctest.h>

#include "vseg/inference.hpp"
#include "vseg/loss.hpp"
#include "vseg/network.hpp"
#include "vseg/patch_sampler.hpp"
#include "vseg/preprocess.hpp"
#include "vseg/trainer.hpp"

using namespace vseg;

TEST_CASE("volumes are resampled to 1 x 1 x 2 mm voxels") {
  CHECK(PreprocessConfig{}.target_spacing_mm == Spacing3{1.0, 1.0, 2.0});
}

TEST_CASE("CT intensities are clipped to the [-100, 250] HU window") {
  const PreprocessConfig p;
  CHECK(p.ct_clip_min == -100.0);
  CHECK(p.ct_clip_max == 250.0);
}

TEST_CASE("training patches are 128 x 128 x 64 voxels by default") {
  CHECK(SamplerConfig{}.patch_shape == Shape3{128, 128, 64});
  CHECK(ModelConfig{}.patch_shape == Shape3{128, 128, 64});
}

TEST_CASE("foreground-centred and random patches are drawn one to one") {
  const SamplerConfig s;
  CHECK(s.ratio_positive == 1);
  CHECK(s.ratio_negative == 1);
}

TEST_CASE("intensity augmentation shifts by at most 0.05") { CHECK(SamplerConfig{}.shift_fraction == 0.05); }

TEST_CASE("loss is Dice with weight 1.0 plus cross-entropy with weight 0.5") {
  const LossConfig l;
  CHECK(l.w_dice == 1.0);
  CHECK(l.w_ce == 0.5);
}

TEST_CASE("the background class is left out of the Dice term") { CHECK(LossConfig{}.exclude_background); }

TEST_CASE("three decoder outputs are supervised") {
  CHECK(kDeepSupervisionHeads == 3);
  CHECK(ModelConfig{}.ds_heads == 3);
  CHECK(LossConfig{}.head_weights.size() == 3);
}

TEST_CASE("Adam starts at a learning rate of 0.001") { CHECK(TrainConfig{}.lr0 == 0.001); }

TEST_CASE("cosine decay runs from 0.001 at the first epoch to 0 at the last") {
  const TrainConfig t;
  CHECK(cosine_lr(0, t.epochs, t.lr0, t.lr_min) == 0.001);
  CHECK(cosine_lr(t.epochs, t.epochs, t.lr0, t.lr_min) == 0.0);
}

TEST_CASE("the full schedule is 300 epochs") { CHECK(TrainConfig{}.epochs == 300); }

TEST_CASE("five-fold cross-validation yields five ensemble members") { CHECK(TrainConfig{}.folds == 5); }

TEST_CASE("the ensemble averages member probabilities arithmetically") {
  const Geometry g{{2, 1, 1}, {1, 1, 1}};
  const std::vector<ProbabilityMap> maps{{g, 2, {0.9f, 0.2f, 0.1f, 0.8f}},
                                         {g, 2, {0.3f, 0.6f, 0.7f, 0.4f}},
                                         {g, 2, {0.0f, 1.0f, 1.0f, 0.0f}}};
  const ProbabilityMap m = average_maps(maps);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(m.values[i] ==
          doctest::Approx((maps[0].values[i] + maps[1].values[i] + maps[2].values[i]) / 3.0).epsilon(1e-7));
}

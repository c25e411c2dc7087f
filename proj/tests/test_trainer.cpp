#include <doctest.h>

#include <cmath>
#include <set>

#include "support.hpp"
#include "vseg/diagnostics.hpp"
#include "vseg/synth.hpp"
#include "vseg/trainer.hpp"

using namespace vseg;

namespace {

// Straight-line scalar Adam, written without the library.
struct ScalarAdam {
  double theta, m = 0, v = 0;
  int t = 0;
  void step(double g, double lr) {
    ++t;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t));
    const double vh = v / (1 - std::pow(0.999, t));
    theta -= lr * mh / (std::sqrt(vh) + 1e-8);
  }
};

std::vector<TrainingCase> tiny_dataset(int cases, std::uint64_t seed) {
  SynthConfig sc;
  sc.cases = cases;
  sc.shape = {16, 16, 8};
  sc.num_classes = 3;
  sc.seed = seed;
  std::vector<TrainingCase> out;
  for (auto& c : synth_dataset(sc)) {
    Volume img = c.image;
    for (auto& x : img.values) x = std::clamp((x + 100.0f) / 350.0f, 0.0f, 1.0f);
    out.push_back({c.id, img, c.labels});
  }
  return out;
}

Recipe tiny_recipe() {
  Recipe r;
  r.model.num_classes = 3;
  r.model.levels = 2;
  r.model.base_channels = 4;
  r.model.patch_shape = {8, 8, 4};
  r.sampler.patch_shape = r.model.patch_shape;
  r.train.epochs = 3;
  r.train.steps_per_epoch = 2;
  r.train.batch_size = 2;
  r.train.val_patches_per_case = 2;
  r.train.folds = 2;
  return r;
}

}  // namespace

TEST_CASE("Adam first step") {
  std::vector<double> theta{0.0}, g{1.0}, m{0.0}, v{0.0};
  adam_update<double>(theta, g, m, v, 1, 0.001);
  CHECK(theta[0] == doctest::Approx(-0.001 / (1 + 1e-8)).epsilon(1e-12));
  CHECK(theta[0] == doctest::Approx(-0.000999999).epsilon(1e-6));

  std::vector<double> t2{0.5}, z{0.0}, m2{0.0}, v2{0.0};
  adam_update<double>(t2, z, m2, v2, 1, 0.001);
  CHECK(t2[0] == 0.5);
}

TEST_CASE("Adam matches a scalar oracle over three steps") {
  std::vector<double> theta{0.3}, m{0.0}, v{0.0};
  ScalarAdam ref{0.3};
  const double grads[3] = {1.0, 1.0, -1.0};
  for (int t = 0; t < 3; ++t) {
    std::vector<double> g{grads[t]};
    adam_update<double>(theta, g, m, v, t + 1, 0.001);
    ref.step(grads[t], 0.001);
    CHECK(std::abs(theta[0] - ref.theta) < 1e-12);
  }
}

TEST_CASE("adam_step over tensors treats missing grads as zero") {
  auto a = ad::Tensor<double>::from({2}, {1.0, 2.0}, true);
  auto b = ad::Tensor<double>::from({1}, {5.0}, true);
  ad::sum(a).backward();
  std::vector<ad::Tensor<double>> ps{a, b};
  AdamState<double> st;
  adam_step<double>(ps, st, 0.1);
  CHECK(a.values()[0] == doctest::Approx(0.9));
  CHECK(b.values()[0] == 5.0);
  CHECK(st.step == 1);
}

TEST_CASE("cosine schedule") {
  CHECK(cosine_lr(0, 300, 0.001) == 0.001);
  CHECK(cosine_lr(300, 300, 0.001) == doctest::Approx(0.0));
  CHECK(cosine_lr(150, 300, 0.001) == doctest::Approx(0.0005));
  CHECK(cosine_lr(0, 0, 0.001) == 0.001);
  CHECK_THROWS_AS(cosine_lr(301, 300, 0.001), Error);
  CHECK_THROWS_AS(cosine_lr(-1, 300, 0.001), Error);
}

TEST_CASE("folds partition the cases") {
  std::vector<std::string> ids;
  for (int i = 0; i < 13; ++i) ids.push_back("c" + std::to_string(i));
  const auto f = make_folds(ids, 5, 3);
  REQUIRE(f.size() == 5);
  std::multiset<std::string> seen;
  for (const auto& s : f) {
    CHECK((s.val.size() == 2 || s.val.size() == 3));
    CHECK(s.train.size() + s.val.size() == ids.size());
    for (const auto& id : s.val) {
      seen.insert(id);
      CHECK(std::find(s.train.begin(), s.train.end(), id) == s.train.end());
    }
  }
  CHECK(seen == std::multiset<std::string>(ids.begin(), ids.end()));
  const auto again = make_folds(ids, 5, 3);
  for (std::size_t i = 0; i < 5; ++i) CHECK(again[i].val == f[i].val);
  CHECK_THROWS_AS(make_folds({"a", "b"}, 5, 0), Error);
}

TEST_CASE("train_fold selects the lowest validation loss and follows the schedule") {
  const auto data = tiny_dataset(2, 1);
  const Recipe r = tiny_recipe();
  const Split split{{data[0].id}, {data[1].id}};
  std::vector<EpochRecord> seen;
  const Checkpoint ck = train_fold(data, split, r, 0, 9, [&](int, const EpochRecord& e) { seen.push_back(e); });
  REQUIRE(ck.curve.size() == 3);
  CHECK(seen == ck.curve);
  double best = ck.curve[0].val_loss;
  for (const auto& e : ck.curve) {
    best = std::min(best, e.val_loss);
    CHECK(e.lr == cosine_lr(e.epoch, 2, r.train.lr0, r.train.lr_min));
  }
  CHECK(ck.best_val_loss == best);
  CHECK(ck.curve[ck.epoch_of_best].val_loss == best);
  CHECK(ck.best_val_loss <= ck.curve[0].val_loss);
  CHECK(ck.curve.front().lr == r.train.lr0);
  CHECK(ck.curve.back().lr == 0.0);

  // Selected parameters reproduce the recorded validation loss.
  const Checkpoint again = train_fold(data, split, r, 0, 9);
  CHECK(again.parameters == ck.parameters);
}

TEST_CASE("train_fold rejects empty splits and divergence") {
  const auto data = tiny_dataset(2, 2);
  Recipe r = tiny_recipe();
  CHECK_THROWS_AS(train_fold(data, Split{{}, {data[0].id}}, r, 0, 1), Error);
  CHECK_THROWS_AS(train_fold(data, Split{{data[0].id}, {}}, r, 0, 1), Error);

  r.train.lr0 = 1e35;
  try {
    train_fold(data, Split{{data[0].id}, {data[1].id}}, r, 0, 1);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteLoss);
  }
}

TEST_CASE("train_ensemble: one checkpoint per fold with distinct ids") {
  const auto data = tiny_dataset(4, 3);
  Recipe r = tiny_recipe();
  r.train.epochs = 1;
  r.train.steps_per_epoch = 1;
  const auto cks = train_ensemble(data, r);
  REQUIRE(cks.size() == 2);
  CHECK(cks[0].fold == 0);
  CHECK(cks[1].fold == 1);
  CHECK(cks[0].parameters != cks[1].parameters);

  r.train.folds = 1;
  const auto splits = ensemble_splits(data, 1, 0);
  REQUIRE(splits.size() == 1);
  CHECK(splits[0].train == splits[0].val);
}

TEST_CASE("checkpoint save/load round-trips bit-exactly and reproduces forward") {
  const auto data = tiny_dataset(2, 4);
  Recipe r = tiny_recipe();
  r.train.epochs = 2;
  Checkpoint ck = train_fold(data, Split{{data[0].id}, {data[1].id}}, r, 1, 5);
  ck.config_snapshot = {{"note", "x"}};
  const auto dir = testing::temp_dir("ckpt") / "fold_1";
  save_checkpoint(ck, dir);
  const Checkpoint back = load_checkpoint(dir);
  CHECK(back.model == ck.model);
  CHECK(back.fold == 1);
  CHECK(back.best_val_loss == ck.best_val_loss);
  CHECK(back.epoch_of_best == ck.epoch_of_best);
  CHECK(back.curve == ck.curve);
  CHECK(back.parameters == ck.parameters);
  CHECK(back.config_snapshot == ck.config_snapshot);

  const Model<float> a = restore_model(ck);
  const Model<float> b = restore_model(back);
  std::mt19937_64 rng(1);
  auto x = testing::random_tensor_f({1, 1, 8, 8, 4}, rng, false);
  const auto ya = a.forward(x)[0], yb = b.forward(x)[0];
  CHECK(std::equal(ya.values().begin(), ya.values().end(), yb.values().begin()));

  CHECK_THROWS_AS(load_checkpoint(dir.parent_path() / "nope"), Error);
  Checkpoint wrong = ck;
  wrong.parameters.pop_back();
  CHECK_THROWS_AS(restore_model(wrong), Error);
}

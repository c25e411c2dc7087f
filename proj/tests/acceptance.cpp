// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "support.hpp"
#include "vseg/checkpoint.hpp"
#include "vseg/config.hpp"
#include "vseg/diagnostics.hpp"
#include "vseg/inference.hpp"
#include "vseg/metrics.hpp"
#include "vseg/pipeline.hpp"
#include "vseg/volume_io.hpp"

using namespace vseg;
namespace fs = std::filesystem;
using testing::gradient_error;
using testing::projected;
using testing::random_tensor;
using Inputs = std::vector<ad::Tensor<double>>;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// ---- 1: gradients ----------------------------------------------------------

Outcome gradients() {
  const auto t0 = Clock::now();
  using Check = std::function<double(std::mt19937_64&)>;
  const std::vector<std::pair<std::string, Check>> ops{
      {"conv3d",
       [](std::mt19937_64& rng) {
         const std::size_t ci = pick(rng, 1, 3), co = pick(rng, 1, 3), k = pick(rng, 1, 3), s = pick(rng, 1, 2);
         const std::size_t p = pick(rng, 0, k / 2);
         Inputs in{random_tensor({2, ci, 4, 5, 3}, rng), random_tensor({co, ci, k, k, k}, rng),
                   random_tensor({co}, rng)};
         auto f = [s, p](const Inputs& t) { return ad::conv3d(t[0], t[1], t[2], {s, s, s}, {p, p, p}); };
         return gradient_error(in, projected(f, rng), rng);
       }},
      {"transposed_conv3d",
       [](std::mt19937_64& rng) {
         const std::size_t ci = pick(rng, 1, 3), co = pick(rng, 1, 3);
         Inputs in{random_tensor({1, ci, 2, 3, 2}, rng), random_tensor({ci, co, 2, 2, 2}, rng),
                   random_tensor({co}, rng)};
         auto f = [](const Inputs& t) { return ad::transposed_conv3d(t[0], t[1], t[2]); };
         return gradient_error(in, projected(f, rng), rng);
       }},
      {"elementwise",
       [](std::mt19937_64& rng) {
         Inputs in{random_tensor({2, 2, 3, 2, 2}, rng), random_tensor({2, 2, 3, 2, 2}, rng),
                   random_tensor({2, 1, 3, 2, 2}, rng)};
         auto f = [](const Inputs& t) {
           auto b = ad::scale(ad::mul(ad::leaky_relu(t[0], 0.01), t[1]), 1.7);
           return ad::concat_channels(ad::add(b, t[0]), t[2]);
         };
         return gradient_error(in, projected(f, rng), rng);
       }},
      {"instance_norm",
       [](std::mt19937_64& rng) {
         const std::size_t c = pick(rng, 1, 3);
         Inputs in{random_tensor({2, c, 3, 3, 2}, rng, true, 2.0), random_tensor({c}, rng), random_tensor({c}, rng)};
         auto f = [](const Inputs& t) { return ad::instance_norm(t[0], t[1], t[2], 1e-5); };
         return gradient_error(in, projected(f, rng), rng);
       }},
      {"softmax",
       [](std::mt19937_64& rng) {
         Inputs in{random_tensor({2, pick(rng, 2, 5), 2, 2, 2}, rng, true, 2.0)};
         auto f = [](const Inputs& t) { return ad::softmax_channels(t[0]); };
         return gradient_error(in, projected(f, rng), rng);
       }},
      {"upsample",
       [](std::mt19937_64& rng) {
         Inputs in{random_tensor({1, 2, 2, 3, 2}, rng)};
         const ad::Triple size{pick(rng, 2, 6), pick(rng, 3, 7), pick(rng, 2, 5)};
         auto f = [size](const Inputs& t) { return ad::upsample_trilinear(t[0], size); };
         return gradient_error(in, projected(f, rng), rng);
       }},
      {"losses",
       [](std::mt19937_64& rng) {
         std::vector<std::uint8_t> tgt(8);
         for (auto& v : tgt) v = static_cast<std::uint8_t>(rng() % 3);
         Inputs in{random_tensor({2, 3, 2, 2, 1}, rng, true, 2.0), random_tensor({2, 3, 2, 2, 1}, rng, true, 2.0),
                   random_tensor({2, 3, 2, 2, 1}, rng, true, 2.0)};
         auto f = [tgt](const Inputs& t) { return combined_loss<double>({t[0], t[1], t[2]}, tgt); };
         return gradient_error(in, f, rng);
       }},
  };
  std::ostringstream d;
  bool ok = true;
  for (const auto& [name, check] : ops) {
    double worst = 0.0;
    for (int s = 0; s < 20; ++s) {
      std::mt19937_64 rng(7000 + s);
      worst = std::max(worst, check(rng));
    }
    ok = ok && worst < 1e-6;
    d << name << "=" << worst << " ";
  }
  ModelConfig mc;
  mc.num_classes = 3;
  mc.levels = 2;
  mc.base_channels = 2;
  mc.patch_shape = {4, 4, 4};
  double model_worst = 0.0;
  for (int s = 0; s < 20; ++s) {
    std::mt19937_64 rng(8000 + s);
    Model<double> m(mc, rng());
    auto x = random_tensor({1, 1, 4, 4, 4}, rng, false);
    std::vector<std::uint8_t> tgt(64);
    for (auto& v : tgt) v = static_cast<std::uint8_t>(rng() % 3);
    Inputs params;
    for (auto& p : m.parameters()) params.push_back(p.tensor);
    auto loss = [&](const Inputs&) { return combined_loss(m.forward(x), tgt); };
    model_worst = std::max(model_worst, gradient_error(params, loss, rng, 1e-6, 4));
  }
  const double secs = seconds_since(t0);
  ok = ok && model_worst < 1e-4 && secs < 120.0;
  d << "model=" << model_worst << " time=" << secs << "s";
  return {ok, d.str()};
}

// ---- 2: metric oracles -------------------------------------------------------

Outcome metric_oracles() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  const Spacing3 spacings[3] = {{1, 1, 1}, {1, 1, 2}, {0.7, 1.3, 1.9}};
  int mismatches = 0, non_monotone = 0;
  for (int i = 0; i < 100; ++i) {
    const auto [a, b] = testing::random_label_pair(rng);
    const Geometry g{{8, 8, 8}, spacings[i % 3]};
    LabelVolume la(g, 3), lb(g, 3);
    la.labels = a;
    lb.labels = b;
    for (int c = 1; c < 3; ++c) {
      mismatches += dsc(la, lb, c) != testing::dsc_oracle(a, b, c);
      double prev = -1.0;
      for (double tau : {0.5, 1.0, 1.5, 2.0, 3.0, 5.0}) {
        const double n = nsd(la, lb, c, tau);
        mismatches += n != testing::nsd_oracle(g.shape, g.spacing, a, b, c, tau);
        non_monotone += n < prev;
        prev = n;
      }
    }
  }
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << "mismatches=" << mismatches << " non_monotone=" << non_monotone << " time=" << secs << "s";
  return {mismatches == 0 && non_monotone == 0 && secs < 60.0, d.str()};
}

// ---- 3: recipe constants ------------------------------------------------------

Outcome constants() {
  const PreprocessConfig p;
  const SamplerConfig s;
  const LossConfig l;
  const ModelConfig m;
  const TrainConfig t;
  const Geometry g{{1, 1, 1}, {1, 1, 1}};
  const ProbabilityMap mean =
      average_maps(std::vector<ProbabilityMap>{{g, 2, {0.9f, 0.1f}}, {g, 2, {0.3f, 0.7f}}, {g, 2, {0.0f, 1.0f}}});
  const std::vector<std::pair<std::string, bool>> checks{
      {"target spacing 1x1x2 mm", p.target_spacing_mm == Spacing3{1, 1, 2}},
      {"CT window [-100, 250]", p.ct_clip_min == -100.0 && p.ct_clip_max == 250.0},
      {"patch 128x128x64", s.patch_shape == Shape3{128, 128, 64} && m.patch_shape == Shape3{128, 128, 64}},
      {"1:1 sampling", s.ratio_positive == 1 && s.ratio_negative == 1},
      {"shift bound 0.05", s.shift_fraction == 0.05},
      {"loss weights 1.0 / 0.5", l.w_dice == 1.0 && l.w_ce == 0.5},
      {"background excluded", l.exclude_background},
      {"3 supervised heads", m.ds_heads == 3 && kDeepSupervisionHeads == 3},
      {"lr0 0.001", t.lr0 == 0.001},
      {"cosine endpoints", cosine_lr(0, t.epochs, t.lr0) == 0.001 && cosine_lr(t.epochs, t.epochs, t.lr0) == 0.0},
      {"5 folds", t.folds == 5},
      {"ensemble mean", std::abs(mean.values[0] - 0.4f) < 1e-7f && std::abs(mean.values[1] - 0.6f) < 1e-7f},
  };
  std::ostringstream d;
  int failed = 0;
  for (const auto& [name, ok] : checks)
    if (!ok) {
      ++failed;
      d << "[" << name << "] ";
    }
  d << (checks.size() - failed) << "/" << checks.size() << " constants";
  return {failed == 0, d.str()};
}

// ---- 4 / 5: overfit through the pipeline ----------------------------------------

RunConfig overfit_config() {
  RunConfig c = desk_run_config();
  c.seed = 11;
  c.synth.seed = c.recipe.train.seed = c.recipe.sampler.seed = c.seed;
  c.synth.cases = 1;
  c.synth.shape = {32, 32, 16};
  c.recipe.train.folds = 1;
  return c;
}

struct OverfitRun {
  double dsc = 0.0;
  double seconds = 0.0;
  int steps = 0;
};

OverfitRun overfit_pipeline(const fs::path& root) {
  fs::remove_all(root);
  const RunConfig c = overfit_config();
  const auto t0 = Clock::now();
  run_synth(c, root / "raw");
  run_preprocess(c, root / "raw", root / "pre");
  run_train(c, root / "pre", root / "ckpt");
  run_infer(c, root / "ckpt", root / "pre", root / "pred");
  const MetricsReport r = run_evaluate(c, root / "pred", root / "raw", root / "report");
  return {r.mean_dsc, seconds_since(t0), c.recipe.train.epochs * c.recipe.train.steps_per_epoch};
}

Outcome overfit(const OverfitRun& r) {
  const RunConfig c = overfit_config();
  std::ostringstream d;
  d << "train-set foreground DSC=" << r.dsc << " steps=" << r.steps << " levels=" << c.recipe.model.levels
    << " base=" << c.recipe.model.base_channels << " time=" << r.seconds << "s";
  return {r.dsc >= 0.95 && r.steps <= 200 && c.recipe.model.levels == 3 && c.recipe.model.base_channels == 8 &&
              r.seconds < 600.0,
          d.str()};
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Relative paths of every regular file under `root`, sorted.
std::vector<fs::path> tree(const fs::path& root) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root));
  std::sort(out.begin(), out.end());
  return out;
}

Outcome determinism(const fs::path& a, const fs::path& b) {
  std::ostringstream d;
  int compared = 0, differing = 0;
  for (const char* stage : {"ckpt", "pred", "report"}) {
    const auto ta = tree(a / stage), tb = tree(b / stage);
    if (ta != tb) {
      d << stage << ": file sets differ ";
      ++differing;
      continue;
    }
    for (const auto& rel : ta) {
      ++compared;
      if (file_bytes(a / stage / rel) != file_bytes(b / stage / rel)) {
        ++differing;
        d << stage << "/" << rel.string() << " differs ";
      }
    }
  }
  d << compared << " files compared (checkpoints, training CSV, label volumes, metrics CSV)";
  return {differing == 0 && compared > 0, d.str()};
}

// ---- 6: ensemble sanity -----------------------------------------------------------

double mean_foreground_dsc(const std::vector<LabelVolume>& preds, const std::vector<LabelVolume>& gts, int classes) {
  double total = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    for (int c = 1; c < classes; ++c) total += dsc(preds[i], gts[i], c);
  return total / static_cast<double>(preds.size() * (classes - 1));
}

Outcome ensemble_sanity() {
  const auto t0 = Clock::now();
  std::ostringstream d;
  bool ok = true;
  for (std::uint64_t seed : {101u, 202u, 303u}) {
    RunConfig c = desk_run_config();
    c.synth.seed = seed;
    c.synth.cases = 8;
    c.synth.shape = {32, 32, 16};
    Recipe r = c.recipe;
    // 60 steps per fold keeps 15 trainings within a few minutes on one core.
    r.train.epochs = 6;
    r.train.steps_per_epoch = 10;
    r.train.batch_size = 4;
    r.train.val_patches_per_case = 2;
    r.train.folds = 5;
    r.train.seed = seed;
    r.sampler.seed = seed;

    std::vector<TrainingCase> train, held;
    for (const auto& s : synth_dataset(c.synth)) {
      const auto pc = preprocess_case(s.image, s.labels, c.preprocess);
      (train.size() < 6 ? train : held).push_back({s.id, pc.image, *pc.labels});
    }
    const auto cks = train_ensemble(train, r);
    std::vector<Model<float>> models;
    for (const auto& ck : cks) models.push_back(restore_model(ck));

    std::vector<LabelVolume> gts;
    for (const auto& h : held) gts.push_back(h.labels);
    std::vector<std::vector<LabelVolume>> single(models.size());
    std::vector<LabelVolume> ens;
    for (const auto& h : held) {
      std::vector<ProbabilityMap> maps;
      for (std::size_t k = 0; k < models.size(); ++k) {
        maps.push_back(predict_volume(models[k], h.image, r.inference));
        single[k].push_back(labels_from_probs(maps.back()));
      }
      ens.push_back(labels_from_probs(average_maps(maps)));
    }
    double worst = 1.0, best = 0.0;
    for (const auto& s : single) {
      const double v = mean_foreground_dsc(s, gts, c.synth.num_classes);
      worst = std::min(worst, v);
      best = std::max(best, v);
    }
    const double e = mean_foreground_dsc(ens, gts, c.synth.num_classes);
    ok = ok && e >= worst;
    d << "seed " << seed << ": ensemble=" << e << " worst=" << worst << " best=" << best << "; ";
  }
  d << "time=" << seconds_since(t0) << "s";
  return {ok, d.str()};
}

// ---- 7: format round-trips -----------------------------------------------------------

Outcome round_trips(const fs::path& root) {
  fs::remove_all(root);
  fs::create_directories(root);
  std::ostringstream d;
  bool ok = true;

  Volume v({{7, 5, 3}, {0.8, 1.1, 2.5}}, Modality::MRI);
  std::mt19937_64 rng(5);
  std::normal_distribution<float> n(0.0f, 300.0f);
  for (auto& x : v.values) x = n(rng);
  v.original = Geometry{{9, 6, 4}, {0.6, 0.9, 1.9}};
  write_native(v, root / "vol");
  const Volume rv = read_native_volume(root / "vol");
  const bool vol_ok = rv.geometry == v.geometry && rv.original == v.original && rv.modality == v.modality &&
                      std::memcmp(rv.values.data(), v.values.data(), v.values.size() * sizeof(float)) == 0;
  ok = ok && vol_ok;
  d << "volume=" << (vol_ok ? "ok" : "DIFF") << " ";

  Checkpoint ck;
  ck.model = desk_model_config(4);
  ck.fold = 2;
  ck.best_val_loss = 0.123456789;
  ck.epoch_of_best = 3;
  ck.curve = {{0, 0.01, 1.5, 1.4}, {1, 0.005, 1.2, 1.1}};
  ck.parameters = snapshot_parameters(Model<float>(ck.model, 99));
  ck.config_snapshot = {{"seed", 99}};
  save_checkpoint(ck, root / "ckpt");
  const Checkpoint rc = load_checkpoint(root / "ckpt");
  const bool ck_ok = rc.model == ck.model && rc.fold == ck.fold && rc.best_val_loss == ck.best_val_loss &&
                     rc.epoch_of_best == ck.epoch_of_best && rc.curve == ck.curve && rc.parameters == ck.parameters &&
                     rc.config_snapshot == ck.config_snapshot;
  ok = ok && ck_ok;
  d << "checkpoint=" << (ck_ok ? "ok" : "DIFF") << " ";

  testing::NiftiFixture f;
  f.dim = {3, 4, 3, 2, 1, 1, 1, 1};
  f.pixdim = {1, 0.75f, 0.75f, 3.0f, 1, 1, 1, 1};
  std::vector<std::int16_t> raw(24);
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = static_cast<std::int16_t>(10 * static_cast<int>(i) - 100);
  f.datatype = 4;
  f.scl_slope = 1.5f;
  f.scl_inter = 2.0f;
  f.set_values(raw);
  const auto bytes = f.bytes();
  bool nii_ok = bytes.size() == 352 + 48;
  const auto any = import_nifti_bytes(bytes);
  if (const auto* nv = std::get_if<Volume>(&any)) {
    nii_ok = nii_ok && nv->geometry.shape == Shape3{4, 3, 2} && std::abs(nv->geometry.spacing[0] - 0.75) < 1e-9 &&
             std::abs(nv->geometry.spacing[2] - 3.0) < 1e-9;
    for (std::size_t i = 0; i < raw.size(); ++i) nii_ok = nii_ok && nv->values[i] == 1.5f * raw[i] + 2.0f;
    nii_ok = nii_ok && nv->at(1, 0, 0) == 1.5f * -90.0f + 2.0f;
  } else {
    nii_ok = false;
  }
  ok = ok && nii_ok;
  d << "nifti=" << (nii_ok ? "ok" : "DIFF");
  return {ok, d.str()};
}

}  // namespace

int main() {
  const fs::path work = fs::temp_directory_path() / "vseg_acceptance";
  int failures = 0;
  auto report = [&](int id, const std::string& name, const std::function<Outcome()>& run) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << id << " " << name << ": " << o.detail << std::endl;
  };

  report(1, "gradient certification", gradients);
  report(2, "metric oracle equivalence", metric_oracles);
  report(3, "recipe constants", constants);
  OverfitRun first, second;
  report(4, "overfit via pipeline", [&] {
    first = overfit_pipeline(work / "overfit_a");
    return overfit(first);
  });
  report(5, "determinism", [&] {
    second = overfit_pipeline(work / "overfit_b");
    return determinism(work / "overfit_a", work / "overfit_b");
  });
  report(6, "ensemble sanity", ensemble_sanity);
  report(7, "format round-trips", [&] { return round_trips(work / "roundtrip"); });
  return failures == 0 ? 0 : 1;
}

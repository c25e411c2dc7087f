#include "vseg/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "vseg/diagnostics.hpp"

namespace vseg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

static_assert(sizeof(float) == 4);

void swap_if_big_endian(std::span<float> data) {
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& v : data) {
      unsigned char b[4];
      std::memcpy(b, &v, 4);
      std::reverse(b, b + 4);
      std::memcpy(&v, b, 4);
    }
  }
}

json triple_json(const Shape3& s) { return json::array({s[0], s[1], s[2]}); }

}  // namespace

json model_config_to_json(const ModelConfig& c) {
  return {{"in_channels", c.in_channels},       {"num_classes", c.num_classes}, {"levels", c.levels},
          {"base_channels", c.base_channels},   {"ds_heads", c.ds_heads},       {"patch_shape", triple_json(c.patch_shape)},
          {"leaky_slope", c.leaky_slope},       {"norm_eps", c.norm_eps}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  try {
    c.in_channels = j.at("in_channels").get<int>();
    c.num_classes = j.at("num_classes").get<int>();
    c.levels = j.at("levels").get<int>();
    c.base_channels = j.at("base_channels").get<int>();
    c.ds_heads = j.at("ds_heads").get<int>();
    c.patch_shape = j.at("patch_shape").get<Shape3>();
    c.leaky_slope = j.at("leaky_slope").get<double>();
    c.norm_eps = j.at("norm_eps").get<double>();
  } catch (const json::exception& e) {
    fail(ErrorCode::HeaderParse, std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

std::vector<ParameterBlob> snapshot_parameters(const Model<float>& model) {
  std::vector<ParameterBlob> out;
  for (const auto& p : model.parameters()) {
    const auto v = p.tensor.values();
    out.push_back({p.name, p.tensor.shape(), std::vector<float>(v.begin(), v.end())});
  }
  return out;
}

void load_parameters(Model<float>& model, const std::vector<ParameterBlob>& params) {
  auto& dst = model.parameters();
  if (dst.size() != params.size())
    fail(ErrorCode::ConfigMismatch, "checkpoint has " + std::to_string(params.size()) + " parameters, model expects " +
                                        std::to_string(dst.size()));
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].name != params[i].name || dst[i].tensor.shape() != params[i].shape)
      fail(ErrorCode::ConfigMismatch, "parameter " + params[i].name + " " + ad::shape_string(params[i].shape) +
                                          " does not match " + dst[i].name + " " +
                                          ad::shape_string(dst[i].tensor.shape()));
    std::copy(params[i].values.begin(), params[i].values.end(), dst[i].tensor.values().begin());
  }
}

Model<float> restore_model(const Checkpoint& ckpt) {
  Model<float> m(ckpt.model, 0);
  load_parameters(m, ckpt.parameters);
  return m;
}

void save_checkpoint(const Checkpoint& ckpt, const fs::path& dir) {
  json manifest;
  manifest["format"] = "vseg-checkpoint-1";
  manifest["model"] = model_config_to_json(ckpt.model);
  manifest["fold"] = ckpt.fold;
  manifest["best_val_loss"] = ckpt.best_val_loss;
  manifest["epoch_of_best"] = ckpt.epoch_of_best;
  json curve = json::array();
  for (const auto& r : ckpt.curve)
    curve.push_back({{"epoch", r.epoch}, {"lr", r.lr}, {"train_loss", r.train_loss}, {"val_loss", r.val_loss}});
  manifest["curve"] = curve;
  manifest["config"] = ckpt.config_snapshot;

  json entries = json::array();
  std::vector<float> flat;
  for (const auto& p : ckpt.parameters) {
    entries.push_back({{"name", p.name}, {"shape", p.shape}, {"offset", flat.size()}, {"count", p.values.size()}});
    flat.insert(flat.end(), p.values.begin(), p.values.end());
  }
  manifest["parameters"] = entries;
  swap_if_big_endian(flat);

  std::error_code ec;
  const fs::path parent = dir.parent_path().empty() ? fs::path(".") : dir.parent_path();
  fs::create_directories(parent, ec);
  const fs::path tmp = parent / (dir.filename().string() + ".tmp");
  fs::remove_all(tmp, ec);
  if (!fs::create_directories(tmp, ec) && ec) fail(ErrorCode::IoFailure, "cannot create " + tmp.string());
  {
    std::ofstream m(tmp / "manifest.json");
    m << manifest.dump(2) << '\n';
    std::ofstream b(tmp / "params.bin", std::ios::binary);
    b.write(reinterpret_cast<const char*>(flat.data()), static_cast<std::streamsize>(flat.size() * sizeof(float)));
    if (!m || !b) fail(ErrorCode::IoFailure, "failed writing checkpoint under " + tmp.string());
  }
  fs::remove_all(dir, ec);
  fs::rename(tmp, dir, ec);
  if (ec) fail(ErrorCode::IoFailure, "cannot move checkpoint into " + dir.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.json";
  const fs::path bpath = dir / "params.bin";
  if (!fs::exists(mpath)) fail(ErrorCode::MissingFile, mpath.string());
  if (!fs::exists(bpath)) fail(ErrorCode::MissingFile, bpath.string());
  json manifest;
  try {
    std::ifstream in(mpath);
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::HeaderParse, mpath.string() + ": " + e.what());
  }

  const auto bytes = fs::file_size(bpath);
  if (bytes % sizeof(float) != 0) fail(ErrorCode::SizeMismatch, bpath.string() + ": size not a multiple of 4");
  std::vector<float> flat(bytes / sizeof(float));
  {
    std::ifstream in(bpath, std::ios::binary);
    in.read(reinterpret_cast<char*>(flat.data()), static_cast<std::streamsize>(bytes));
    if (!in) fail(ErrorCode::IoFailure, "failed reading " + bpath.string());
  }
  swap_if_big_endian(flat);

  Checkpoint ck;
  try {
    ck.model = model_config_from_json(manifest.at("model"));
    ck.fold = manifest.at("fold").get<int>();
    ck.best_val_loss = manifest.at("best_val_loss").get<double>();
    ck.epoch_of_best = manifest.at("epoch_of_best").get<int>();
    for (const auto& r : manifest.at("curve"))
      ck.curve.push_back({r.at("epoch").get<int>(), r.at("lr").get<double>(), r.at("train_loss").get<double>(),
                          r.at("val_loss").get<double>()});
    ck.config_snapshot = manifest.value("config", json::object());
    for (const auto& e : manifest.at("parameters")) {
      ParameterBlob p;
      p.name = e.at("name").get<std::string>();
      p.shape = e.at("shape").get<ad::Shape>();
      const auto offset = e.at("offset").get<std::size_t>();
      const auto count = e.at("count").get<std::size_t>();
      if (count != ad::numel(p.shape) || offset + count > flat.size())
        fail(ErrorCode::SizeMismatch, mpath.string() + ": parameter " + p.name + " exceeds params.bin");
      p.values.assign(flat.begin() + static_cast<std::ptrdiff_t>(offset),
                      flat.begin() + static_cast<std::ptrdiff_t>(offset + count));
      ck.parameters.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::HeaderParse, mpath.string() + ": " + e.what());
  }
  return ck;
}

void write_training_csv(const std::vector<EpochRecord>& curve, const fs::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoFailure, "cannot write " + path.string());
  out << "epoch,lr,train_loss,val_loss\n";
  char line[160];
  for (const auto& r : curve) {
    std::snprintf(line, sizeof line, "%d,%.9g,%.9g,%.9g\n", r.epoch, r.lr, r.train_loss, r.val_loss);
    out << line;
  }
}

}  // namespace vseg

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "vseg/network.hpp"

namespace vseg {

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct ParameterBlob {
  std::string name;
  ad::Shape shape;
  std::vector<float> values;

  friend bool operator==(const ParameterBlob&, const ParameterBlob&) = default;
};

/// Trained parameters plus the provenance of the run that produced them.
struct Checkpoint {
  ModelConfig model;
  int fold = 0;
  double best_val_loss = 0.0;
  int epoch_of_best = 0;
  std::vector<EpochRecord> curve;
  std::vector<ParameterBlob> parameters;
  /// Free-form copy of the run configuration.
  nlohmann::json config_snapshot = nlohmann::json::object();
};

/// Copies the current parameter values of `model`.
std::vector<ParameterBlob> snapshot_parameters(const Model<float>& model);

/// Builds a model from the checkpoint's config and loads its parameters.
/// Throws ConfigMismatch when names or shapes do not line up.
Model<float> restore_model(const Checkpoint& ckpt);
void load_parameters(Model<float>& model, const std::vector<ParameterBlob>& params);

nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Writes `dir/manifest.json` and `dir/params.bin` (flat little-endian f32).
/// The directory is assembled under a temporary name and renamed into place.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

/// Per-epoch CSV: epoch,lr,train_loss,val_loss.
void write_training_csv(const std::vector<EpochRecord>& curve, const std::filesystem::path& path);

}  // namespace vseg

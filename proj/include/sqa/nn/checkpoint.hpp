#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "sqa/nn/model.hpp"

namespace sqa::nn {

struct NamedArray {
  std::string name;
  std::vector<int> shape;
  std::vector<float> data;
};

/// Single-file container: magic `SQACKPT1`, u64 little-endian header length,
/// a JSON header (architecture, stage tag, seed, config hash, tensor table),
/// then the raw float32 payload in table order.
struct Checkpoint {
  ModelSpec spec;
  std::string stage;  // ae_pretrain, dcec, degr_classifier, finetune_<variant>
  std::uint64_t seed = 0;
  std::string config_hash;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedArray> tensors;
  std::vector<NamedArray> optimizer;

  const NamedArray* find(const std::string& name) const;
};

Checkpoint capture(Model& model, std::string stage, std::uint64_t seed, std::string config_hash);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Loads every parameter and buffer. Refuses (sqa::Error kShape) unless the
/// checkpoint's architecture hash equals the model's.
void restore(Model& model, const Checkpoint& ckpt);

/// Builds a model with the checkpoint's architecture and loads it.
Model instantiate(const Checkpoint& ckpt);

/// Per parameter group: copied from the source, freshly initialized, or
/// present only in the source.
struct TransferReport {
  std::vector<std::string> carried;
  std::vector<std::string> initialized;
  std::vector<std::string> dropped;

  bool is_carried(const std::string& group) const;
  std::string render() const;
};

/// Copies the shared ConvNet plus any group that exists in both models with
/// identical tensor shapes. The ConvNet descriptors must match exactly.
TransferReport transfer_weights(const Checkpoint& source, Model& target);

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j);

}  // namespace sqa::nn

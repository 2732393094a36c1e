#pragma once

#include "reid/nn/tensor.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace reid {

struct TensorBlob {
  std::string name;
  std::vector<int> shape;
  std::vector<double> values;
};

/// Versioned parameter container shared by every trained component.
///
/// Layout: "RIDCKPT1" | uint32 version | uint64 header bytes | JSON header |
/// float64 little-endian payload. The header carries kind, epoch, rng state,
/// the config snapshot, free-form metadata and the tensor table
/// (name, shape, element offset).
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::string kind;
  int epoch = 0;
  std::string rng_state;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json meta = nlohmann::json::object();
  std::vector<TensorBlob> tensors;

  const TensorBlob *find(const std::string &name) const;
};

std::string serialize_checkpoint(const Checkpoint &ckpt);
Checkpoint parse_checkpoint(const std::string &bytes);
void save_checkpoint(const Checkpoint &ckpt, const std::string &path);
Checkpoint load_checkpoint(const std::string &path);

/// Copy parameter values into the checkpoint under `prefix`.
void store_params(Checkpoint &ckpt, const nn::NamedParams &params, const std::string &prefix);
/// Restore every parameter from `prefix`; a missing tensor or shape mismatch
/// raises FormatError.
void restore_params(const Checkpoint &ckpt, const nn::NamedParams &params,
                    const std::string &prefix);

/// SHA-1 over names, shapes and raw values: a cheap identity for frozen modules.
std::string hash_params(const nn::NamedParams &params);

/// Pretrained-weight manifest: a JSON document
///   {"format": "reid-weights", "version": 1, "dtype": "float32",
///    "architecture": {...}, "tensors": {name: {"shape": [...], "offset": bytes}}}
/// next to a raw little-endian float32 file named by "data" (relative to the
/// manifest directory).
void save_weight_manifest(const nn::NamedParams &params, const nlohmann::json &architecture,
                          const std::string &manifest_path);
nlohmann::json read_weight_architecture(const std::string &manifest_path);
void load_weight_manifest(const std::string &manifest_path, const nn::NamedParams &params);

} // namespace reid

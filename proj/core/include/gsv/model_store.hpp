#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "gsv/training.hpp"

namespace gsv {

inline constexpr int kModelFormatVersion = 1;

/// Checkpoint refused: wrong format, mismatched architecture or a blob that
/// does not match its manifest. `what()` carries the manifest diff.
class ModelStoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  PropagationModels models;
  OptimizerState optimizer;
  std::optional<ToySegmenterParams> segmenter;
};

/// Architecture fields a checkpoint must agree on, including the candidate
/// ordering contract (bank offsets, intra slot last).
nlohmann::json architecture_json(const ModelConfig& config);

/// Writes `manifest.json` and `tensors.bin` (little-endian float32, manifest
/// order) into `dir`, each atomically.
void save_checkpoint(const std::filesystem::path& dir, PropagationModels& models, const OptimizerState& optimizer,
                     ToySegmenterParams* segmenter = nullptr);

/// When `expected` is set the stored architecture must match it exactly.
Checkpoint load_checkpoint(const std::filesystem::path& dir, const std::optional<ModelConfig>& expected = std::nullopt);

}  // namespace gsv

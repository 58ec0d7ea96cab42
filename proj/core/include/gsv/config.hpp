#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "gsv/pipeline.hpp"
#include "gsv/synthetic.hpp"
#include "gsv/training.hpp"

namespace gsv {

struct SegmenterConfig {
  std::string kind = "oracle";  // "oracle" | "toy"
  std::size_t toy_width = 24;
  std::uint64_t toy_iterations = 300;
};

struct BenchConfig {
  std::size_t warmup = 5;
  std::size_t reps = 3;
};

/// Every tunable constant in one place; round-trips through JSON.
struct AppConfig {
  PipelineConfig pipeline;
  ModelConfig model;
  OptimizerConfig optimizer;
  TrainConfig training;
  SyntheticConfig synthetic;
  SegmenterConfig segmenter;
  BenchConfig bench;
  std::uint64_t model_seed = 1;

  void validate() const;
};

nlohmann::json to_json(const AppConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
AppConfig config_from_json(const nlohmann::json& j);
AppConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const AppConfig& c);

nlohmann::json offsets_to_json(const std::vector<Offset>& offsets);
std::vector<Offset> offsets_from_json(const nlohmann::json& j);

}  // namespace gsv

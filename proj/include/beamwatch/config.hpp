#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "beamwatch/dataset.hpp"
#include "beamwatch/model.hpp"
#include "beamwatch/pipeline.hpp"

namespace beamwatch::config {

struct DatasetSection {
  std::size_t episodes = 4000;
  std::size_t episode_length = 13;
  std::size_t observed = 8;  // r
  double split_ratio = 0.7;
  std::uint64_t seed = 42;
};

/// Everything a run needs. Every field has a default, so `{}` is a complete config.
struct RunConfig {
  std::vector<scene::ScenarioConfig> scenarios{scene::ScenarioConfig{}};
  wireless::OfdmConfig wireless{};
  std::size_t codebook_size = 64;  // Q
  DatasetSection dataset{};
  model::ModelConfig model{};  // kind, frame size, r, Q and dropout are filled from the other blocks
  pipeline::TrainConfig train{};
  std::string output_dir = "runs/default";
  int workers = 1;

  /// Field checks of every block plus cross-field consistency.
  void validate() const;

  dataset::GenerationConfig generation() const;
  model::ModelConfig model_config(model::ModelKind kind) const;
  /// SHA-256 (hex) of the blocks that determine dataset contents.
  std::string dataset_hash() const;
};

/// Parses a JSON document. Unknown keys, wrong types and out-of-range values raise
/// ConfigError naming the field path; syntax errors name line and column.
RunConfig parse_run_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);

/// Canonical JSON with every field spelled out.
nlohmann::json to_json(const RunConfig& cfg);

std::string sha256_hex(const std::string& bytes);

}  // namespace beamwatch::config

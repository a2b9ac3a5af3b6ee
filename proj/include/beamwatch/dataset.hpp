#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "beamwatch/rng.hpp"
#include "beamwatch/scene.hpp"
#include "beamwatch/wireless.hpp"

namespace beamwatch::dataset {

using FramePtr = std::shared_ptr<const scene::Frame>;

/// One time step of one user: camera frame, serving beam, link status.
struct Triple {
  FramePtr frame;
  std::uint16_t beam = 0;
  scene::LinkStatus status = scene::LinkStatus::kLos;
};

/// A simulated episode. Frames are shared by every user of the episode.
struct Episode {
  std::uint32_t episode_id = 0;
  std::uint32_t scenario_id = 0;
  double dt = 0.1;
  std::vector<scene::SceneState> states;  // state at each step, before stepping
  std::vector<FramePtr> frames;
  std::vector<std::vector<Triple>> users;  // users[u][t]

  std::size_t length() const { return frames.size(); }
};

struct SampleMeta {
  std::uint32_t episode_id = 0;
  std::uint32_t user_id = 0;
  std::uint32_t scenario_id = 0;
  std::uint32_t start_step = 0;
  double start_time = 0.0;

  friend bool operator==(const SampleMeta&, const SampleMeta&) = default;
};

/// r observed (frame, beam) pairs and the link status one step after the last pair.
struct Sample {
  std::vector<FramePtr> frames;
  std::vector<std::uint16_t> beams;
  scene::LinkStatus label = scene::LinkStatus::kLos;
  SampleMeta meta;

  std::size_t observed() const { return beams.size(); }
};

/// Compares frame contents rather than frame pointers.
bool operator==(const Sample& a, const Sample& b);

struct DatasetHeader {
  std::string split = "train";
  std::string config_hash;
  std::uint64_t codebook_fingerprint = 0;
  std::uint64_t seed = 0;
  std::size_t observed = 8;
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t codebook_size = 0;
  std::size_t episodes = 0;

  friend bool operator==(const DatasetHeader&, const DatasetHeader&) = default;
};

struct Dataset {
  DatasetHeader header;
  std::vector<Sample> samples;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct ClassBalance {
  double p_los = 0.0;
  double p_nlos = 0.0;
};

/// Runs init_scene and then `length` iterations of render / channel / beam selection /
/// link status followed by a scene step.
Episode simulate_episode(const scene::ScenarioConfig& cfg, const wireless::OfdmConfig& ofdm,
                         const wireless::Codebook& codebook, std::size_t length, Rng& rng,
                         std::uint32_t episode_id = 0);

std::vector<Triple> episode_triples(const Episode& episode, std::size_t user_index);

/// Sliding windows: for t = r-1 .. len-2, observed = triples[t-r+1 .. t], label = status[t+1].
std::vector<Sample> make_samples(const std::vector<Triple>& triples, std::size_t r,
                                 SampleMeta base = {}, double dt = 0.0);

/// Splits at episode granularity; `ratio` of the episodes (rounded) go to the first set.
std::pair<std::vector<Sample>, std::vector<Sample>> split_dataset(const std::vector<Sample>& samples,
                                                                  double ratio, Rng& rng);

ClassBalance class_balance(const Dataset& ds);

/// Size in bytes of one stored record.
std::size_t record_size(std::size_t observed, std::size_t width, std::size_t height);

void write_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);

// ---- generation ------------------------------------------------------------

struct GenerationConfig {
  std::vector<scene::ScenarioConfig> scenarios{scene::ScenarioConfig{}};
  wireless::OfdmConfig ofdm{};
  std::size_t codebook_size = 64;
  std::size_t episodes = 4000;
  std::size_t episode_length = 13;
  std::size_t observed = 8;
  double split_ratio = 0.7;
  std::uint64_t seed = 42;
  int workers = 1;
  std::string config_hash;

  void validate() const;
};

struct GenerationResult {
  Dataset train;
  Dataset validation;
  std::size_t train_episodes = 0;
  std::size_t validation_episodes = 0;
};

/// Simulates every episode (in parallel, one RNG substream per episode id) and splits them.
/// Output does not depend on the worker count.
GenerationResult generate(const GenerationConfig& cfg);

}  // namespace beamwatch::dataset

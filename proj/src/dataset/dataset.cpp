#include "beamwatch/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "beamwatch/error.hpp"

namespace beamwatch::dataset {

bool operator==(const Sample& a, const Sample& b) {
  if (!(a.meta == b.meta) || a.label != b.label || a.beams != b.beams ||
      a.frames.size() != b.frames.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.frames.size(); ++i) {
    if (a.frames[i] == b.frames[i]) continue;
    if (!a.frames[i] || !b.frames[i] || !(*a.frames[i] == *b.frames[i])) return false;
  }
  return true;
}

Episode simulate_episode(const scene::ScenarioConfig& cfg, const wireless::OfdmConfig& ofdm,
                         const wireless::Codebook& codebook, std::size_t length, Rng& rng,
                         std::uint32_t episode_id) {
  Episode ep;
  ep.episode_id = episode_id;
  ep.scenario_id = cfg.id;
  ep.dt = cfg.dt;
  scene::SceneState state = scene::init_scene(cfg, rng);
  ep.users.resize(state.users.size());
  for (std::size_t t = 0; t < length; ++t) {
    auto frame = std::make_shared<const scene::Frame>(scene::render(
        state, cfg.raster_width, cfg.raster_height, cfg.user_radius, cfg.bs_radius));
    for (std::size_t u = 0; u < state.users.size(); ++u) {
      const auto id = state.users[u].id;
      const auto paths = scene::paths_for_user(state, id, cfg, ofdm);
      const auto h = wireless::channel(paths, ofdm);
      Triple triple;
      triple.frame = frame;
      triple.beam = static_cast<std::uint16_t>(wireless::beam_select(h, codebook));
      triple.status = scene::los_status(state, id);
      ep.users[u].push_back(std::move(triple));
    }
    ep.states.push_back(state);
    ep.frames.push_back(std::move(frame));
    state = scene::step(state, cfg.dt);
  }
  return ep;
}

std::vector<Triple> episode_triples(const Episode& episode, std::size_t user_index) {
  if (user_index >= episode.users.size()) {
    throw LookupError("episode " + std::to_string(episode.episode_id) + " has no user index " +
                      std::to_string(user_index));
  }
  return episode.users[user_index];
}

std::vector<Sample> make_samples(const std::vector<Triple>& triples, std::size_t r, SampleMeta base,
                                 double dt) {
  if (r == 0) throw ValidationError("make_samples: observation window must be >= 1");
  if (triples.size() < r + 1) {
    throw ValidationError("make_samples: episode of " + std::to_string(triples.size()) +
                          " triples is shorter than r + 1 = " + std::to_string(r + 1));
  }
  std::vector<Sample> out;
  for (std::size_t t = r - 1; t + 1 < triples.size(); ++t) {
    Sample s;
    const std::size_t start = t + 1 - r;
    for (std::size_t i = start; i <= t; ++i) {
      s.frames.push_back(triples[i].frame);
      s.beams.push_back(triples[i].beam);
    }
    s.label = triples[t + 1].status;
    s.meta = base;
    s.meta.start_step = base.start_step + static_cast<std::uint32_t>(start);
    s.meta.start_time = static_cast<double>(s.meta.start_step) * dt;
    out.push_back(std::move(s));
  }
  return out;
}

std::pair<std::vector<Sample>, std::vector<Sample>> split_dataset(const std::vector<Sample>& samples,
                                                                  double ratio, Rng& rng) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw ConfigError("split_dataset: ratio must lie in (0, 1), got " + std::to_string(ratio));
  }
  std::vector<std::uint32_t> episodes;
  std::set<std::uint32_t> seen;
  for (const auto& s : samples) {
    if (seen.insert(s.meta.episode_id).second) episodes.push_back(s.meta.episode_id);
  }
  if (episodes.size() < 2) {
    throw ValidationError("split_dataset: need at least 2 episodes, got " +
                          std::to_string(episodes.size()));
  }
  rng.shuffle(episodes.begin(), episodes.end());
  auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(episodes.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, episodes.size() - 1);
  const std::set<std::uint32_t> train_ids(episodes.begin(), episodes.begin() + static_cast<std::ptrdiff_t>(n_train));

  std::pair<std::vector<Sample>, std::vector<Sample>> out;
  for (const auto& s : samples) {
    (train_ids.count(s.meta.episode_id) ? out.first : out.second).push_back(s);
  }
  return out;
}

ClassBalance class_balance(const Dataset& ds) {
  if (ds.samples.empty()) throw ValidationError("class_balance: dataset is empty");
  std::size_t nlos = 0;
  for (const auto& s : ds.samples) nlos += s.label == scene::LinkStatus::kNlos ? 1 : 0;
  const double n = static_cast<double>(ds.samples.size());
  return {static_cast<double>(ds.samples.size() - nlos) / n, static_cast<double>(nlos) / n};
}

void GenerationConfig::validate() const {
  if (scenarios.empty()) throw ConfigError("dataset: at least one scenario is required");
  for (const auto& sc : scenarios) sc.validate();
  for (const auto& sc : scenarios) {
    if (sc.raster_width != scenarios.front().raster_width ||
        sc.raster_height != scenarios.front().raster_height) {
      throw ConfigError("dataset: all scenarios must share one raster size");
    }
  }
  ofdm.validate();
  if (codebook_size < 2) throw ConfigError("dataset: codebook_size must be >= 2");
  if (codebook_size > 65535) throw ConfigError("dataset: codebook_size must fit in 16 bits");
  if (episodes == 0) throw ConfigError("dataset: episodes must be >= 1");
  if (observed == 0) throw ConfigError("dataset: observed (r) must be >= 1");
  if (observed + 1 > episode_length) {
    throw ConfigError("dataset: observed (r) + 1 must not exceed episode_length");
  }
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ConfigError("dataset: split_ratio must lie in (0, 1)");
}

GenerationResult generate(const GenerationConfig& cfg) {
  cfg.validate();
  if (cfg.episodes < 2) throw ValidationError("dataset: need at least 2 episodes to split");
  const auto codebook = wireless::build_codebook(cfg.ofdm.antennas, cfg.codebook_size);

  std::vector<std::vector<Sample>> per_episode(cfg.episodes);
  const auto n = static_cast<std::int64_t>(cfg.episodes);
#pragma omp parallel for schedule(dynamic, 4) num_threads(std::max(1, cfg.workers))
  for (std::int64_t e = 0; e < n; ++e) {
    const auto id = static_cast<std::uint32_t>(e);
    const auto& scenario = cfg.scenarios[static_cast<std::size_t>(e) % cfg.scenarios.size()];
    Rng rng(derive_seed(cfg.seed, id));
    const Episode ep = simulate_episode(scenario, cfg.ofdm, codebook, cfg.episode_length, rng, id);
    for (std::size_t u = 0; u < ep.users.size(); ++u) {
      SampleMeta base;
      base.episode_id = id;
      base.user_id = static_cast<std::uint32_t>(u);
      base.scenario_id = scenario.id;
      auto windows = make_samples(ep.users[u], cfg.observed, base, ep.dt);
      for (auto& w : windows) per_episode[static_cast<std::size_t>(e)].push_back(std::move(w));
    }
  }
  std::vector<Sample> all;
  for (auto& v : per_episode) {
    for (auto& s : v) all.push_back(std::move(s));
  }

  Rng split_rng(derive_seed(cfg.seed, 0xffffffffULL + 1));
  auto [train, validation] = split_dataset(all, cfg.split_ratio, split_rng);

  GenerationResult out;
  DatasetHeader header;
  header.config_hash = cfg.config_hash;
  header.codebook_fingerprint = codebook.fingerprint();
  header.seed = cfg.seed;
  header.observed = cfg.observed;
  header.width = cfg.scenarios.front().raster_width;
  header.height = cfg.scenarios.front().raster_height;
  header.codebook_size = cfg.codebook_size;

  auto count_episodes = [](const std::vector<Sample>& v) {
    std::set<std::uint32_t> ids;
    for (const auto& s : v) ids.insert(s.meta.episode_id);
    return ids.size();
  };
  out.train_episodes = count_episodes(train);
  out.validation_episodes = count_episodes(validation);
  out.train.header = header;
  out.train.header.split = "train";
  out.train.header.episodes = out.train_episodes;
  out.train.samples = std::move(train);
  out.validation.header = header;
  out.validation.header.split = "validation";
  out.validation.header.episodes = out.validation_episodes;
  out.validation.samples = std::move(validation);
  return out;
}

}  // namespace beamwatch::dataset

#include "beamwatch/config.hpp"

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "beamwatch/error.hpp"

namespace beamwatch::config {

using nlohmann::json;

namespace {

/// Walks one JSON object, reading known keys and rejecting the rest.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) fail(path_.empty() ? "<root>" : path_, "must be an object");
  }

  [[noreturn]] static void fail(const std::string& field, const std::string& why) {
    throw ConfigError("config field '" + field + "' " + why);
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  void read(const std::string& key, std::size_t& out) {
    if (const json* v = find(key)) {
      if (v->is_number_integer() && v->get<std::int64_t>() < 0) fail(field(key), "must be >= 0");
      if (!v->is_number_unsigned()) fail(field(key), "must be a non-negative integer");
      out = v->get<std::size_t>();
    }
  }
  void read(const std::string& key, std::uint32_t& out) {
    std::size_t v = out;
    read(key, v);
    if (v > 0xffffffffULL) fail(field(key), "must fit in 32 bits");
    out = static_cast<std::uint32_t>(v);
  }
  void read(const std::string& key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) fail(field(key), "must be an integer");
      out = v->get<int>();
    }
  }
  void read(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) fail(field(key), "must be a number");
      out = v->get<double>();
    }
  }
  void read(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) fail(field(key), "must be true or false");
      out = v->get<bool>();
    }
  }
  void read(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) fail(field(key), "must be a string");
      out = v->get<std::string>();
    }
  }
  void read(const std::string& key, scene::Vec2& out) {
    if (const json* v = find(key)) {
      if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number()) {
        fail(field(key), "must be a pair of numbers [x, y]");
      }
      out = {(*v)[0].get<double>(), (*v)[1].get<double>()};
    }
  }
  void read(const std::string& key, std::vector<double>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) fail(field(key), "must be an array of numbers");
      out.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        if (!(*v)[i].is_number()) fail(field(key) + "[" + std::to_string(i) + "]", "must be a number");
        out.push_back((*v)[i].get<double>());
      }
    }
  }

  /// Raises on the first key that was never read.
  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      if (!seen_.count(it.key())) fail(field(it.key()), "is not a recognised setting");
    }
  }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

scene::ScenarioConfig parse_scenario(const json& node, const std::string& path, std::uint32_t index) {
  scene::ScenarioConfig s;
  s.id = index;
  s.name = "scenario" + std::to_string(index);
  Section in(node, path);
  in.read("id", s.id);
  in.read("name", s.name);
  in.read("bounds_min", s.bounds.min);
  in.read("bounds_max", s.bounds.max);
  in.read("bs_position", s.bs_position);
  in.read("bs_boresight", s.bs_boresight);
  in.read("user_lanes", s.user_lanes);
  in.read("blocker_lanes", s.blocker_lanes);
  in.read("min_users", s.min_users);
  in.read("max_users", s.max_users);
  in.read("min_blockers", s.min_blockers);
  in.read("max_blockers", s.max_blockers);
  in.read("min_speed", s.min_speed);
  in.read("max_speed", s.max_speed);
  in.read("blocker_half_extents", s.blocker_half_extents);
  in.read("scatterers", s.scatterers);
  in.read("dt", s.dt);
  in.read("raster_width", s.raster_width);
  in.read("raster_height", s.raster_height);
  in.read("user_radius", s.user_radius);
  in.read("bs_radius", s.bs_radius);
  in.read("blockage_penalty_db", s.blockage_penalty_db);
  in.read("reflection_loss_db", s.reflection_loss_db);
  in.read("gain_scale", s.gain_scale);
  in.finish();
  return s;
}

json vec(const scene::Vec2& v) { return json::array({v.x, v.y}); }

json scenario_json(const scene::ScenarioConfig& s) {
  return {{"id", s.id},
          {"name", s.name},
          {"bounds_min", vec(s.bounds.min)},
          {"bounds_max", vec(s.bounds.max)},
          {"bs_position", vec(s.bs_position)},
          {"bs_boresight", s.bs_boresight},
          {"user_lanes", s.user_lanes},
          {"blocker_lanes", s.blocker_lanes},
          {"min_users", s.min_users},
          {"max_users", s.max_users},
          {"min_blockers", s.min_blockers},
          {"max_blockers", s.max_blockers},
          {"min_speed", s.min_speed},
          {"max_speed", s.max_speed},
          {"blocker_half_extents", vec(s.blocker_half_extents)},
          {"scatterers", s.scatterers},
          {"dt", s.dt},
          {"raster_width", s.raster_width},
          {"raster_height", s.raster_height},
          {"user_radius", s.user_radius},
          {"bs_radius", s.bs_radius},
          {"blockage_penalty_db", s.blockage_penalty_db},
          {"reflection_loss_db", s.reflection_loss_db},
          {"gain_scale", s.gain_scale}};
}

json wireless_json(const RunConfig& c) {
  return {{"antennas", c.wireless.antennas},
          {"beams", c.codebook_size},
          {"subcarriers", c.wireless.subcarriers},
          {"cyclic_prefix", c.wireless.cyclic_prefix},
          {"sampling_time", c.wireless.sampling_time}};
}

json dataset_json(const DatasetSection& d) {
  return {{"episodes", d.episodes},
          {"episode_length", d.episode_length},
          {"observed", d.observed},
          {"split_ratio", d.split_ratio},
          {"seed", d.seed}};
}

std::string line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::string& source) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    // byte points one past the offending character.
    const std::size_t at = e.byte > 0 ? e.byte - 1 : 0;
    throw ConfigError(source + ": syntax error at " + line_col(text, at) + ": " + e.what());
  }
  RunConfig c;
  try {
    Section top(root, "");
    if (const json* list = top.find("scenarios")) {
      if (!list->is_array() || list->empty()) Section::fail("scenarios", "must be a non-empty array");
      c.scenarios.clear();
      for (std::size_t i = 0; i < list->size(); ++i) {
        c.scenarios.push_back(
            parse_scenario((*list)[i], "scenarios[" + std::to_string(i) + "]", static_cast<std::uint32_t>(i)));
      }
    }
    if (const json* node = top.find("wireless")) {
      Section in(*node, "wireless");
      in.read("antennas", c.wireless.antennas);
      in.read("beams", c.codebook_size);
      in.read("subcarriers", c.wireless.subcarriers);
      in.read("cyclic_prefix", c.wireless.cyclic_prefix);
      in.read("sampling_time", c.wireless.sampling_time);
      in.finish();
    }
    if (const json* node = top.find("dataset")) {
      Section in(*node, "dataset");
      in.read("episodes", c.dataset.episodes);
      in.read("episode_length", c.dataset.episode_length);
      in.read("observed", c.dataset.observed);
      in.read("split_ratio", c.dataset.split_ratio);
      in.read("seed", c.dataset.seed);
      in.finish();
    }
    if (const json* node = top.find("model")) {
      Section in(*node, "model");
      in.read("conv_blocks", c.model.conv_blocks);
      in.read("conv_channels", c.model.conv_channels);
      in.read("conv_kernel", c.model.conv_kernel);
      in.read("conv_stride", c.model.conv_stride);
      in.read("conv_padding", c.model.conv_padding);
      in.read("pool_window", c.model.pool_window);
      in.read("pool_stride", c.model.pool_stride);
      in.read("dense_hidden", c.model.dense_hidden);
      in.read("embed_dim", c.model.embed_dim);
      in.read("hidden_dim", c.model.hidden_dim);
      in.read("table_seed", c.model.table_seed);
      in.read("init_seed", c.model.init_seed);
      in.finish();
    }
    if (const json* node = top.find("train")) {
      Section in(*node, "train");
      in.read("lr", c.train.lr);
      in.read("batch_size", c.train.batch_size);
      in.read("epochs", c.train.epochs);
      in.read("seed", c.train.seed);
      in.read("dropout", c.train.dropout);
      in.read("eval_every", c.train.eval_every);
      in.read("group_by_episode", c.train.group_by_episode);
      in.finish();
    }
    top.read("output_dir", c.output_dir);
    top.read("workers", c.workers);
    top.finish();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str(), path.string());
}

void RunConfig::validate() const {
  generation().validate();
  if (workers < 1) throw ConfigError("config field 'workers' must be >= 1");
  train.validate();
  model_config(model::ModelKind::kVision).validate();
  model_config(model::ModelKind::kBaseline).validate();
  if (output_dir.empty()) throw ConfigError("config field 'output_dir' must not be empty");
}

dataset::GenerationConfig RunConfig::generation() const {
  dataset::GenerationConfig g;
  g.scenarios = scenarios;
  g.ofdm = wireless;
  g.codebook_size = codebook_size;
  g.episodes = dataset.episodes;
  g.episode_length = dataset.episode_length;
  g.observed = dataset.observed;
  g.split_ratio = dataset.split_ratio;
  g.seed = dataset.seed;
  g.workers = workers;
  g.config_hash = dataset_hash();
  return g;
}

model::ModelConfig RunConfig::model_config(model::ModelKind kind) const {
  model::ModelConfig m = model;
  m.kind = kind;
  m.frame_width = scenarios.front().raster_width;
  m.frame_height = scenarios.front().raster_height;
  m.observed = dataset.observed;
  m.codebook_size = codebook_size;
  m.dropout = train.dropout;
  return m;
}

std::string RunConfig::dataset_hash() const {
  json scen = json::array();
  for (const auto& s : scenarios) scen.push_back(scenario_json(s));
  const json j = {{"scenarios", scen}, {"wireless", wireless_json(*this)}, {"dataset", dataset_json(dataset)}};
  return sha256_hex(j.dump());
}

json to_json(const RunConfig& c) {
  json scen = json::array();
  for (const auto& s : c.scenarios) scen.push_back(scenario_json(s));
  const auto& m = c.model;
  return {{"scenarios", scen},
          {"wireless", wireless_json(c)},
          {"dataset", dataset_json(c.dataset)},
          {"model",
           {{"conv_blocks", m.conv_blocks},
            {"conv_channels", m.conv_channels},
            {"conv_kernel", m.conv_kernel},
            {"conv_stride", m.conv_stride},
            {"conv_padding", m.conv_padding},
            {"pool_window", m.pool_window},
            {"pool_stride", m.pool_stride},
            {"dense_hidden", m.dense_hidden},
            {"embed_dim", m.embed_dim},
            {"hidden_dim", m.hidden_dim},
            {"table_seed", m.table_seed},
            {"init_seed", m.init_seed}}},
          {"train",
           {{"lr", c.train.lr},
            {"batch_size", c.train.batch_size},
            {"epochs", c.train.epochs},
            {"seed", c.train.seed},
            {"dropout", c.train.dropout},
            {"eval_every", c.train.eval_every},
            {"group_by_episode", c.train.group_by_episode}}},
          {"output_dir", c.output_dir},
          {"workers", c.workers}};
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256: digest failed");
  }
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return out.str();
}

}  // namespace beamwatch::config

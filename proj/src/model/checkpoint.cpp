#include <nlohmann/json.hpp>

#include "beamwatch/binary_io.hpp"
#include "beamwatch/error.hpp"
#include "beamwatch/model.hpp"

namespace beamwatch::model {

namespace {

constexpr char kMagic[4] = {'B', 'W', 'C', 'K'};
constexpr std::uint16_t kVersion = 1;

using nlohmann::json;

json config_to_json(const ModelConfig& c) {
  return json{{"kind", to_string(c.kind)},
              {"frame_width", c.frame_width},
              {"frame_height", c.frame_height},
              {"conv_blocks", c.conv_blocks},
              {"conv_channels", c.conv_channels},
              {"conv_kernel", c.conv_kernel},
              {"conv_stride", c.conv_stride},
              {"conv_padding", c.conv_padding},
              {"pool_window", c.pool_window},
              {"pool_stride", c.pool_stride},
              {"dense_hidden", c.dense_hidden},
              {"embed_dim", c.embed_dim},
              {"hidden_dim", c.hidden_dim},
              {"classes", c.classes},
              {"observed", c.observed},
              {"codebook_size", c.codebook_size},
              {"dropout", c.dropout},
              {"table_seed", c.table_seed},
              {"init_seed", c.init_seed}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.kind = parse_model_kind(j.at("kind").get<std::string>());
  c.frame_width = j.at("frame_width").get<std::size_t>();
  c.frame_height = j.at("frame_height").get<std::size_t>();
  c.conv_blocks = j.at("conv_blocks").get<std::size_t>();
  c.conv_channels = j.at("conv_channels").get<std::size_t>();
  c.conv_kernel = j.at("conv_kernel").get<std::size_t>();
  c.conv_stride = j.at("conv_stride").get<std::size_t>();
  c.conv_padding = j.at("conv_padding").get<std::size_t>();
  c.pool_window = j.at("pool_window").get<std::size_t>();
  c.pool_stride = j.at("pool_stride").get<std::size_t>();
  c.dense_hidden = j.at("dense_hidden").get<std::size_t>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.classes = j.at("classes").get<std::size_t>();
  c.observed = j.at("observed").get<std::size_t>();
  c.codebook_size = j.at("codebook_size").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  c.table_seed = j.at("table_seed").get<std::uint64_t>();
  c.init_seed = j.at("init_seed").get<std::uint64_t>();
  return c;
}

std::string shape_list(const numerics::Shape& s) { return numerics::shape_string(s); }

struct ParsedCheckpoint {
  ModelConfig config;
  CheckpointInfo info;
  std::vector<std::size_t> bn_updates;
  std::uint64_t table_fingerprint = 0;
  std::vector<std::string> names;
  std::vector<numerics::Shape> shapes;
  std::vector<std::vector<float>> values;
};

ParsedCheckpoint parse(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path.string());
  const std::string ctx = "checkpoint " + path.string();
  io::ByteReader in(bytes.data(), bytes.size(), ctx);
  const auto* magic = in.take(4);
  if (!std::equal(magic, magic + 4, kMagic)) {
    throw FormatError(FormatError::Kind::kBadMagic, ctx + ": not a checkpoint (bad magic)");
  }
  const auto version = in.get<std::uint16_t>();
  if (version != kVersion) {
    throw FormatError(FormatError::Kind::kVersionMismatch,
                      ctx + ": format version " + std::to_string(version) + ", this build reads version " +
                          std::to_string(kVersion));
  }
  const auto json_len = in.get<std::uint32_t>();
  const auto* json_bytes = in.take(json_len);
  const auto json_crc = in.get<std::uint32_t>();
  if (io::crc32(json_bytes, json_len) != json_crc) {
    throw FormatError(FormatError::Kind::kChecksum, ctx + ": manifest checksum mismatch");
  }
  ParsedCheckpoint out;
  try {
    const json manifest = json::parse(json_bytes, json_bytes + json_len);
    out.config = config_from_json(manifest.at("architecture"));
    const auto& info = manifest.at("info");
    out.info.codebook_fingerprint = info.at("codebook_fingerprint").get<std::uint64_t>();
    out.info.dataset_config_hash = info.at("dataset_config_hash").get<std::string>();
    out.info.train_seed = info.at("train_seed").get<std::uint64_t>();
    out.info.iteration = info.at("iteration").get<std::int64_t>();
    out.bn_updates = manifest.at("batchnorm_updates").get<std::vector<std::size_t>>();
    out.table_fingerprint = manifest.at("beam_table_fingerprint").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw FormatError(FormatError::Kind::kMalformed, ctx + ": bad manifest: " + e.what());
  }

  const auto count = in.get<std::uint32_t>();
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::size_t start = in.offset();
    const auto name = in.get_string(in.get<std::uint16_t>());
    const auto rank = in.get<std::uint32_t>();
    numerics::Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(in.get<std::uint64_t>());
    const std::size_t n = numerics::shape_numel(shape);
    if (n > in.remaining() / 4) {
      throw FormatError(FormatError::Kind::kTruncated, ctx + ": tensor '" + name + "' runs past end of file");
    }
    std::vector<float> values(n);
    for (auto& v : values) v = in.get<float>();
    const std::size_t end = in.offset();
    const auto crc = in.get<std::uint32_t>();
    if (io::crc32(bytes.data() + start, end - start) != crc) {
      throw FormatError(FormatError::Kind::kChecksum, ctx + ": checksum mismatch in tensor '" + name + "'");
    }
    out.names.push_back(name);
    out.shapes.push_back(std::move(shape));
    out.values.push_back(std::move(values));
  }
  if (in.remaining() != 0) {
    throw FormatError(FormatError::Kind::kMalformed,
                      ctx + ": " + std::to_string(in.remaining()) + " trailing byte(s)");
  }
  return out;
}

LoadedCheckpoint materialize(ParsedCheckpoint parsed, const ModelConfig& config, const std::string& ctx) {
  Model<float> model(config);
  auto tensors = model.named_tensors();
  if (tensors.size() != parsed.names.size()) {
    throw DimensionError(ctx + ": checkpoint holds " + std::to_string(parsed.names.size()) +
                         " tensors, model expects " + std::to_string(tensors.size()));
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    auto& [name, tensor] = tensors[i];
    if (parsed.names[i] != name) {
      throw DimensionError(ctx + ": expected tensor '" + name + "', found '" + parsed.names[i] + "'");
    }
    if (parsed.shapes[i] != tensor.shape()) {
      throw DimensionError(ctx + ": tensor '" + name + "' has shape " + shape_list(parsed.shapes[i]) +
                           ", model expects " + shape_list(tensor.shape()));
    }
    std::copy(parsed.values[i].begin(), parsed.values[i].end(), tensor.values().begin());
  }
  model.set_batchnorm_updates(parsed.bn_updates);
  if (model.beam_table().fingerprint() != parsed.table_fingerprint) {
    throw CompatibilityError(ctx + ": beam embedding table differs from the one used in training");
  }
  return LoadedCheckpoint{std::move(model), parsed.info};
}

}  // namespace

void save_checkpoint(const Model<float>& model, const CheckpointInfo& info,
                     const std::filesystem::path& path) {
  const auto tensors = model.named_tensors();
  json manifest;
  manifest["architecture"] = config_to_json(model.config());
  manifest["info"] = json{{"codebook_fingerprint", info.codebook_fingerprint},
                          {"dataset_config_hash", info.dataset_config_hash},
                          {"train_seed", info.train_seed},
                          {"iteration", info.iteration}};
  manifest["batchnorm_updates"] = model.batchnorm_updates();
  manifest["beam_table_fingerprint"] = model.beam_table().fingerprint();
  json names = json::array();
  for (const auto& [name, t] : tensors) names.push_back(name);
  manifest["tensors"] = names;
  const std::string text = manifest.dump();

  io::ByteWriter out;
  out.put_bytes(kMagic, 4);
  out.put<std::uint16_t>(kVersion);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(text.size()));
  out.put_string(text);
  out.put<std::uint32_t>(io::crc32(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    const std::size_t start = out.size();
    out.put<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
    out.put_string(name);
    out.put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) out.put<std::uint64_t>(d);
    for (float v : t.values()) out.put<float>(v);
    out.put<std::uint32_t>(io::crc32(out.buffer().data() + start, out.size() - start));
  }
  io::write_file(path.string(), out.buffer());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  auto parsed = parse(path);
  const ModelConfig config = parsed.config;
  return materialize(std::move(parsed), config, "checkpoint " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
  return materialize(parse(path), expected, "checkpoint " + path.string());
}

}  // namespace beamwatch::model

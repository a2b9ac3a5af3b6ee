// BWDS dataset files, all integers little-endian:
//   "BWDS" | u16 version | u32 header length | JSON header
//   | u64 record offset x count | u32 CRC of (JSON header + offsets)
//   | records
// record: u32 episode | u32 user | u32 scenario | u32 start step | f64 start time
//         | r x (W*H*3 u8 pixels, channel-planar, + u16 beam) | u8 label | u32 CRC of record

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>
#include <nlohmann/json.hpp>

#include "beamwatch/binary_io.hpp"
#include "beamwatch/dataset.hpp"
#include "beamwatch/error.hpp"

namespace beamwatch::dataset {

namespace {

constexpr char kMagic[4] = {'B', 'W', 'D', 'S'};
constexpr std::uint16_t kVersion = 1;
constexpr std::size_t kMetaBytes = 4 * 4 + 8;

nlohmann::json header_json(const DatasetHeader& h, std::size_t count) {
  return {{"split", h.split},
          {"config_hash", h.config_hash},
          {"codebook_fingerprint", h.codebook_fingerprint},
          {"seed", h.seed},
          {"r", h.observed},
          {"W", h.width},
          {"H", h.height},
          {"Q", h.codebook_size},
          {"counts", {{"samples", count}, {"episodes", h.episodes}}}};
}

std::uint8_t quantize(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

}  // namespace

std::size_t record_size(std::size_t observed, std::size_t width, std::size_t height) {
  return kMetaBytes + observed * (width * height * scene::Frame::kChannels + 2) + 1 + 4;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& path) {
  const auto& h = ds.header;
  const std::size_t pixels = h.width * h.height * scene::Frame::kChannels;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    if (s.observed() != h.observed || s.frames.size() != h.observed) {
      throw ValidationError("write_dataset: sample " + std::to_string(i) + " has " +
                            std::to_string(s.observed()) + " observed pairs, header says " +
                            std::to_string(h.observed));
    }
    for (const auto& f : s.frames) {
      if (!f || f->pixels.size() != pixels) {
        throw ValidationError("write_dataset: sample " + std::to_string(i) +
                              " frame does not match header raster");
      }
    }
  }

  const std::string json = header_json(h, ds.samples.size()).dump();
  const std::size_t rec = record_size(h.observed, h.width, h.height);
  const std::size_t data_start = 4 + 2 + 4 + json.size() + 8 * ds.samples.size() + 4;

  io::ByteWriter w;
  w.reserve(data_start + rec * ds.samples.size());
  w.put_bytes(kMagic, 4);
  w.put<std::uint16_t>(kVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(json.size()));
  const std::size_t crc_start = w.size();
  w.put_string(json);
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    w.put<std::uint64_t>(static_cast<std::uint64_t>(data_start + i * rec));
  }
  w.put<std::uint32_t>(io::crc32(w.buffer().data() + crc_start, w.size() - crc_start));

  // Overlapping windows share frames, so each frame is quantized once.
  std::unordered_map<const scene::Frame*, std::vector<std::uint8_t>> quantized;
  auto bytes_of = [&](const scene::Frame* f) -> const std::vector<std::uint8_t>& {
    auto [it, inserted] = quantized.try_emplace(f);
    if (inserted) {
      it->second.reserve(f->pixels.size());
      for (float v : f->pixels) it->second.push_back(quantize(v));
    }
    return it->second;
  };
  for (const auto& s : ds.samples) {
    const std::size_t begin = w.size();
    w.put<std::uint32_t>(s.meta.episode_id);
    w.put<std::uint32_t>(s.meta.user_id);
    w.put<std::uint32_t>(s.meta.scenario_id);
    w.put<std::uint32_t>(s.meta.start_step);
    w.put<double>(s.meta.start_time);
    for (std::size_t i = 0; i < s.observed(); ++i) {
      const auto& q = bytes_of(s.frames[i].get());
      w.put_bytes(q.data(), q.size());
      w.put<std::uint16_t>(s.beams[i]);
    }
    w.put<std::uint8_t>(static_cast<std::uint8_t>(s.label));
    w.put<std::uint32_t>(io::crc32(w.buffer().data() + begin, w.size() - begin));
  }
  io::write_file(path.string(), w.buffer());
}

Dataset read_dataset(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path.string());
  const std::string ctx = "dataset " + path.string();
  io::ByteReader r(bytes.data(), bytes.size(), ctx);

  const std::string magic = r.get_string(4);
  if (magic != std::string(kMagic, 4)) {
    throw FormatError(FormatError::Kind::kBadMagic, ctx + ": bad magic, not a BWDS file");
  }
  const auto version = r.get<std::uint16_t>();
  if (version != kVersion) {
    throw FormatError(FormatError::Kind::kVersionMismatch,
                      ctx + ": version " + std::to_string(version) + ", expected " +
                          std::to_string(kVersion));
  }
  const auto json_len = r.get<std::uint32_t>();
  const std::size_t crc_start = r.offset();
  const std::string text = r.get_string(json_len);

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatError::Kind::kChecksum, ctx + ": header is not valid JSON (" + e.what() + ")");
  }
  Dataset ds;
  std::size_t count = 0;
  try {
    auto& h = ds.header;
    h.split = j.at("split").get<std::string>();
    h.config_hash = j.at("config_hash").get<std::string>();
    h.codebook_fingerprint = j.at("codebook_fingerprint").get<std::uint64_t>();
    h.seed = j.at("seed").get<std::uint64_t>();
    h.observed = j.at("r").get<std::size_t>();
    h.width = j.at("W").get<std::size_t>();
    h.height = j.at("H").get<std::size_t>();
    h.codebook_size = j.at("Q").get<std::size_t>();
    h.episodes = j.at("counts").at("episodes").get<std::size_t>();
    count = j.at("counts").at("samples").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatError::Kind::kMalformed, ctx + ": header field error (" + e.what() + ")");
  }

  std::vector<std::uint64_t> offsets(count);
  if (count > r.remaining() / 8) {
    throw FormatError(FormatError::Kind::kTruncated, ctx + ": record index truncated");
  }
  for (auto& o : offsets) o = r.get<std::uint64_t>();
  const std::size_t crc_end = r.offset();
  const auto header_crc = r.get<std::uint32_t>();
  if (header_crc != io::crc32(bytes.data() + crc_start, crc_end - crc_start)) {
    throw FormatError(FormatError::Kind::kChecksum, ctx + ": header/index checksum mismatch");
  }

  const auto& h = ds.header;
  const std::size_t rec = record_size(h.observed, h.width, h.height);
  const std::size_t pixels = h.width * h.height * scene::Frame::kChannels;
  // Frames are shared between overlapping windows of the same episode.
  std::map<std::pair<std::uint32_t, std::uint32_t>, FramePtr> frame_cache;
  ds.samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    r.seek(static_cast<std::size_t>(offsets[i]));
    const std::size_t begin = r.offset();
    const std::uint8_t* raw = r.take(rec);
    io::ByteReader rr(raw, rec, ctx + " record " + std::to_string(i));
    const std::uint32_t stored_crc = [&] {
      io::ByteReader tail(raw + rec - 4, 4, ctx);
      return tail.get<std::uint32_t>();
    }();
    if (stored_crc != io::crc32(bytes.data() + begin, rec - 4)) {
      throw FormatError(FormatError::Kind::kChecksum,
                        ctx + ": checksum mismatch in record " + std::to_string(i));
    }
    Sample s;
    s.meta.episode_id = rr.get<std::uint32_t>();
    s.meta.user_id = rr.get<std::uint32_t>();
    s.meta.scenario_id = rr.get<std::uint32_t>();
    s.meta.start_step = rr.get<std::uint32_t>();
    s.meta.start_time = rr.get<double>();
    for (std::size_t t = 0; t < h.observed; ++t) {
      const std::uint8_t* px = rr.take(pixels);
      const auto beam = rr.get<std::uint16_t>();
      const auto key = std::make_pair(s.meta.episode_id, s.meta.start_step + static_cast<std::uint32_t>(t));
      auto frame = std::make_shared<scene::Frame>();
      frame->width = h.width;
      frame->height = h.height;
      frame->pixels.resize(pixels);
      for (std::size_t p = 0; p < pixels; ++p) frame->pixels[p] = static_cast<float>(px[p]) / 255.0f;
      auto it = frame_cache.find(key);
      if (it != frame_cache.end() && *it->second == *frame) {
        s.frames.push_back(it->second);
      } else {
        frame_cache[key] = frame;
        s.frames.push_back(std::move(frame));
      }
      s.beams.push_back(beam);
    }
    const auto label = rr.get<std::uint8_t>();
    if (label > 1) {
      throw FormatError(FormatError::Kind::kMalformed,
                        ctx + ": record " + std::to_string(i) + " has label " + std::to_string(label));
    }
    s.label = static_cast<scene::LinkStatus>(label);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace beamwatch::dataset

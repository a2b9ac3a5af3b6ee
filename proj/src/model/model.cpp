#include "beamwatch/model.hpp"

#include <bit>
#include <cmath>

#include "beamwatch/error.hpp"
#include "beamwatch/numerics/init.hpp"

namespace beamwatch::model {

using numerics::Shape;

std::string to_string(ModelKind kind) { return kind == ModelKind::kVision ? "vision" : "baseline"; }

ModelKind parse_model_kind(const std::string& text) {
  if (text == "vision") return ModelKind::kVision;
  if (text == "baseline") return ModelKind::kBaseline;
  throw ConfigError("unknown model '" + text + "'; valid options: vision, baseline");
}

std::size_t ModelConfig::sequence_length() const {
  return kind == ModelKind::kVision ? 2 * observed : observed;
}

std::size_t ModelConfig::flat_features() const {
  std::size_t h = frame_height;
  std::size_t w = frame_width;
  for (std::size_t b = 0; b < conv_blocks; ++b) {
    h = (h + 2 * conv_padding - conv_kernel) / conv_stride + 1;
    w = (w + 2 * conv_padding - conv_kernel) / conv_stride + 1;
    h = (h - pool_window) / pool_stride + 1;
    w = (w - pool_window) / pool_stride + 1;
  }
  return conv_channels * h * w;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("model: " + what); };
  if (observed == 0) fail("observed (r) must be >= 1");
  if (hidden_dim == 0 || embed_dim == 0) fail("hidden_dim and embed_dim must be >= 1");
  if (classes != 2) fail("classes must be 2 (LOS / NLOS)");
  if (codebook_size < 2) fail("codebook_size must be >= 2");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
  if (kind == ModelKind::kVision) {
    if (conv_blocks == 0 || conv_channels == 0 || dense_hidden == 0) {
      fail("conv_blocks, conv_channels and dense_hidden must be >= 1");
    }
    if (conv_stride == 0 || pool_stride == 0 || pool_window == 0 || conv_kernel == 0) {
      fail("kernel, window and stride sizes must be >= 1");
    }
    std::size_t h = frame_height;
    std::size_t w = frame_width;
    for (std::size_t b = 0; b < conv_blocks; ++b) {
      if (conv_kernel > h + 2 * conv_padding || conv_kernel > w + 2 * conv_padding) {
        fail("conv kernel larger than feature map at block " + std::to_string(b));
      }
      h = (h + 2 * conv_padding - conv_kernel) / conv_stride + 1;
      w = (w + 2 * conv_padding - conv_kernel) / conv_stride + 1;
      if (pool_window > h || pool_window > w) {
        fail("pool window larger than feature map at block " + std::to_string(b));
      }
      h = (h - pool_window) / pool_stride + 1;
      w = (w - pool_window) / pool_stride + 1;
    }
  }
}

std::vector<SequenceStep> sequence_layout(ModelKind kind, std::size_t observed) {
  std::vector<SequenceStep> steps;
  for (std::size_t i = 0; i < observed; ++i) {
    if (kind == ModelKind::kVision) steps.push_back({SequenceStep::Source::kImage, i});
    steps.push_back({SequenceStep::Source::kBeam, i});
  }
  return steps;
}

// ---- beam embedding table --------------------------------------------------

template <typename T>
BeamEmbeddingTable<T> BeamEmbeddingTable<T>::generate(std::uint64_t seed, std::size_t rows,
                                                      std::size_t dim) {
  BeamEmbeddingTable t;
  t.rows = rows;
  t.dim = dim;
  t.seed = seed;
  std::vector<T> values(rows * dim);
  Rng rng(seed);
  for (auto& v : values) v = static_cast<T>(rng.normal());
  t.table = Tensor<T>(Shape{rows, dim}, std::move(values), false);
  return t;
}

template <typename T>
std::vector<T> BeamEmbeddingTable<T>::embed(std::size_t index) const {
  if (index >= rows) {
    throw LookupError("beam embedding: index " + std::to_string(index) + " outside codebook of " +
                      std::to_string(rows));
  }
  const T* row = table.data() + index * dim;
  return std::vector<T>(row, row + dim);
}

template <typename T>
std::uint64_t BeamEmbeddingTable<T>::fingerprint() const {
  std::uint64_t acc = mix64(rows) ^ mix64(dim + 1);
  for (T v : table.values()) {
    acc = mix64(acc ^ std::bit_cast<std::uint64_t>(static_cast<double>(v)));
  }
  return acc;
}

// ---- model -------------------------------------------------------------------

namespace {

template <typename T>
numerics::GruCellParams<T> make_gru(std::size_t input, std::size_t hidden, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  numerics::GruCellParams<T> p;
  for (auto* w : {&p.w_z, &p.w_r, &p.w_n}) {
    *w = Tensor<T>(Shape{hidden, input}, true);
    numerics::fill_uniform(*w, bound, rng);
  }
  for (auto* u : {&p.u_z, &p.u_r, &p.u_n}) {
    *u = Tensor<T>(Shape{hidden, hidden}, true);
    numerics::fill_uniform(*u, bound, rng);
  }
  for (auto* b : {&p.b_z, &p.b_r, &p.b_n}) *b = Tensor<T>(Shape{hidden}, true);
  return p;
}

template <typename T>
void append_gru(std::vector<std::pair<std::string, Tensor<T>>>& out, const std::string& prefix,
                const numerics::GruCellParams<T>& p) {
  out.emplace_back(prefix + ".w_z", p.w_z);
  out.emplace_back(prefix + ".w_r", p.w_r);
  out.emplace_back(prefix + ".w_n", p.w_n);
  out.emplace_back(prefix + ".u_z", p.u_z);
  out.emplace_back(prefix + ".u_r", p.u_r);
  out.emplace_back(prefix + ".u_n", p.u_n);
  out.emplace_back(prefix + ".b_z", p.b_z);
  out.emplace_back(prefix + ".b_r", p.b_r);
  out.emplace_back(prefix + ".b_n", p.b_n);
}

}  // namespace

template <typename T>
Model<T>::Model(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  table_ = BeamEmbeddingTable<T>::generate(config_.table_seed, config_.codebook_size, config_.embed_dim);
  Rng rng(config_.init_seed);
  const std::size_t k = config_.conv_kernel;
  if (config_.kind == ModelKind::kVision) {
    std::size_t in_channels = scene::Frame::kChannels;
    for (std::size_t b = 0; b < config_.conv_blocks; ++b) {
      ConvBlock<T> block;
      block.kernels = Tensor<T>(Shape{config_.conv_channels, in_channels, k, k}, true);
      numerics::fill_glorot(block.kernels, in_channels * k * k, config_.conv_channels * k * k, rng);
      block.gamma = Tensor<T>(Shape{config_.conv_channels}, std::vector<T>(config_.conv_channels, T{1}), true);
      block.beta = Tensor<T>(Shape{config_.conv_channels}, true);
      block.bn = numerics::BatchNormState<T>(config_.conv_channels);
      embedder_.blocks.push_back(std::move(block));
      in_channels = config_.conv_channels;
    }
    const std::size_t flat = config_.flat_features();
    embedder_.fc1_weight = Tensor<T>(Shape{config_.dense_hidden, flat}, true);
    numerics::fill_glorot(embedder_.fc1_weight, flat, config_.dense_hidden, rng);
    embedder_.fc1_bias = Tensor<T>(Shape{config_.dense_hidden}, true);
    embedder_.fc2_weight = Tensor<T>(Shape{config_.embed_dim, config_.dense_hidden}, true);
    numerics::fill_glorot(embedder_.fc2_weight, config_.dense_hidden, config_.embed_dim, rng);
    embedder_.fc2_bias = Tensor<T>(Shape{config_.embed_dim}, true);
  }
  predictor_.gru1 = make_gru<T>(config_.embed_dim, config_.hidden_dim, rng);
  predictor_.gru2 = make_gru<T>(config_.hidden_dim, config_.hidden_dim, rng);
  predictor_.classifier_weight = Tensor<T>(Shape{config_.classes, config_.hidden_dim}, true);
  numerics::fill_glorot(predictor_.classifier_weight, config_.hidden_dim, config_.classes, rng);
  predictor_.classifier_bias = Tensor<T>(Shape{config_.classes}, true);

  for (auto& [name, t] : named_tensors()) t.set_name(name);
}

template <typename T>
Model<T> Model<T>::deep_copy() const {
  Model copy(config_);
  copy.load_values_from(*this);
  return copy;
}

template <typename T>
void Model<T>::load_values_from(const Model& other) {
  if (!(other.config_ == config_)) throw ConfigError("model: cannot copy values across configs");
  auto dst = named_tensors();
  auto src = other.named_tensors();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    std::copy(src[i].second.values().begin(), src[i].second.values().end(),
              dst[i].second.values().begin());
  }
  set_batchnorm_updates(other.batchnorm_updates());
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> Model<T>::named_tensors() const {
  std::vector<std::pair<std::string, Tensor<T>>> out;
  for (std::size_t b = 0; b < embedder_.blocks.size(); ++b) {
    const auto& block = embedder_.blocks[b];
    const std::string prefix = "embedder.block" + std::to_string(b);
    out.emplace_back(prefix + ".kernels", block.kernels);
    out.emplace_back(prefix + ".gamma", block.gamma);
    out.emplace_back(prefix + ".beta", block.beta);
    out.emplace_back(prefix + ".running_mean", block.bn.running_mean);
    out.emplace_back(prefix + ".running_var", block.bn.running_var);
  }
  if (config_.kind == ModelKind::kVision) {
    out.emplace_back("embedder.fc1.weight", embedder_.fc1_weight);
    out.emplace_back("embedder.fc1.bias", embedder_.fc1_bias);
    out.emplace_back("embedder.fc2.weight", embedder_.fc2_weight);
    out.emplace_back("embedder.fc2.bias", embedder_.fc2_bias);
  }
  append_gru(out, "gru1", predictor_.gru1);
  append_gru(out, "gru2", predictor_.gru2);
  out.emplace_back("classifier.weight", predictor_.classifier_weight);
  out.emplace_back("classifier.bias", predictor_.classifier_bias);
  return out;
}

template <typename T>
std::vector<Tensor<T>> Model<T>::parameters() const {
  std::vector<Tensor<T>> out;
  for (auto& [name, t] : named_tensors()) {
    if (t.requires_grad()) out.push_back(t);
  }
  return out;
}

template <typename T>
std::vector<std::size_t> Model<T>::batchnorm_updates() const {
  std::vector<std::size_t> out;
  for (const auto& block : embedder_.blocks) out.push_back(block.bn.updates);
  return out;
}

template <typename T>
void Model<T>::set_batchnorm_updates(const std::vector<std::size_t>& updates) {
  if (updates.size() != embedder_.blocks.size()) {
    throw DimensionError("model: " + std::to_string(updates.size()) + " batch-norm counters for " +
                         std::to_string(embedder_.blocks.size()) + " blocks");
  }
  for (std::size_t i = 0; i < updates.size(); ++i) embedder_.blocks[i].bn.updates = updates[i];
}

template <typename T>
std::size_t Model<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.numel();
  return n;
}

template <typename T>
Tensor<T> Model<T>::embed_images(const std::vector<const scene::Frame*>& frames, Mode mode) {
  if (config_.kind != ModelKind::kVision) {
    throw ConfigError("model: the baseline has no image embedder");
  }
  const std::size_t w = config_.frame_width;
  const std::size_t h = config_.frame_height;
  const std::size_t c = scene::Frame::kChannels;
  Tensor<T> x(Shape{frames.size(), c, h, w});
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const auto* frame = frames[f];
    if (frame->width != w || frame->height != h || frame->pixels.size() != c * w * h) {
      throw DimensionError("embed_image: expected " + std::to_string(w) + "x" + std::to_string(h) +
                           "x3 frame, got " + std::to_string(frame->width) + "x" +
                           std::to_string(frame->height) + "x" +
                           std::to_string(frame->pixels.size() / std::max<std::size_t>(1, frame->width * frame->height)));
    }
    std::copy(frame->pixels.begin(), frame->pixels.end(), x.data() + f * c * h * w);
  }
  Tensor<T> act = x;
  for (auto& block : embedder_.blocks) {
    act = numerics::conv2d(act, block.kernels, config_.conv_stride, config_.conv_padding);
    act = numerics::batchnorm2d(act, block.gamma, block.beta, block.bn, mode);
    act = numerics::maxpool2d(act, config_.pool_window, config_.pool_stride);
  }
  act = numerics::flatten(act);
  act = numerics::relu(numerics::dense(act, embedder_.fc1_weight, embedder_.fc1_bias));
  return numerics::dense(act, embedder_.fc2_weight, embedder_.fc2_bias);
}

template <typename T>
Tensor<T> Model<T>::embed_beams(const std::vector<std::uint16_t>& beams) const {
  Tensor<T> out(Shape{beams.size(), config_.embed_dim});
  for (std::size_t i = 0; i < beams.size(); ++i) {
    if (beams[i] >= table_.rows) {
      throw LookupError("beam embedding: index " + std::to_string(beams[i]) +
                        " outside codebook of " + std::to_string(table_.rows));
    }
    std::copy_n(table_.table.data() + static_cast<std::size_t>(beams[i]) * config_.embed_dim,
                config_.embed_dim, out.data() + i * config_.embed_dim);
  }
  return out;
}

template <typename T>
Tensor<T> Model<T>::forward(const BatchInput& input, Mode mode, Rng& rng) {
  const std::size_t r = config_.observed;
  const std::size_t batch = input.batch;
  if (input.observed != r || input.beams.size() != batch * r) {
    throw ValidationError("predict: expected sequences of " + std::to_string(r) +
                          " observations, got " + std::to_string(input.observed) + " (" +
                          std::to_string(input.beams.size()) + " beams for " +
                          std::to_string(batch) + " sequences)");
  }
  Tensor<T> images;
  if (config_.kind == ModelKind::kVision) {
    if (input.frame_index.size() != batch * r) {
      throw ValidationError("predict: expected " + std::to_string(batch * r) + " frame references, got " +
                            std::to_string(input.frame_index.size()));
    }
    images = embed_images(input.frames, mode);
  }
  const Tensor<T> beam_embeddings = embed_beams(input.beams);

  const std::size_t hidden = config_.hidden_dim;
  Tensor<T> h1(Shape{batch, hidden});
  Tensor<T> h2(Shape{batch, hidden});
  std::vector<std::size_t> rows(batch);
  for (const auto& step : sequence_layout(config_.kind, r)) {
    Tensor<T> x;
    if (step.source == SequenceStep::Source::kImage) {
      for (std::size_t b = 0; b < batch; ++b) rows[b] = input.frame_index[b * r + step.index];
      x = numerics::gather_rows(images, rows);
    } else {
      for (std::size_t b = 0; b < batch; ++b) rows[b] = b * r + step.index;
      x = numerics::gather_rows(beam_embeddings, rows);
    }
    h1 = numerics::gru_cell(x, h1, predictor_.gru1);
    const Tensor<T> dropped = numerics::dropout(h1, config_.dropout, mode, rng);
    h2 = numerics::gru_cell(dropped, h2, predictor_.gru2);
  }
  return numerics::dense(h2, predictor_.classifier_weight, predictor_.classifier_bias);
}

namespace {

template <typename T>
std::array<double, 2> to_probabilities(const Tensor<T>& logits) {
  const auto probs = numerics::softmax(logits);
  return {static_cast<double>(probs.data()[0]), static_cast<double>(probs.data()[1])};
}

}  // namespace

template <typename T>
std::array<double, 2> predict(Model<T>& model, const std::vector<const scene::Frame*>& frames,
                              const std::vector<std::uint16_t>& beams, Mode mode, Rng& rng) {
  const std::size_t r = model.config().observed;
  if (beams.size() != r || (model.config().kind == ModelKind::kVision && frames.size() != r)) {
    throw ValidationError("predict: expected exactly " + std::to_string(r) + " (frame, beam) pairs, got " +
                          std::to_string(frames.size()) + " frames and " + std::to_string(beams.size()) +
                          " beams");
  }
  BatchInput in;
  in.batch = 1;
  in.observed = r;
  in.beams = beams;
  if (model.config().kind == ModelKind::kVision) {
    in.frames = frames;
    for (std::size_t i = 0; i < r; ++i) in.frame_index.push_back(i);
  }
  numerics::NoGradGuard no_grad;
  return to_probabilities(model.forward(in, mode, rng));
}

template <typename T>
std::array<double, 2> baseline_predict(Model<T>& model, const std::vector<std::uint16_t>& beams,
                                       Mode mode, Rng& rng) {
  if (model.config().kind != ModelKind::kBaseline) {
    throw ConfigError("baseline_predict: model is not a baseline model");
  }
  return predict(model, {}, beams, mode, rng);
}

template struct BeamEmbeddingTable<float>;
template struct BeamEmbeddingTable<double>;
template class Model<float>;
template class Model<double>;
template std::array<double, 2> predict(Model<float>&, const std::vector<const scene::Frame*>&,
                                       const std::vector<std::uint16_t>&, Mode, Rng&);
template std::array<double, 2> predict(Model<double>&, const std::vector<const scene::Frame*>&,
                                       const std::vector<std::uint16_t>&, Mode, Rng&);
template std::array<double, 2> baseline_predict(Model<float>&, const std::vector<std::uint16_t>&,
                                                Mode, Rng&);
template std::array<double, 2> baseline_predict(Model<double>&, const std::vector<std::uint16_t>&,
                                                Mode, Rng&);

}  // namespace beamwatch::model

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "beamwatch/numerics/ops.hpp"
#include "beamwatch/numerics/tensor.hpp"
#include "beamwatch/rng.hpp"
#include "beamwatch/scene.hpp"

namespace beamwatch::model {

using numerics::Mode;
using numerics::Tensor;

enum class ModelKind { kVision, kBaseline };

std::string to_string(ModelKind kind);
/// Parses "vision" or "baseline"; anything else is a ConfigError listing both.
ModelKind parse_model_kind(const std::string& text);

/// Architecture hyper-parameters. Defaults follow the reference design table.
struct ModelConfig {
  ModelKind kind = ModelKind::kVision;
  std::size_t frame_width = 64;
  std::size_t frame_height = 64;
  std::size_t conv_blocks = 3;
  std::size_t conv_channels = 256;
  std::size_t conv_kernel = 5;
  std::size_t conv_stride = 1;
  std::size_t conv_padding = 2;
  std::size_t pool_window = 2;
  std::size_t pool_stride = 1;
  std::size_t dense_hidden = 512;
  std::size_t embed_dim = 256;   // N
  std::size_t hidden_dim = 20;
  std::size_t classes = 2;
  std::size_t observed = 8;      // r
  std::size_t codebook_size = 64;
  double dropout = 0.2;
  std::uint64_t table_seed = 0x5eed;
  std::uint64_t init_seed = 1;

  /// GRU steps per layer: 2r for the vision model, r for the baseline.
  std::size_t sequence_length() const;
  /// Flattened feature size after the conv stack.
  std::size_t flat_features() const;
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// What each recurrent step consumes: the image or beam embedding of observation `index`.
struct SequenceStep {
  enum class Source { kImage, kBeam } source;
  std::size_t index;

  friend bool operator==(const SequenceStep&, const SequenceStep&) = default;
};

/// {d_0, b_0, d_1, b_1, ...} for the vision model, {b_0, ..., b_{r-1}} for the baseline.
std::vector<SequenceStep> sequence_layout(ModelKind kind, std::size_t observed);

/// Frozen Q x N lookup table with N(0, 1) entries, regenerable from its seed.
template <typename T>
struct BeamEmbeddingTable {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::uint64_t seed = 0;
  Tensor<T> table;  // never requires grad

  static BeamEmbeddingTable generate(std::uint64_t seed, std::size_t rows, std::size_t dim);
  std::vector<T> embed(std::size_t index) const;
  std::uint64_t fingerprint() const;
};

template <typename T>
struct ConvBlock {
  Tensor<T> kernels;  // [C_out, C_in, k, k]
  Tensor<T> gamma;
  Tensor<T> beta;
  numerics::BatchNormState<T> bn;
};

template <typename T>
struct ImageEmbedderParams {
  std::vector<ConvBlock<T>> blocks;
  Tensor<T> fc1_weight, fc1_bias;
  Tensor<T> fc2_weight, fc2_bias;
};

template <typename T>
struct PredictorParams {
  numerics::GruCellParams<T> gru1;
  numerics::GruCellParams<T> gru2;
  Tensor<T> classifier_weight;  // [classes, hidden]
  Tensor<T> classifier_bias;
};

/// A batch of observed sequences. Frames are deduplicated: `frame_index[b * r + i]`
/// points into `frames` for the i-th observation of sequence b.
struct BatchInput {
  std::size_t batch = 0;
  std::size_t observed = 0;
  std::vector<const scene::Frame*> frames;
  std::vector<std::size_t> frame_index;
  std::vector<std::uint16_t> beams;
};

/// Dual-modality blockage predictor (or its beam-only baseline).
template <typename T>
class Model {
 public:
  explicit Model(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  /// Independent copy with its own storage (tensors are shared handles otherwise).
  Model deep_copy() const;
  /// Copies every persisted value from `other`, which must share this model's config.
  void load_values_from(const Model& other);
  const BeamEmbeddingTable<T>& beam_table() const { return table_; }
  ImageEmbedderParams<T>& embedder() { return embedder_; }
  PredictorParams<T>& predictor() { return predictor_; }

  /// Trainable tensors (the beam table is excluded).
  std::vector<Tensor<T>> parameters() const;

  /// Every persisted tensor by name, including batch-norm running statistics.
  std::vector<std::pair<std::string, Tensor<T>>> named_tensors() const;
  std::vector<std::size_t> batchnorm_updates() const;
  void set_batchnorm_updates(const std::vector<std::size_t>& updates);
  std::size_t parameter_count() const;

  /// Image embeddings d_i for a batch of frames: [F, N].
  Tensor<T> embed_images(const std::vector<const scene::Frame*>& frames, Mode mode);

  /// Beam embeddings b_i, constant: [count, N].
  Tensor<T> embed_beams(const std::vector<std::uint16_t>& beams) const;

  /// Classifier logits [B, classes].
  Tensor<T> forward(const BatchInput& input, Mode mode, Rng& rng);

 private:
  ModelConfig config_;
  BeamEmbeddingTable<T> table_;
  ImageEmbedderParams<T> embedder_;
  PredictorParams<T> predictor_;
};

/// Probability of each class for one observed sequence of r (frame, beam) pairs.
template <typename T>
std::array<double, 2> predict(Model<T>& model, const std::vector<const scene::Frame*>& frames,
                              const std::vector<std::uint16_t>& beams, Mode mode, Rng& rng);

/// Beam-only prediction; `model` must be a baseline model.
template <typename T>
std::array<double, 2> baseline_predict(Model<T>& model, const std::vector<std::uint16_t>& beams,
                                       Mode mode, Rng& rng);

/// Extra manifest data stored alongside the weights.
struct CheckpointInfo {
  std::uint64_t codebook_fingerprint = 0;
  std::string dataset_config_hash;
  std::uint64_t train_seed = 0;
  std::int64_t iteration = 0;
};

void save_checkpoint(const Model<float>& model, const CheckpointInfo& info,
                     const std::filesystem::path& path);

struct LoadedCheckpoint {
  Model<float> model;
  CheckpointInfo info;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Loads into a model built from `expected`; any tensor whose shape disagrees raises a
/// DimensionError naming it.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);

extern template class Model<float>;
extern template class Model<double>;

}  // namespace beamwatch::model

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "beamwatch/error.hpp"
#include "beamwatch/numerics/adam.hpp"
#include "beamwatch/pipeline.hpp"
#include "batching.hpp"

namespace beamwatch::pipeline {

using dataset::Sample;
using model::Model;

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (eval_every < 1) throw ConfigError("train.eval_every must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr must be a finite value >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("train.dropout must lie in [0, 1)");
}

void LearningCurve::append(const CurvePoint& p) {
  if (!points.empty() && p.iteration <= points.back().iteration) {
    throw ValidationError("learning curve: iteration " + std::to_string(p.iteration) +
                          " does not follow " + std::to_string(points.back().iteration));
  }
  points.push_back(p);
}

namespace detail {

BatchInput make_batch(const std::vector<const Sample*>& samples) {
  BatchInput in;
  in.batch = samples.size();
  in.observed = samples.empty() ? 0 : samples.front()->observed();
  std::unordered_map<const scene::Frame*, std::size_t> slot;
  for (const Sample* s : samples) {
    if (s->observed() != in.observed) {
      throw ValidationError("batch: samples observe " + std::to_string(s->observed()) + " and " +
                            std::to_string(in.observed) + " steps");
    }
    in.beams.insert(in.beams.end(), s->beams.begin(), s->beams.end());
    for (const auto& f : s->frames) {
      auto [it, inserted] = slot.try_emplace(f.get(), in.frames.size());
      if (inserted) in.frames.push_back(f.get());
      in.frame_index.push_back(it->second);
    }
  }
  return in;
}

std::vector<std::size_t> epoch_permutation(const std::vector<Sample>& samples, std::uint64_t seed,
                                           std::size_t epoch, bool group_by_episode) {
  Rng rng(derive_seed(seed, epoch));
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (!group_by_episode) {
    rng.shuffle(order.begin(), order.end());
    return order;
  }
  std::vector<std::uint32_t> episodes;
  std::unordered_map<std::uint32_t, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto [it, inserted] = members.try_emplace(samples[i].meta.episode_id);
    if (inserted) episodes.push_back(samples[i].meta.episode_id);
    it->second.push_back(i);
  }
  rng.shuffle(episodes.begin(), episodes.end());
  order.clear();
  for (auto id : episodes) {
    auto& group = members[id];
    rng.shuffle(group.begin(), group.end());
    order.insert(order.end(), group.begin(), group.end());
  }
  return order;
}

}  // namespace detail

namespace {

void check_compatible(const dataset::Dataset& a, const dataset::Dataset& b) {
  const auto& ha = a.header;
  const auto& hb = b.header;
  if (ha.codebook_fingerprint != hb.codebook_fingerprint) {
    throw CompatibilityError("train and validation sets were built with different codebooks");
  }
  if (ha.observed != hb.observed || ha.width != hb.width || ha.height != hb.height ||
      ha.codebook_size != hb.codebook_size) {
    throw CompatibilityError("train and validation sets disagree on r, frame size or codebook size");
  }
}

int argmax_row(const float* row) { return row[1] > row[0] ? 1 : 0; }

}  // namespace

TrainResult train(model::ModelKind kind, const dataset::Dataset& train_set, const dataset::Dataset& val_set,
                  model::ModelConfig arch, const TrainConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  if (train_set.samples.empty() || val_set.samples.empty()) {
    throw ValidationError("train: training and validation sets must be non-empty");
  }
  check_compatible(train_set, val_set);
  const auto& header = train_set.header;
  arch.kind = kind;
  arch.dropout = cfg.dropout;
  if (arch.observed != header.observed || arch.codebook_size != header.codebook_size) {
    throw CompatibilityError("train: model expects r=" + std::to_string(arch.observed) + ", Q=" +
                             std::to_string(arch.codebook_size) + " but the dataset has r=" +
                             std::to_string(header.observed) + ", Q=" + std::to_string(header.codebook_size));
  }
  if (kind == model::ModelKind::kVision &&
      (arch.frame_width != header.width || arch.frame_height != header.height)) {
    throw CompatibilityError("train: model expects " + std::to_string(arch.frame_width) + "x" +
                             std::to_string(arch.frame_height) + " frames but the dataset has " +
                             std::to_string(header.width) + "x" + std::to_string(header.height));
  }

  Model<float> model(arch);
  numerics::Adam<float> optimizer(model.parameters(), numerics::AdamOptions{.lr = cfg.lr});
  Rng dropout_rng(derive_seed(cfg.seed, std::uint64_t{1} << 40));

  TrainResult result{model.deep_copy(), {}, {}, -1.0, 0.0, 0};
  result.info.codebook_fingerprint = header.codebook_fingerprint;
  result.info.dataset_config_hash = header.config_hash;
  result.info.train_seed = cfg.seed;

  const auto& samples = train_set.samples;
  const std::size_t batches_per_epoch = (samples.size() + cfg.batch_size - 1) / cfg.batch_size;
  std::int64_t iteration = 0;
  std::size_t window_correct = 0, window_count = 0, window_batches = 0;
  double window_loss = 0.0;
  std::vector<const Sample*> batch;
  std::vector<int> labels;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = detail::epoch_permutation(samples, cfg.seed, epoch, cfg.group_by_episode);
    for (std::size_t b = 0; b < batches_per_epoch; ++b) {
      batch.clear();
      labels.clear();
      const std::size_t end = std::min(samples.size(), (b + 1) * cfg.batch_size);
      for (std::size_t i = b * cfg.batch_size; i < end; ++i) {
        batch.push_back(&samples[order[i]]);
        labels.push_back(static_cast<int>(samples[order[i]].label));
      }
      const auto input = detail::make_batch(batch);
      auto logits = model.forward(input, numerics::Mode::kTrain, dropout_rng);
      auto loss = numerics::softmax_cross_entropy(logits, std::span<const int>(labels));
      const double loss_value = loss.item();
      if (!std::isfinite(loss_value)) {
        std::ostringstream msg;
        msg << "training diverged: loss " << loss_value << " at iteration " << iteration << " (epoch "
            << epoch << ", lr " << cfg.lr << "); batch episodes:";
        for (const Sample* s : batch) msg << ' ' << s->meta.episode_id << '/' << s->meta.user_id << '@' << s->meta.start_step;
        throw NumericError(msg.str());
      }
      for (std::size_t i = 0; i < labels.size(); ++i) {
        window_correct += argmax_row(logits.data() + 2 * i) == labels[i] ? 1 : 0;
      }
      window_count += labels.size();
      window_loss += loss_value;
      ++window_batches;

      loss.backward();
      optimizer.step();
      ++iteration;
      result.final_train_loss = loss_value;

      const bool last = epoch + 1 == cfg.epochs && b + 1 == batches_per_epoch;
      if (iteration % static_cast<std::int64_t>(cfg.eval_every) == 0 || last) {
        CurvePoint point;
        point.iteration = iteration;
        point.train_top1 = static_cast<double>(window_correct) / static_cast<double>(window_count);
        point.train_loss = window_loss / static_cast<double>(window_batches);
        point.val_top1 = evaluate(model, val_set.samples).top1;
        result.curve.append(point);
        if (point.val_top1 > result.best_val_top1) {
          result.best_val_top1 = point.val_top1;
          result.best.load_values_from(model);
          result.info.iteration = iteration;
        }
        if (progress) progress(point, epoch);
        window_correct = window_count = window_batches = 0;
        window_loss = 0.0;
      }
    }
  }
  result.iterations = iteration;
  return result;
}

}  // namespace beamwatch::pipeline

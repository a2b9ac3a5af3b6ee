#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "beamwatch/dataset.hpp"
#include "beamwatch/model.hpp"

namespace beamwatch::pipeline {

struct TrainConfig {
  double lr = 1e-3;
  std::size_t batch_size = 64;
  std::size_t epochs = 50;
  std::uint64_t seed = 7;
  double dropout = 0.2;
  std::size_t eval_every = 100;  // iterations between curve points
  /// Keep each epoch's permutation grouped by episode so a batch touches few distinct frames.
  bool group_by_episode = true;

  void validate() const;
};

/// Binary confusion counts with NLOS as the positive class.
struct Metrics {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
  double top1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  static Metrics from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t tn, std::uint64_t fn);
  std::uint64_t total() const { return tp + fp + tn + fn; }
  /// Adds counts and recomputes the scores.
  Metrics& merge(const Metrics& other);

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

/// Metrics of predicted classes against labels (0 = LOS, 1 = NLOS).
Metrics score(const std::vector<int>& predicted, const std::vector<int>& labels);

struct CurvePoint {
  std::int64_t iteration = 0;
  double train_top1 = 0.0;
  double val_top1 = 0.0;
  double train_loss = 0.0;

  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

struct LearningCurve {
  std::vector<CurvePoint> points;

  /// Rejects a point whose iteration does not exceed the previous one.
  void append(const CurvePoint& p);
  friend bool operator==(const LearningCurve&, const LearningCurve&) = default;
};

struct TrainResult {
  model::Model<float> best;
  model::CheckpointInfo info;
  LearningCurve curve;
  double best_val_top1 = 0.0;
  double final_train_loss = 0.0;
  std::int64_t iterations = 0;
};

using ProgressFn = std::function<void(const CurvePoint&, std::size_t epoch)>;

/// Adam + cross-entropy over shuffled mini-batches. The returned model is the one with the
/// best validation top-1 seen at a curve point.
TrainResult train(model::ModelKind kind, const dataset::Dataset& train_set,
                  const dataset::Dataset& val_set, model::ModelConfig arch, const TrainConfig& cfg,
                  const ProgressFn& progress = {});

/// Predicted class per sample, in order. `threshold` on P(NLOS) replaces argmax when set.
std::vector<int> predict_classes(model::Model<float>& model, const std::vector<dataset::Sample>& samples,
                                 std::optional<double> threshold = std::nullopt);

Metrics evaluate(model::Model<float>& model, const std::vector<dataset::Sample>& samples,
                 std::optional<double> threshold = std::nullopt);

/// Checks the codebook fingerprint before scoring.
Metrics evaluate(model::LoadedCheckpoint& checkpoint, const dataset::Dataset& ds,
                 std::optional<double> threshold = std::nullopt);

/// Metrics per scenario-config id.
std::map<std::uint32_t, Metrics> breakdown(model::Model<float>& model, const dataset::Dataset& ds);
std::map<std::uint32_t, Metrics> breakdown(const std::vector<int>& predicted,
                                           const std::vector<dataset::Sample>& samples);

struct DeltaPoint {
  std::int64_t iteration = 0;
  double vision_val_top1 = 0.0;
  double baseline_val_top1 = 0.0;
  double delta = 0.0;
};

struct ComparisonReport {
  double vision_final = 0.0;
  double baseline_final = 0.0;
  double final_delta = 0.0;
  std::vector<DeltaPoint> series;  // iterations present in both curves
};

ComparisonReport compare(const LearningCurve& vision, const LearningCurve& baseline);

// ---- emitted artifacts -------------------------------------------------------

std::string metrics_json(const Metrics& m, const std::map<std::uint32_t, Metrics>& per_scenario = {});
void write_curve_csv(const LearningCurve& curve, const std::filesystem::path& path);
LearningCurve read_curve_csv(const std::filesystem::path& path);
void write_comparison_csv(const ComparisonReport& report, const std::filesystem::path& path);
std::string run_summary(const std::string& title, const Metrics& train, const Metrics& val,
                        const TrainResult* result = nullptr);

}  // namespace beamwatch::pipeline

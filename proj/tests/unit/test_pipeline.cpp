#include <gtest/gtest.h>

#include <nlohmann/json.hpp>
#include <set>

#include "batching.hpp"
#include "beamwatch/error.hpp"
#include "beamwatch/pipeline.hpp"
#include "support.hpp"

namespace beamwatch::pipeline {
namespace {

const dataset::GenerationResult& tiny_data() {
  static const dataset::GenerationResult data = [] {
    dataset::GenerationConfig cfg;
    cfg.scenarios.front().raster_width = 16;
    cfg.scenarios.front().raster_height = 16;
    cfg.episodes = 40;
    cfg.seed = 3;
    return dataset::generate(cfg);
  }();
  return data;
}

model::ModelConfig tiny_arch() {
  model::ModelConfig a;
  a.frame_width = a.frame_height = 16;
  a.conv_blocks = 1;
  a.conv_channels = 2;
  a.conv_kernel = 3;
  a.conv_padding = 1;
  a.pool_window = 2;
  a.pool_stride = 2;
  a.dense_hidden = 8;
  a.embed_dim = 6;
  a.hidden_dim = 5;
  return a;
}

TrainConfig tiny_train() {
  TrainConfig t;
  t.epochs = 2;
  t.batch_size = 16;
  t.eval_every = 10;
  return t;
}

std::vector<int> labels_of(const std::vector<dataset::Sample>& samples) {
  std::vector<int> out;
  for (const auto& s : samples) out.push_back(static_cast<int>(s.label));
  return out;
}

// ---- metrics ------------------------------------------------------------------------

TEST(Metrics, IdentitiesHoldForRandomCounts) {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto c = [&] { return static_cast<std::uint64_t>(rng.uniform_int(0, trial % 3 == 0 ? 3 : 500)); };
    const auto m = Metrics::from_counts(c(), c(), c(), c());
    const double n = static_cast<double>(m.total());
    const double p = m.tp + m.fp ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp) : 0.0;
    const double r = m.tp + m.fn ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn) : 0.0;
    EXPECT_DOUBLE_EQ(m.top1, n > 0 ? static_cast<double>(m.tp + m.tn) / n : 0.0);
    EXPECT_DOUBLE_EQ(m.precision, p);
    EXPECT_DOUBLE_EQ(m.recall, r);
    EXPECT_NEAR(m.f1, p + r > 0 ? 2 * p * r / (p + r) : 0.0, 1e-15);
    for (double v : {m.top1, m.precision, m.recall, m.f1}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Metrics, ZeroDenominatorsGiveZero) {
  const auto m = Metrics::from_counts(0, 0, 5, 0);
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_EQ(m.recall, 0.0);
  EXPECT_EQ(m.f1, 0.0);
  EXPECT_EQ(m.top1, 1.0);
  const auto empty = Metrics::from_counts(0, 0, 0, 0);
  EXPECT_EQ(empty.top1, 0.0);
}

TEST(Metrics, MergeIsAssociativeAndCommutative) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    auto rand = [&] {
      auto c = [&] { return static_cast<std::uint64_t>(rng.uniform_int(0, 50)); };
      return Metrics::from_counts(c(), c(), c(), c());
    };
    const auto a = rand(), b = rand(), c = rand();
    auto ab_c = a;
    ab_c.merge(b).merge(c);
    auto bc = b;
    bc.merge(c);
    auto a_bc = a;
    a_bc.merge(bc);
    auto ba = b;
    ba.merge(a);
    auto ab = a;
    ab.merge(b);
    EXPECT_EQ(ab_c, a_bc);
    EXPECT_EQ(ab, ba);
  }
}

TEST(Metrics, ScoreCountsNlosAsPositive) {
  const auto m = score({1, 1, 0, 0, 1}, {1, 0, 0, 1, 1});
  EXPECT_EQ(m.tp, 2u);
  EXPECT_EQ(m.fp, 1u);
  EXPECT_EQ(m.tn, 1u);
  EXPECT_EQ(m.fn, 1u);
  EXPECT_THROW(score({1}, {1, 0}), DimensionError);
}

TEST(Metrics, ReferenceF1FromPrecisionAndRecall) {
  // Counts chosen so P and R land on the reported baseline and vision rows.
  const auto baseline = Metrics::from_counts(7533, 1105, 0, 2467);
  EXPECT_NEAR(baseline.precision, 0.8721, 1e-4);
  EXPECT_NEAR(baseline.recall, 0.7533, 1e-4);
  EXPECT_NEAR(baseline.f1, 0.808358472, 1e-4);
  const auto vision = Metrics::from_counts(9623, 2394, 0, 377);
  EXPECT_NEAR(vision.precision, 0.8008, 1e-4);
  EXPECT_NEAR(vision.recall, 0.9623, 1e-4);
  EXPECT_NEAR(vision.f1, 0.874153, 1e-4);
}

// ---- curves and reports -----------------------------------------------------------------

TEST(Curve, RejectsNonIncreasingIterations) {
  LearningCurve c;
  c.append({10, 0.5, 0.5, 0.7});
  EXPECT_THROW(c.append({10, 0.5, 0.5, 0.7}), ValidationError);
  EXPECT_THROW(c.append({5, 0.5, 0.5, 0.7}), ValidationError);
  c.append({11, 0.6, 0.6, 0.6});
  EXPECT_EQ(c.points.size(), 2u);
}

TEST(Curve, CsvRoundTrip) {
  testing::TempDir dir("curve");
  LearningCurve c;
  c.append({100, 0.61, 0.6, 0.6931471805599453});
  c.append({200, 0.71, 0.7, 0.5123456789012345});
  write_curve_csv(c, dir / "c.csv");
  EXPECT_EQ(read_curve_csv(dir / "c.csv"), c);
  EXPECT_THROW(read_curve_csv(dir / "missing.csv"), FormatError);
}

TEST(Compare, SeriesCoversCommonIterations) {
  LearningCurve v, b;
  v.append({100, 0, 0.70, 0});
  v.append({200, 0, 0.80, 0});
  v.append({250, 0, 0.85, 0});
  b.append({100, 0, 0.65, 0});
  b.append({200, 0, 0.72, 0});
  b.append({300, 0, 0.74, 0});
  const auto r = compare(v, b);
  ASSERT_EQ(r.series.size(), 2u);
  EXPECT_EQ(r.series[1].iteration, 200);
  EXPECT_NEAR(r.series[1].delta, 0.08, 1e-12);
  EXPECT_NEAR(r.vision_final, 0.85, 1e-12);
  EXPECT_NEAR(r.baseline_final, 0.74, 1e-12);
  EXPECT_NEAR(r.final_delta, 0.11, 1e-12);
}

TEST(Report, MetricsJsonCarriesCountsAndScenarios) {
  const auto m = Metrics::from_counts(3, 1, 4, 2);
  const auto j = nlohmann::json::parse(metrics_json(m, {{0, m}, {1, Metrics::from_counts(1, 0, 0, 0)}}));
  EXPECT_EQ(j.at("confusion").at("tp"), 3);
  EXPECT_NEAR(j.at("top1").get<double>(), 0.7, 1e-12);
  EXPECT_EQ(j.at("per_scenario").size(), 2u);
}

// ---- batching -----------------------------------------------------------------------

TEST(Batching, FramesAreStoredOnce) {
  const auto& ds = tiny_data().train;
  std::vector<const dataset::Sample*> batch;
  for (std::size_t i = 0; i < 10; ++i) batch.push_back(&ds.samples[i]);
  const auto in = detail::make_batch(batch);
  EXPECT_EQ(in.batch, 10u);
  EXPECT_EQ(in.frame_index.size(), 80u);
  std::set<const scene::Frame*> distinct;
  for (const auto* s : batch) {
    for (const auto& f : s->frames) distinct.insert(f.get());
  }
  EXPECT_EQ(in.frames.size(), distinct.size());
  for (std::size_t b = 0; b < 10; ++b) {
    for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(in.frames[in.frame_index[b * 8 + i]], batch[b]->frames[i].get());
  }
}

TEST(Batching, EpochPermutationProperties) {
  const auto& samples = tiny_data().train.samples;
  for (bool grouped : {false, true}) {
    for (std::size_t epoch = 0; epoch < 5; ++epoch) {
      const auto p = detail::epoch_permutation(samples, 7, epoch, grouped);
      auto sorted = p;
      std::sort(sorted.begin(), sorted.end());
      for (std::size_t i = 0; i < sorted.size(); ++i) ASSERT_EQ(sorted[i], i);
      EXPECT_EQ(p, detail::epoch_permutation(samples, 7, epoch, grouped));
      EXPECT_NE(p, detail::epoch_permutation(samples, 7, epoch + 1, grouped));
      if (grouped) {
        // Each episode's samples form one contiguous run.
        std::set<std::uint32_t> finished;
        std::uint32_t current = samples[p[0]].meta.episode_id;
        for (auto idx : p) {
          const auto e = samples[idx].meta.episode_id;
          if (e != current) {
            finished.insert(current);
            EXPECT_EQ(finished.count(e), 0u);
            current = e;
          }
        }
      }
    }
  }
}

// ---- training and evaluation --------------------------------------------------------------

class Trained : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    result_ = new TrainResult(train(model::ModelKind::kVision, tiny_data().train, tiny_data().validation,
                                    tiny_arch(), tiny_train()));
  }
  static void TearDownTestSuite() {
    delete result_;
    result_ = nullptr;
  }
  static TrainResult* result_;
};

TrainResult* Trained::result_ = nullptr;

TEST_F(Trained, CurveAndSelection) {
  const auto& r = *result_;
  ASSERT_FALSE(r.curve.points.empty());
  EXPECT_EQ(r.curve.points.back().iteration, r.iterations);
  double best = 0;
  for (const auto& p : r.curve.points) best = std::max(best, p.val_top1);
  EXPECT_DOUBLE_EQ(r.best_val_top1, best);
  auto copy = r.best.deep_copy();
  EXPECT_DOUBLE_EQ(evaluate(copy, tiny_data().validation.samples).top1, r.best_val_top1);
  EXPECT_EQ(r.info.codebook_fingerprint, tiny_data().train.header.codebook_fingerprint);
}

TEST_F(Trained, SameConfigGivesSameResult) {
  const auto again = train(model::ModelKind::kVision, tiny_data().train, tiny_data().validation, tiny_arch(),
                           tiny_train());
  EXPECT_EQ(again.curve, result_->curve);
  EXPECT_EQ(again.info.iteration, result_->info.iteration);
  auto a = again.best.deep_copy();
  auto b = result_->best.deep_copy();
  EXPECT_EQ(evaluate(a, tiny_data().validation.samples), evaluate(b, tiny_data().validation.samples));
}

TEST_F(Trained, BeamTableUntouched) {
  const auto fresh = model::BeamEmbeddingTable<float>::generate(tiny_arch().table_seed, 64, tiny_arch().embed_dim);
  EXPECT_EQ(result_->best.beam_table().fingerprint(), fresh.fingerprint());
}

TEST_F(Trained, EvaluateIgnoresSampleOrder) {
  auto m = result_->best.deep_copy();
  auto samples = tiny_data().validation.samples;
  const auto base = evaluate(m, samples);
  Rng rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    rng.shuffle(samples.begin(), samples.end());
    EXPECT_EQ(evaluate(m, samples), base);
  }
}

TEST_F(Trained, ThresholdExtremes) {
  auto m = result_->best.deep_copy();
  const auto& samples = tiny_data().validation.samples;
  for (int c : predict_classes(m, samples, 0.0)) EXPECT_EQ(c, 1);
  for (int c : predict_classes(m, samples, 1.01)) EXPECT_EQ(c, 0);
}

TEST_F(Trained, BreakdownSumsToTotal) {
  auto m = result_->best.deep_copy();
  const auto& ds = tiny_data().validation;
  const auto parts = breakdown(m, ds);
  Metrics total;
  for (const auto& [id, part] : parts) total.merge(part);
  EXPECT_EQ(total, evaluate(m, ds.samples));
}

TEST_F(Trained, CheckpointEvaluationChecksCodebook) {
  model::LoadedCheckpoint ck{result_->best.deep_copy(), result_->info};
  EXPECT_NO_THROW(evaluate(ck, tiny_data().validation));
  ck.info.codebook_fingerprint ^= 1;
  EXPECT_THROW(evaluate(ck, tiny_data().validation), CompatibilityError);
}

TEST(Train, BaselineRunsOnBeamsOnly) {
  auto cfg = tiny_train();
  cfg.epochs = 1;
  const auto r = train(model::ModelKind::kBaseline, tiny_data().train, tiny_data().validation, tiny_arch(), cfg);
  EXPECT_EQ(r.best.config().kind, model::ModelKind::kBaseline);
  EXPECT_GT(r.best_val_top1, 0.0);
}

TEST(Train, RejectsMismatchedInputs) {
  const auto& d = tiny_data();
  auto cfg = tiny_train();
  EXPECT_THROW(train(model::ModelKind::kVision, dataset::Dataset{d.train.header, {}}, d.validation, tiny_arch(), cfg),
               ValidationError);
  auto arch = tiny_arch();
  arch.frame_width = 32;
  EXPECT_THROW(train(model::ModelKind::kVision, d.train, d.validation, arch, cfg), CompatibilityError);
  auto other = d.validation;
  other.header.codebook_fingerprint ^= 1;
  EXPECT_THROW(train(model::ModelKind::kVision, d.train, other, tiny_arch(), cfg), CompatibilityError);
  cfg.batch_size = 0;
  EXPECT_THROW(train(model::ModelKind::kVision, d.train, d.validation, tiny_arch(), cfg), ConfigError);
}

TEST(Train, EvaluateEmptyIsValidationError) {
  model::Model<float> m(tiny_arch());
  EXPECT_THROW(evaluate(m, {}), ValidationError);
}

TEST(Train, LabelsHelperMatchesScoreInput) {
  const auto& v = tiny_data().validation.samples;
  const auto labels = labels_of(v);
  const auto m = score(labels, labels);
  EXPECT_EQ(m.fp + m.fn, 0u);
  EXPECT_EQ(m.top1, 1.0);
}

}  // namespace
}  // namespace beamwatch::pipeline

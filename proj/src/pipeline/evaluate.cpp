#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "batching.hpp"
#include "beamwatch/binary_io.hpp"
#include "beamwatch/error.hpp"
#include "beamwatch/pipeline.hpp"

namespace beamwatch::pipeline {

using dataset::Sample;

namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

constexpr std::size_t kEvalBatch = 256;

}  // namespace

Metrics Metrics::from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t tn, std::uint64_t fn) {
  Metrics m;
  m.tp = tp;
  m.fp = fp;
  m.tn = tn;
  m.fn = fn;
  m.top1 = ratio(tp + tn, tp + tn + fp + fn);
  m.precision = ratio(tp, tp + fp);
  m.recall = ratio(tp, tp + fn);
  const double pr = m.precision + m.recall;
  m.f1 = pr == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / pr;
  return m;
}

Metrics& Metrics::merge(const Metrics& other) {
  *this = from_counts(tp + other.tp, fp + other.fp, tn + other.tn, fn + other.fn);
  return *this;
}

Metrics score(const std::vector<int>& predicted, const std::vector<int>& labels) {
  if (predicted.size() != labels.size()) {
    throw DimensionError("score: " + std::to_string(predicted.size()) + " predictions for " +
                         std::to_string(labels.size()) + " labels");
  }
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool p = predicted[i] == 1;
    const bool y = labels[i] == 1;
    if (p && y) ++tp;
    else if (p) ++fp;
    else if (y) ++fn;
    else ++tn;
  }
  return Metrics::from_counts(tp, fp, tn, fn);
}

std::vector<int> predict_classes(model::Model<float>& model, const std::vector<Sample>& samples,
                                 std::optional<double> threshold) {
  numerics::NoGradGuard no_grad;
  Rng unused(0);
  std::vector<int> out;
  out.reserve(samples.size());
  std::vector<const Sample*> chunk;
  for (std::size_t start = 0; start < samples.size(); start += kEvalBatch) {
    chunk.clear();
    for (std::size_t i = start; i < std::min(samples.size(), start + kEvalBatch); ++i) chunk.push_back(&samples[i]);
    const auto logits = model.forward(detail::make_batch(chunk), numerics::Mode::kEval, unused);
    const auto probs = numerics::softmax(logits);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const float* p = probs.data() + 2 * i;
      out.push_back(threshold ? (p[1] >= *threshold ? 1 : 0) : (p[1] > p[0] ? 1 : 0));
    }
  }
  return out;
}

namespace {

std::vector<int> labels_of(const std::vector<Sample>& samples) {
  std::vector<int> labels;
  labels.reserve(samples.size());
  for (const auto& s : samples) labels.push_back(static_cast<int>(s.label));
  return labels;
}

}  // namespace

Metrics evaluate(model::Model<float>& model, const std::vector<Sample>& samples, std::optional<double> threshold) {
  if (samples.empty()) throw ValidationError("evaluate: dataset is empty");
  return score(predict_classes(model, samples, threshold), labels_of(samples));
}

Metrics evaluate(model::LoadedCheckpoint& checkpoint, const dataset::Dataset& ds, std::optional<double> threshold) {
  if (checkpoint.info.codebook_fingerprint != ds.header.codebook_fingerprint) {
    throw CompatibilityError("evaluate: checkpoint was trained with codebook fingerprint " +
                             std::to_string(checkpoint.info.codebook_fingerprint) + ", dataset uses " +
                             std::to_string(ds.header.codebook_fingerprint));
  }
  return evaluate(checkpoint.model, ds.samples, threshold);
}

std::map<std::uint32_t, Metrics> breakdown(const std::vector<int>& predicted, const std::vector<Sample>& samples) {
  if (predicted.size() != samples.size()) {
    throw DimensionError("breakdown: " + std::to_string(predicted.size()) + " predictions for " +
                         std::to_string(samples.size()) + " samples");
  }
  std::map<std::uint32_t, std::vector<int>> preds, labels;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto key = samples[i].meta.scenario_id;
    preds[key].push_back(predicted[i]);
    labels[key].push_back(static_cast<int>(samples[i].label));
  }
  std::map<std::uint32_t, Metrics> out;
  for (const auto& [key, p] : preds) out[key] = score(p, labels[key]);
  return out;
}

std::map<std::uint32_t, Metrics> breakdown(model::Model<float>& model, const dataset::Dataset& ds) {
  if (ds.samples.empty()) throw ValidationError("breakdown: dataset is empty");
  return breakdown(predict_classes(model, ds.samples), ds.samples);
}

ComparisonReport compare(const LearningCurve& vision, const LearningCurve& baseline) {
  ComparisonReport report;
  if (vision.points.empty() || baseline.points.empty()) return report;
  report.vision_final = vision.points.back().val_top1;
  report.baseline_final = baseline.points.back().val_top1;
  report.final_delta = report.vision_final - report.baseline_final;
  std::size_t j = 0;
  for (const auto& v : vision.points) {
    while (j < baseline.points.size() && baseline.points[j].iteration < v.iteration) ++j;
    if (j < baseline.points.size() && baseline.points[j].iteration == v.iteration) {
      const auto& b = baseline.points[j];
      report.series.push_back({v.iteration, v.val_top1, b.val_top1, v.val_top1 - b.val_top1});
    }
  }
  return report;
}

// ---- artifacts -------------------------------------------------------------------

namespace {

nlohmann::json to_json(const Metrics& m) {
  return {{"top1", m.top1}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
          {"confusion", {{"tp", m.tp}, {"fp", m.fp}, {"tn", m.tn}, {"fn", m.fn}}}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  io::write_file(path.string(), std::vector<std::uint8_t>(text.begin(), text.end()));
}

}  // namespace

std::string metrics_json(const Metrics& m, const std::map<std::uint32_t, Metrics>& per_scenario) {
  auto j = to_json(m);
  if (!per_scenario.empty()) {
    auto& by = j["per_scenario"] = nlohmann::json::object();
    for (const auto& [key, sub] : per_scenario) by[std::to_string(key)] = to_json(sub);
  }
  return j.dump(2);
}

void write_curve_csv(const LearningCurve& curve, const std::filesystem::path& path) {
  std::ostringstream out;
  out << std::setprecision(17) << "iteration,train_top1,val_top1,train_loss\n";
  for (const auto& p : curve.points) {
    out << p.iteration << ',' << p.train_top1 << ',' << p.val_top1 << ',' << p.train_loss << '\n';
  }
  write_text(path, out.str());
}

LearningCurve read_curve_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(FormatError::Kind::kIo, "cannot open curve file " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "iteration,train_top1,val_top1,train_loss") {
    throw FormatError(FormatError::Kind::kMalformed, path.string() + ": unexpected header '" + line + "'");
  }
  LearningCurve curve;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    CurvePoint p;
    char c1 = 0, c2 = 0, c3 = 0;
    if (!(row >> p.iteration >> c1 >> p.train_top1 >> c2 >> p.val_top1 >> c3 >> p.train_loss) || c1 != ',' ||
        c2 != ',' || c3 != ',') {
      throw FormatError(FormatError::Kind::kMalformed, path.string() + ":" + std::to_string(line_no) + ": bad row");
    }
    curve.append(p);
  }
  return curve;
}

void write_comparison_csv(const ComparisonReport& report, const std::filesystem::path& path) {
  std::ostringstream out;
  out << std::setprecision(10) << "iteration,vision_val_top1,baseline_val_top1,delta\n";
  for (const auto& d : report.series) {
    out << d.iteration << ',' << d.vision_val_top1 << ',' << d.baseline_val_top1 << ',' << d.delta << '\n';
  }
  write_text(path, out.str());
}

std::string run_summary(const std::string& title, const Metrics& train, const Metrics& val, const TrainResult* result) {
  std::ostringstream out;
  out << title << '\n' << std::fixed << std::setprecision(4);
  out << "split        top1    precision  recall  f1      tp     fp     tn     fn\n";
  for (const auto& [name, m] : {std::pair{"train", train}, std::pair{"validation", val}}) {
    out << std::left << std::setw(12) << name << std::right << ' ' << m.top1 << "  " << m.precision << "     "
        << m.recall << "  " << m.f1 << "  " << std::setw(5) << m.tp << "  " << std::setw(5) << m.fp << "  "
        << std::setw(5) << m.tn << "  " << std::setw(5) << m.fn << '\n';
  }
  if (result != nullptr) {
    out << "iterations " << result->iterations << ", selected iteration " << result->info.iteration
        << ", best val top1 " << result->best_val_top1 << ", final train loss " << result->final_train_loss << '\n';
  }
  return out.str();
}

}  // namespace beamwatch::pipeline

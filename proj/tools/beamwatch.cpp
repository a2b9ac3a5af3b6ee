// Command-line front end: generate, train, eval, report, selftest.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "beamwatch/binary_io.hpp"
#include "beamwatch/config.hpp"
#include "beamwatch/error.hpp"
#include "beamwatch/numerics/ops.hpp"
#include "beamwatch/selftest.hpp"

namespace fs = std::filesystem;
using namespace beamwatch;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitInternal = 4;

struct Options {
  std::string config_path;
  std::string model = "vision";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::string out;
  std::optional<int> workers;
  std::string checkpoint;
  std::string dataset;
  std::string inject_fault;
};

config::RunConfig load_config(const Options& o) {
  config::RunConfig cfg = o.config_path.empty() ? config::RunConfig{} : config::load_run_config(o.config_path);
  if (o.workers) cfg.workers = *o.workers;
  if (o.epochs) cfg.train.epochs = *o.epochs;
  if (!o.out.empty()) cfg.output_dir = o.out;
  cfg.validate();
  omp_set_num_threads(cfg.workers);
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  io::write_file(path.string(), std::vector<std::uint8_t>(text.begin(), text.end()));
}

int cmd_generate(const Options& o) {
  auto cfg = load_config(o);
  if (o.seed) cfg.dataset.seed = *o.seed;
  const auto gen = cfg.generation();
  const auto start = std::chrono::steady_clock::now();
  const auto result = dataset::generate(gen);
  const fs::path dir = cfg.output_dir;
  dataset::write_dataset(result.train, dir / "train.bwds");
  dataset::write_dataset(result.validation, dir / "val.bwds");

  const auto train_balance = dataset::class_balance(result.train);
  const auto val_balance = dataset::class_balance(result.validation);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const nlohmann::json report = {
      {"config_hash", gen.config_hash},
      {"seed", gen.seed},
      {"episodes", {{"train", result.train_episodes}, {"validation", result.validation_episodes}}},
      {"samples", {{"train", result.train.samples.size()}, {"validation", result.validation.samples.size()}}},
      {"class_balance",
       {{"train", {{"los", train_balance.p_los}, {"nlos", train_balance.p_nlos}}},
        {"validation", {{"los", val_balance.p_los}, {"nlos", val_balance.p_nlos}}}}},
      {"codebook_fingerprint", result.train.header.codebook_fingerprint}};
  write_text(dir / "generation.json", report.dump(2) + "\n");
  std::printf("episodes  train %zu / validation %zu\n", result.train_episodes, result.validation_episodes);
  std::printf("samples   train %zu / validation %zu\n", result.train.samples.size(),
              result.validation.samples.size());
  std::printf("NLOS      train %.4f / validation %.4f\n", train_balance.p_nlos, val_balance.p_nlos);
  std::printf("config    %s\n", gen.config_hash.c_str());
  std::printf("wrote     %s (%.1f s)\n", (dir / "train.bwds").c_str(), seconds);
  return kExitOk;
}

dataset::Dataset read_split(const fs::path& path, const Options& o) {
  if (!fs::exists(path)) {
    throw FormatError(FormatError::Kind::kIo,
                      "dataset " + path.string() + " not found; run `beamwatch generate" +
                          (o.config_path.empty() ? std::string() : " --config " + o.config_path) + "` first");
  }
  return dataset::read_dataset(path);
}

int cmd_train(const Options& o) {
  auto cfg = load_config(o);
  if (o.seed) cfg.train.seed = *o.seed;
  const auto kind = model::parse_model_kind(o.model);
  const fs::path dir = cfg.output_dir;
  const auto train_set = read_split(dir / "train.bwds", o);
  const auto val_set = read_split(dir / "val.bwds", o);
  if (train_set.header.config_hash != cfg.dataset_hash()) {
    std::fprintf(stderr, "warning: datasets in %s were generated from a different config\n", dir.c_str());
  }
  const std::string name = model::to_string(kind);
  std::printf("training %s model on %zu samples (%zu validation), %zu epochs\n", name.c_str(),
              train_set.samples.size(), val_set.samples.size(), cfg.train.epochs);
  const auto start = std::chrono::steady_clock::now();
  auto result = pipeline::train(kind, train_set, val_set, cfg.model_config(kind), cfg.train,
                                [&](const pipeline::CurvePoint& p, std::size_t epoch) {
                                  const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                                  std::printf("  epoch %3zu  iter %6lld  loss %.4f  train %.4f  val %.4f  (%.0f s)\n",
                                              epoch + 1, static_cast<long long>(p.iteration), p.train_loss,
                                              p.train_top1, p.val_top1, t);
                                  std::fflush(stdout);
                                });
  model::save_checkpoint(result.best, result.info, dir / (name + ".ckpt"));
  pipeline::write_curve_csv(result.curve, dir / (name + "_curve.csv"));
  const auto train_metrics = pipeline::evaluate(result.best, train_set.samples);
  const auto val_preds = pipeline::predict_classes(result.best, val_set.samples);
  std::vector<int> labels;
  for (const auto& s : val_set.samples) labels.push_back(static_cast<int>(s.label));
  const auto val_metrics = pipeline::score(val_preds, labels);
  const auto per_scenario = pipeline::breakdown(val_preds, val_set.samples);
  nlohmann::json metrics = {{"model", name},
                            {"train", nlohmann::json::parse(pipeline::metrics_json(train_metrics))},
                            {"validation", nlohmann::json::parse(pipeline::metrics_json(val_metrics, per_scenario))},
                            {"selected_iteration", result.info.iteration},
                            {"iterations", result.iterations},
                            {"final_train_loss", result.final_train_loss}};
  write_text(dir / (name + "_metrics.json"), metrics.dump(2) + "\n");
  const auto summary = pipeline::run_summary(name + " model", train_metrics, val_metrics, &result);
  write_text(dir / (name + "_summary.txt"), summary);
  std::printf("%s", summary.c_str());
  return kExitOk;
}

int cmd_eval(const Options& o) {
  auto checkpoint = model::load_checkpoint(o.checkpoint);
  const auto ds = dataset::read_dataset(o.dataset);
  const auto metrics = pipeline::evaluate(checkpoint, ds);
  const auto per_scenario = pipeline::breakdown(checkpoint.model, ds);
  std::printf("%s\n", pipeline::metrics_json(metrics, per_scenario).c_str());
  return kExitOk;
}

int cmd_report(const Options& o) {
  auto cfg = load_config(o);
  const fs::path dir = cfg.output_dir;
  const auto vision = pipeline::read_curve_csv(dir / "vision_curve.csv");
  const auto baseline = pipeline::read_curve_csv(dir / "baseline_curve.csv");
  const auto report = pipeline::compare(vision, baseline);
  pipeline::write_comparison_csv(report, dir / "comparison.csv");
  std::printf("final validation top-1: vision %.4f, baseline %.4f, delta %+.4f\n", report.vision_final,
              report.baseline_final, report.final_delta);
  std::printf("delta series: %zu points -> %s\n", report.series.size(), (dir / "comparison.csv").c_str());
  return kExitOk;
}

int cmd_selftest(const Options& o) {
  if (!o.inject_fault.empty()) {
    if (o.inject_fault != "gru") throw ConfigError("unknown fault '" + o.inject_fault + "'; valid options: gru");
    numerics::testing::set_gru_backward_fault(true);
  }
  const auto start = std::chrono::steady_clock::now();
  int failed = 0;
  for (const auto& r : selftest::run_all()) {
    std::printf("%-28s %s  %.3g (limit %.3g)%s%s\n", r.name.c_str(), r.passed ? "PASS" : "FAIL", r.value,
                r.tolerance, r.detail.empty() ? "" : "  ", r.detail.c_str());
    failed += r.passed ? 0 : 1;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("%s: %d check(s) failed, %.1f s\n", failed ? "FAILED" : "OK", failed, seconds);
  return failed ? kExitInternal : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vision-aided mmWave blockage prediction"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&o](CLI::App* cmd) {
    cmd->add_option("--config", o.config_path, "JSON run config (defaults apply when omitted)");
    cmd->add_option("--out", o.out, "Output directory (overrides output_dir)");
    cmd->add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);
  };
  auto* generate = app.add_subcommand("generate", "Simulate episodes and write train/val datasets");
  add_common(generate);
  generate->add_option("--seed", o.seed, "Dataset seed (overrides dataset.seed)");

  auto* train = app.add_subcommand("train", "Train a model on generated datasets");
  add_common(train);
  train->add_option("--model", o.model, "vision or baseline")->check(CLI::IsMember({"vision", "baseline"}));
  train->add_option("--seed", o.seed, "Training seed (overrides train.seed)");
  train->add_option("--epochs", o.epochs, "Epochs (overrides train.epochs)")->check(CLI::PositiveNumber);

  auto* eval = app.add_subcommand("eval", "Score a checkpoint on a dataset file, JSON to stdout");
  eval->add_option("--checkpoint", o.checkpoint, "Checkpoint file")->required();
  eval->add_option("--dataset", o.dataset, "Dataset file")->required();

  auto* report = app.add_subcommand("report", "Compare vision and baseline learning curves");
  add_common(report);

  auto* selftest = app.add_subcommand("selftest", "Gradient checks, oracles and format round-trips");
  selftest->add_option("--inject-fault", o.inject_fault)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*generate) return cmd_generate(o);
    if (*train) return cmd_train(o);
    if (*eval) return cmd_eval(o);
    if (*report) return cmd_report(o);
    if (*selftest) return cmd_selftest(o);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const CompatibilityError& e) {
    std::fprintf(stderr, "compatibility error: %s\n", e.what());
    return kExitData;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kExitInternal;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return kExitInternal;
  }
  return kExitInternal;
}

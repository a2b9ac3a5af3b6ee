#pragma once

#include <string>
#include <vector>

#include "beamwatch/model.hpp"

namespace beamwatch::selftest {

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;      // measured error or mismatch count
  double tolerance = 0.0;
  std::string detail;
};

/// Gradient checks, oracle equivalences and format round-trips. Runs in a few seconds.
std::vector<CheckResult> run_all();

/// A tiny vision model (16x16 frames, one conv block, r = 2) for gradient checks.
model::ModelConfig micro_model_config();

/// Cross-entropy of the micro model on a fixed two-sequence batch; rebuilds the graph
/// on every call. `frames` must hold 4 frames matching `micro_model_config()`.
numerics::TensorD micro_model_loss(model::Model<double>& m, const std::vector<scene::Frame>& frames);

/// Four deterministic 16x16 frames with continuous pixel values.
std::vector<scene::Frame> micro_model_frames(std::uint64_t seed);

}  // namespace beamwatch::selftest

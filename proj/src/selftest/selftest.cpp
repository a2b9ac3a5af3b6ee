#include "beamwatch/selftest.hpp"

#include <chrono>
#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>

#include "beamwatch/binary_io.hpp"
#include "beamwatch/dataset.hpp"
#include "beamwatch/error.hpp"
#include "beamwatch/numerics/grad_check.hpp"
#include "beamwatch/numerics/init.hpp"
#include "beamwatch/wireless.hpp"

namespace beamwatch::selftest {

using numerics::Mode;
using numerics::Shape;
using numerics::TensorD;

namespace {

TensorD random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  TensorD t(std::move(shape), true);
  for (auto& v : t.values()) v = rng.normal() * scale;
  return t;
}

std::vector<double> random_weights(std::size_t n, Rng& rng) {
  std::vector<double> w(n);
  for (auto& v : w) v = rng.normal();
  return w;
}

CheckResult within(std::string name, double value, double tolerance, std::string detail = {}) {
  return {std::move(name), value < tolerance, value, tolerance, std::move(detail)};
}

numerics::GruCellParams<double> random_gru(std::size_t in, std::size_t hidden, Rng& rng) {
  numerics::GruCellParams<double> p;
  for (auto* w : {&p.w_z, &p.w_r, &p.w_n}) *w = random_tensor({hidden, in}, rng, 0.5);
  for (auto* u : {&p.u_z, &p.u_r, &p.u_n}) *u = random_tensor({hidden, hidden}, rng, 0.5);
  for (auto* b : {&p.b_z, &p.b_r, &p.b_n}) *b = random_tensor({hidden}, rng, 0.5);
  return p;
}

std::vector<TensorD> gru_tensors(const numerics::GruCellParams<double>& p) {
  return {p.w_z, p.w_r, p.w_n, p.u_z, p.u_r, p.u_n, p.b_z, p.b_r, p.b_n};
}

// ---- gradient checks ----------------------------------------------------------

std::vector<CheckResult> gradient_checks() {
  std::vector<CheckResult> out;
  Rng rng(11);
  {
    auto x = random_tensor({3, 5}, rng);
    auto w = random_tensor({4, 5}, rng);
    auto b = random_tensor({4}, rng);
    const auto c = random_weights(12, rng);
    out.push_back(within("grad.dense",
                         numerics::grad_check([&] { return numerics::weighted_sum(numerics::dense(x, w, b), std::span<const double>(c)); },
                                              {x, w, b}),
                         1e-5));
  }
  {
    auto x = random_tensor({2, 2, 5, 5}, rng);
    auto k = random_tensor({3, 2, 3, 3}, rng);
    const auto c = random_weights(2 * 3 * 5 * 5, rng);
    out.push_back(within("grad.conv2d",
                         numerics::grad_check([&] { return numerics::weighted_sum(numerics::conv2d(x, k, 1, 1), std::span<const double>(c)); },
                                              {x, k}),
                         1e-5));
  }
  {
    auto x = random_tensor({3, 2, 3, 3}, rng);
    auto gamma = random_tensor({2}, rng);
    auto beta = random_tensor({2}, rng);
    const auto c = random_weights(3 * 2 * 3 * 3, rng);
    numerics::BatchNormState<double> state(2);
    out.push_back(within("grad.batchnorm",
                         numerics::grad_check(
                             [&] {
                               return numerics::weighted_sum(numerics::batchnorm2d(x, gamma, beta, state, Mode::kTrain),
                                                             std::span<const double>(c));
                             },
                             {x, gamma, beta}),
                         1e-5));
  }
  {
    auto p = random_gru(4, 3, rng);
    auto x = random_tensor({2, 4}, rng);
    auto h = random_tensor({2, 3}, rng);
    const auto c = random_weights(6, rng);
    auto inputs = gru_tensors(p);
    inputs.push_back(x);
    inputs.push_back(h);
    const auto r = numerics::grad_check_detailed(
        [&] { return numerics::weighted_sum(numerics::gru_cell(x, h, p), std::span<const double>(c)); }, inputs);
    static const char* names[] = {"W_z", "W_r", "W_n", "U_z", "U_r", "U_n", "b_z", "b_r", "b_n", "x", "h_prev"};
    out.push_back(within("grad.gru_cell", r.max_rel_error, 1e-5,
                         std::string("worst tensor ") + names[r.worst_input] + " index " +
                             std::to_string(r.worst_index)));
  }
  {
    auto logits = random_tensor({4, 2}, rng);
    const std::vector<int> labels{0, 1, 1, 0};
    out.push_back(within("grad.softmax_cross_entropy",
                         numerics::grad_check([&] { return numerics::softmax_cross_entropy(logits, std::span<const int>(labels)); },
                                              {logits}),
                         1e-5));
  }
  {
    model::Model<double> m(micro_model_config());
    const auto frames = micro_model_frames(5);
    auto params = m.parameters();
    out.push_back(within("grad.micro_model", numerics::grad_check([&] { return micro_model_loss(m, frames); }, params), 1e-3));
  }
  return out;
}

// ---- oracle equivalences -----------------------------------------------------

std::vector<double> scalar_gru(const std::vector<double>& x, const std::vector<double>& h,
                               const numerics::GruCellParams<double>& p) {
  const std::size_t H = p.hidden_dim();
  const std::size_t I = p.input_dim();
  auto affine = [&](const TensorD& w, const TensorD& u, const TensorD& b, std::size_t j, bool with_u) {
    double acc = b.data()[j];
    for (std::size_t i = 0; i < I; ++i) acc += w.data()[j * I + i] * x[i];
    if (with_u) {
      for (std::size_t i = 0; i < H; ++i) acc += u.data()[j * H + i] * h[i];
    }
    return acc;
  };
  std::vector<double> out(H);
  for (std::size_t j = 0; j < H; ++j) {
    const double z = 1.0 / (1.0 + std::exp(-affine(p.w_z, p.u_z, p.b_z, j, true)));
    const double r = 1.0 / (1.0 + std::exp(-affine(p.w_r, p.u_r, p.b_r, j, true)));
    double uh = 0.0;
    for (std::size_t i = 0; i < H; ++i) uh += p.u_n.data()[j * H + i] * h[i];
    const double n = std::tanh(affine(p.w_n, p.u_n, p.b_n, j, false) + r * uh);
    out[j] = (1.0 - z) * n + z * h[j];
  }
  return out;
}

CheckResult gru_oracle() {
  Rng rng(21);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    auto p = random_gru(6, 5, rng);
    auto x = random_tensor({3, 6}, rng);
    auto h = random_tensor({3, 5}, rng);
    const auto y = numerics::gru_cell(x, h, p);
    for (std::size_t b = 0; b < 3; ++b) {
      std::vector<double> xb(x.data() + b * 6, x.data() + b * 6 + 6);
      std::vector<double> hb(h.data() + b * 5, h.data() + b * 5 + 5);
      const auto ref = scalar_gru(xb, hb, p);
      for (std::size_t j = 0; j < 5; ++j) worst = std::max(worst, std::abs(ref[j] - y.data()[b * 5 + j]));
    }
  }
  return within("oracle.gru_cell", worst, 1e-6);
}

wireless::PathSet random_paths(Rng& rng, const wireless::OfdmConfig& cfg) {
  wireless::PathSet paths(static_cast<std::size_t>(rng.uniform_int(1, 5)));
  for (auto& p : paths) {
    p.gain = rng.uniform(0.01, 1.0);
    p.delay = rng.uniform(0.0, cfg.max_delay() * 0.99);
    p.azimuth = rng.uniform(-1.5, 1.5);
    p.elevation = rng.uniform(-0.3, 0.3);
  }
  return paths;
}

CheckResult channel_oracle() {
  Rng rng(31);
  wireless::OfdmConfig cfg;
  cfg.antennas = 8;
  cfg.subcarriers = 8;
  cfg.cyclic_prefix = 16;
  const double pi = std::numbers::pi;
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto paths = random_paths(rng, cfg);
    const auto h = wireless::channel(paths, cfg);
    for (std::size_t k = 0; k < cfg.subcarriers; ++k) {
      for (std::size_t m = 0; m < cfg.antennas; ++m) {
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t d = 0; d < cfg.cyclic_prefix; ++d) {
          for (const auto& p : paths) {
            const double t = static_cast<double>(d) * cfg.sampling_time - p.delay;
            const double x = t / cfg.sampling_time;
            const double sinc = x == 0.0 ? 1.0 : std::sin(pi * x) / (pi * x);
            const double phase = -2.0 * pi * static_cast<double>(k * d) / static_cast<double>(cfg.subcarriers) +
                                 pi * static_cast<double>(m) * std::sin(p.azimuth) * std::cos(p.elevation);
            acc += p.gain * sinc * std::polar(1.0, phase);
          }
        }
        worst = std::max(worst, std::abs(acc - h.at(k, m)));
      }
    }
  }
  return within("oracle.channel", worst, 1e-10);
}

CheckResult beam_oracle() {
  Rng rng(41);
  wireless::OfdmConfig cfg;
  cfg.antennas = 16;
  cfg.subcarriers = 4;
  const auto codebook = wireless::build_codebook(cfg.antennas, 32);
  int mismatches = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const auto h = wireless::channel(random_paths(rng, cfg), cfg);
    std::size_t best = 0;
    double best_power = -1.0;
    for (std::size_t q = 0; q < codebook.size(); ++q) {
      double power = 0.0;
      for (std::size_t k = 0; k < h.subcarriers; ++k) {
        std::complex<double> y{0.0, 0.0};
        for (std::size_t m = 0; m < h.antennas; ++m) y += h.at(k, m) * codebook.beams[q][m];
        power += std::norm(y);
      }
      if (power > best_power) {
        best_power = power;
        best = q;
      }
    }
    if (wireless::beam_select(h, codebook) != best) ++mismatches;
  }
  return within("oracle.beam_select", mismatches, 0.5, std::to_string(mismatches) + " of 300 differ");
}

// ---- round trips ---------------------------------------------------------------

std::filesystem::path scratch_dir() {
  auto dir = std::filesystem::temp_directory_path() /
             ("beamwatch-selftest-" + std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
  std::filesystem::create_directories(dir);
  return dir;
}

std::vector<CheckResult> round_trips() {
  std::vector<CheckResult> out;
  const auto dir = scratch_dir();
  {
    dataset::GenerationConfig g;
    g.scenarios.front().raster_width = 16;
    g.scenarios.front().raster_height = 16;
    g.episodes = 4;
    g.seed = 3;
    auto result = dataset::generate(g);
    const auto path = dir / "roundtrip.bwds";
    dataset::write_dataset(result.train, path);
    const bool same = dataset::read_dataset(path) == result.train;
    auto bytes = io::read_file(path.string());
    bytes[bytes.size() - 10] ^= 0x40;
    io::write_file(path.string(), bytes);
    bool detected = false;
    try {
      dataset::read_dataset(path);
    } catch (const FormatError&) {
      detected = true;
    }
    out.push_back({"roundtrip.dataset", same && detected, same && detected ? 0.0 : 1.0, 0.5,
                   same ? (detected ? "" : "corruption not detected") : "records differ after reload"});
  }
  {
    model::Model<float> m(micro_model_config());
    const auto path = dir / "roundtrip.ckpt";
    model::save_checkpoint(m, {1, "hash", 2, 3}, path);
    auto loaded = model::load_checkpoint(path);
    bool same = loaded.info.iteration == 3;
    const auto a = m.named_tensors();
    const auto b = loaded.model.named_tensors();
    for (std::size_t i = 0; i < a.size(); ++i) {
      same = same && std::equal(a[i].second.values().begin(), a[i].second.values().end(), b[i].second.values().begin());
    }
    out.push_back({"roundtrip.checkpoint", same, same ? 0.0 : 1.0, 0.5, same ? "" : "tensors differ after reload"});
  }
  std::filesystem::remove_all(dir);
  return out;
}

}  // namespace

model::ModelConfig micro_model_config() {
  model::ModelConfig c;
  c.frame_width = 16;
  c.frame_height = 16;
  c.conv_blocks = 1;
  c.conv_channels = 2;
  c.conv_kernel = 3;
  c.conv_padding = 1;
  c.pool_window = 2;
  c.pool_stride = 2;
  c.dense_hidden = 4;
  c.embed_dim = 3;
  c.hidden_dim = 3;
  c.observed = 2;
  c.codebook_size = 4;
  c.dropout = 0.0;
  c.init_seed = 9;
  return c;
}

std::vector<scene::Frame> micro_model_frames(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<scene::Frame> frames(4);
  for (auto& f : frames) {
    f.width = 16;
    f.height = 16;
    f.pixels.resize(scene::Frame::kChannels * 16 * 16);
    for (auto& p : f.pixels) p = static_cast<float>(rng.uniform());
  }
  return frames;
}

TensorD micro_model_loss(model::Model<double>& m, const std::vector<scene::Frame>& frames) {
  model::BatchInput in;
  in.batch = 2;
  in.observed = 2;
  for (const auto& f : frames) in.frames.push_back(&f);
  in.frame_index = {0, 1, 2, 3};
  in.beams = {0, 3, 1, 2};
  Rng rng(1);
  const std::vector<int> labels{0, 1};
  return numerics::softmax_cross_entropy(m.forward(in, Mode::kTrain, rng), std::span<const int>(labels));
}

std::vector<CheckResult> run_all() {
  std::vector<CheckResult> out = gradient_checks();
  out.push_back(gru_oracle());
  out.push_back(channel_oracle());
  out.push_back(beam_oracle());
  for (auto& r : round_trips()) out.push_back(std::move(r));
  return out;
}

}  // namespace beamwatch::selftest

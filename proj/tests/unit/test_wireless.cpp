#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "beamwatch/error.hpp"
#include "beamwatch/wireless.hpp"

namespace beamwatch::wireless {
namespace {

using std::numbers::pi;

Path random_path(Rng& rng, const OfdmConfig& cfg) {
  Path p;
  p.gain = std::polar(rng.uniform(0.01, 1.0), rng.uniform(-pi, pi));
  p.delay = rng.uniform(0.0, cfg.max_delay() * 0.99);
  p.azimuth = rng.uniform(-pi / 2, pi / 2);
  p.elevation = rng.uniform(-0.3, 0.3);
  return p;
}

TEST(Ofdm, ValidateRejectsEachBadField) {
  OfdmConfig ok;
  EXPECT_NO_THROW(ok.validate());
  auto bad = ok;
  bad.subcarriers = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = ok;
  bad.cyclic_prefix = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = ok;
  bad.sampling_time = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = ok;
  bad.antennas = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Steering, UnitModulusAndReferenceElement) {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto a = steering_vector(rng.uniform(-pi, pi), rng.uniform(-1, 1), 32);
    ASSERT_EQ(a.size(), 32u);
    EXPECT_NEAR(std::abs(a[0] - Complex(1, 0)), 0.0, 1e-15);
    for (const auto& c : a) EXPECT_NEAR(std::abs(c), 1.0, 1e-12);
  }
}

TEST(Steering, BroadsideIsAllOnes) {
  for (const auto& c : steering_vector(0.0, 0.4, 8)) EXPECT_NEAR(std::abs(c - Complex(1, 0)), 0.0, 1e-15);
}

TEST(Codebook, BeamsAreUnitNormAtCellMidpoints) {
  const auto cb = build_codebook(32, 64);
  ASSERT_EQ(cb.size(), 64u);
  for (std::size_t q = 0; q < cb.size(); ++q) {
    double norm2 = 0;
    for (const auto& c : cb.beams[q]) norm2 += std::norm(c);
    EXPECT_NEAR(std::sqrt(norm2), 1.0, 1e-6);
    EXPECT_NEAR(cb.angles[q], -pi / 2 + (q + 0.5) * pi / 64, 1e-15);
  }
}

TEST(Codebook, RejectsFewerThanTwoBeams) {
  EXPECT_THROW(build_codebook(32, 1), ConfigError);
  EXPECT_THROW(build_codebook(0, 4), ConfigError);
}

TEST(Codebook, FingerprintIsStableAndSensitive) {
  EXPECT_EQ(build_codebook(32, 64).fingerprint(), build_codebook(32, 64).fingerprint());
  EXPECT_NE(build_codebook(32, 64).fingerprint(), build_codebook(32, 32).fingerprint());
  EXPECT_NE(build_codebook(32, 64).fingerprint(), build_codebook(16, 64).fingerprint());
}

TEST(Pulse, SincSamplesAtIntegerTaps) {
  const double ts = 5e-9;
  EXPECT_EQ(pulse(0.0, ts), 1.0);
  for (int n = 1; n < 10; ++n) {
    EXPECT_NEAR(pulse(n * ts, ts), 0.0, 1e-14);
    EXPECT_NEAR(pulse(-n * ts, ts), 0.0, 1e-14);
  }
  EXPECT_NEAR(pulse(0.5 * ts, ts), 2.0 / pi, 1e-15);
}

TEST(Channel, ZeroDelayBroadsidePathIsFlat) {
  OfdmConfig cfg;
  Path p;
  p.gain = Complex(0.3, -0.4);
  const auto h = channel({p}, cfg);
  for (std::size_t k = 0; k < cfg.subcarriers; ++k) {
    for (std::size_t m = 0; m < cfg.antennas; ++m) EXPECT_NEAR(std::abs(h.at(k, m) - p.gain), 0.0, 1e-12);
  }
}

TEST(Channel, EmptyPathSetGivesZeroChannel) {
  const auto h = channel({}, OfdmConfig{});
  for (const auto& c : h.h) EXPECT_EQ(c, Complex(0, 0));
}

TEST(Channel, RejectsDelaysOutsideCyclicPrefix) {
  OfdmConfig cfg;
  Path p;
  p.delay = cfg.max_delay();
  EXPECT_THROW(channel({p}, cfg), ValidationError);
  p.delay = -1e-12;
  EXPECT_THROW(channel({p}, cfg), ValidationError);
}

TEST(Channel, LinearInPathGains) {
  Rng rng(2);
  OfdmConfig cfg;
  for (int trial = 0; trial < 50; ++trial) {
    PathSet paths;
    for (int l = 0; l < 5; ++l) paths.push_back(random_path(rng, cfg));
    const Complex alpha = std::polar(rng.uniform(0.1, 3.0), rng.uniform(-pi, pi));
    auto scaled = paths;
    for (auto& p : scaled) p.gain *= alpha;
    const auto h = channel(paths, cfg);
    const auto hs = channel(scaled, cfg);
    for (std::size_t i = 0; i < h.h.size(); ++i) EXPECT_NEAR(std::abs(hs.h[i] - alpha * h.h[i]), 0.0, 1e-12);
  }
}

TEST(Channel, SuperpositionOverPaths) {
  Rng rng(3);
  OfdmConfig cfg;
  const auto a = random_path(rng, cfg);
  const auto b = random_path(rng, cfg);
  const auto ha = channel({a}, cfg);
  const auto hb = channel({b}, cfg);
  const auto hab = channel({a, b}, cfg);
  for (std::size_t i = 0; i < hab.h.size(); ++i) EXPECT_NEAR(std::abs(hab.h[i] - ha.h[i] - hb.h[i]), 0.0, 1e-12);
}

TEST(Channel, SinglePathNormIsInvariantToAzimuth) {
  Rng rng(4);
  OfdmConfig cfg;
  for (int trial = 0; trial < 50; ++trial) {
    auto p = random_path(rng, cfg);
    const auto h0 = channel({p}, cfg);
    p.azimuth += rng.uniform(-pi, pi);
    const auto h1 = channel({p}, cfg);
    for (std::size_t k = 0; k < cfg.subcarriers; ++k) {
      double n0 = 0, n1 = 0;
      for (std::size_t m = 0; m < cfg.antennas; ++m) {
        n0 += std::norm(h0.at(k, m));
        n1 += std::norm(h1.at(k, m));
      }
      EXPECT_NEAR(std::sqrt(n0), std::sqrt(n1), 1e-12 * (1 + std::sqrt(n0)));
    }
  }
}

TEST(BeamSelect, SinglePathSelectsMirroredBeam) {
  // y = h^T f without conjugation peaks at f = conj(a(theta)) = a(-theta),
  // and the midpoint grid is symmetric, so angle q maps to beam Q-1-q.
  const auto cb = build_codebook(32, 64);
  OfdmConfig cfg;
  for (std::size_t q = 0; q < cb.size(); q += 7) {
    Path p;
    p.azimuth = cb.angles[q];
    EXPECT_EQ(beam_select(channel({p}, cfg), cb), cb.size() - 1 - q);
  }
}

TEST(BeamSelect, InvariantToPositiveCodebookScaling) {
  Rng rng(5);
  OfdmConfig cfg;
  const auto cb = build_codebook(32, 64);
  for (int trial = 0; trial < 50; ++trial) {
    PathSet paths;
    for (int l = 0; l < 3; ++l) paths.push_back(random_path(rng, cfg));
    const auto h = channel(paths, cfg);
    auto scaled = cb;
    const double c = rng.uniform(0.01, 100.0);
    for (auto& beam : scaled.beams) {
      for (auto& v : beam) v *= c;
    }
    EXPECT_EQ(beam_select(h, cb), beam_select(h, scaled));
  }
}

TEST(BeamSelect, TiesResolveToLowestIndex) {
  const auto h = channel({}, OfdmConfig{});
  EXPECT_EQ(beam_select(h, build_codebook(32, 64)), 0u);

  auto cb = build_codebook(32, 8);
  cb.beams[6] = cb.beams[2];
  Path p;
  p.azimuth = -cb.angles[2];
  EXPECT_EQ(beam_select(channel({p}, OfdmConfig{}), cb), 2u);
}

TEST(BeamSelect, AntennaMismatchIsDimensionError) {
  const auto h = channel({}, OfdmConfig{});
  EXPECT_THROW(beam_select(h, build_codebook(16, 8)), DimensionError);
  EXPECT_THROW(beam_power(h, ComplexVector(3)), DimensionError);
}

TEST(ReceiveSignal, NoiselessEqualsInnerProduct) {
  Rng rng(6);
  const ComplexVector h{{1, 2}, {0, -1}, {0.5, 0.5}};
  const ComplexVector f{{0.5, 0}, {0, 0.5}, {1, -1}};
  const Complex x{0, 1};
  const Complex expected = (h[0] * f[0] + h[1] * f[1] + h[2] * f[2]) * x;
  EXPECT_NEAR(std::abs(receive_signal(h, f, x, 0.0, rng) - expected), 0.0, 1e-15);
}

TEST(ReceiveSignal, NoiseHasRequestedVariance) {
  Rng rng(7);
  const ComplexVector h{{0, 0}};
  const ComplexVector f{{1, 0}};
  const double sigma2 = 0.5;
  double power = 0;
  Complex mean{0, 0};
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const auto y = receive_signal(h, f, {1, 0}, sigma2, rng);
    power += std::norm(y);
    mean += y;
  }
  EXPECT_NEAR(power / n, sigma2, 0.01);
  EXPECT_NEAR(std::abs(mean / static_cast<double>(n)), 0.0, 0.01);
}

TEST(ReceiveSignal, Errors) {
  Rng rng(8);
  EXPECT_THROW(receive_signal(ComplexVector(2), ComplexVector(3), {1, 0}, 0.0, rng), DimensionError);
  EXPECT_THROW(receive_signal(ComplexVector(2), ComplexVector(2), {1, 0}, -1.0, rng), ValidationError);
}

}  // namespace
}  // namespace beamwatch::wireless

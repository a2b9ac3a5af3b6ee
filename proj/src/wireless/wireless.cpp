#include "beamwatch/wireless.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <string>

#include "beamwatch/error.hpp"

namespace beamwatch::wireless {

using std::numbers::pi;

void OfdmConfig::validate() const {
  if (subcarriers < 1) throw ConfigError("wireless: subcarriers (K) must be >= 1");
  if (cyclic_prefix < 1) throw ConfigError("wireless: cyclic prefix (D) must be >= 1");
  if (!(sampling_time > 0.0)) throw ConfigError("wireless: sampling time (T_S) must be > 0");
  if (antennas < 1) throw ConfigError("wireless: antenna count (M) must be >= 1");
}

std::uint64_t Codebook::fingerprint() const {
  std::uint64_t acc = mix64(antennas) ^ mix64(beams.size() + 0x51ULL);
  for (const auto& beam : beams) {
    for (const auto& c : beam) {
      acc = mix64(acc ^ std::bit_cast<std::uint64_t>(c.real()));
      acc = mix64(acc ^ std::bit_cast<std::uint64_t>(c.imag()));
    }
  }
  return acc;
}

ComplexVector steering_vector(double azimuth, double elevation, std::size_t antennas) {
  if (antennas < 1) throw ConfigError("steering_vector: antenna count must be >= 1");
  ComplexVector a(antennas);
  const double phase_step = pi * std::sin(azimuth) * std::cos(elevation);
  for (std::size_t m = 0; m < antennas; ++m) {
    a[m] = std::polar(1.0, phase_step * static_cast<double>(m));
  }
  return a;
}

Codebook build_codebook(std::size_t antennas, std::size_t beams) {
  if (antennas < 1) throw ConfigError("build_codebook: antenna count must be >= 1");
  if (beams < 2) {
    throw ConfigError("build_codebook: codebook needs at least 2 beams, got " +
                      std::to_string(beams));
  }
  Codebook cb;
  cb.antennas = antennas;
  const double norm = 1.0 / std::sqrt(static_cast<double>(antennas));
  for (std::size_t q = 0; q < beams; ++q) {
    const double angle = -pi / 2.0 + (static_cast<double>(q) + 0.5) * pi / static_cast<double>(beams);
    auto f = steering_vector(angle, 0.0, antennas);
    for (auto& c : f) c *= norm;
    cb.beams.push_back(std::move(f));
    cb.angles.push_back(angle);
  }
  return cb;
}

double pulse(double t, double sampling_time) {
  const double x = t / sampling_time;
  if (x == 0.0) return 1.0;
  return std::sin(pi * x) / (pi * x);
}

ChannelMatrix channel(const PathSet& paths, const OfdmConfig& cfg) {
  cfg.validate();
  for (std::size_t l = 0; l < paths.size(); ++l) {
    if (paths[l].delay < 0.0 || paths[l].delay >= cfg.max_delay()) {
      throw ValidationError("channel: path " + std::to_string(l) + " delay " +
                            std::to_string(paths[l].delay) + " s outside [0, D*T_S = " +
                            std::to_string(cfg.max_delay()) + " s)");
    }
  }
  const std::size_t K = cfg.subcarriers;
  const std::size_t D = cfg.cyclic_prefix;
  const std::size_t M = cfg.antennas;
  ChannelMatrix out{K, M, ComplexVector(K * M)};

  // Phasors e^{-j 2 pi k d / K}, indexed by (k * d) mod K.
  ComplexVector twiddle(K);
  for (std::size_t i = 0; i < K; ++i) {
    twiddle[i] = std::polar(1.0, -2.0 * pi * static_cast<double>(i) / static_cast<double>(K));
  }
  std::vector<double> taps(D);
  for (const auto& path : paths) {
    const auto a = steering_vector(path.azimuth, path.elevation, M);
    for (std::size_t d = 0; d < D; ++d) {
      taps[d] = pulse(static_cast<double>(d) * cfg.sampling_time - path.delay, cfg.sampling_time);
    }
    for (std::size_t k = 0; k < K; ++k) {
      Complex coeff{0.0, 0.0};
      for (std::size_t d = 0; d < D; ++d) coeff += taps[d] * twiddle[(k * d) % K];
      coeff *= path.gain;
      Complex* row = out.h.data() + k * M;
      for (std::size_t m = 0; m < M; ++m) row[m] += coeff * a[m];
    }
  }
  return out;
}

Complex receive_signal(std::span<const Complex> h, std::span<const Complex> f, Complex x,
                       double sigma2, Rng& rng) {
  if (h.size() != f.size()) {
    throw DimensionError("receive_signal: channel has " + std::to_string(h.size()) +
                         " antennas, beam has " + std::to_string(f.size()));
  }
  if (sigma2 < 0.0) throw ValidationError("receive_signal: noise variance must be >= 0");
  Complex y{0.0, 0.0};
  for (std::size_t m = 0; m < h.size(); ++m) y += h[m] * f[m];
  y *= x;
  if (sigma2 > 0.0) {
    const double s = std::sqrt(sigma2 / 2.0);
    const double re = rng.normal(0.0, s);
    const double im = rng.normal(0.0, s);
    y += Complex(re, im);
  }
  return y;
}

double beam_power(const ChannelMatrix& channel, std::span<const Complex> beam) {
  if (beam.size() != channel.antennas) {
    throw DimensionError("beam_power: beam length " + std::to_string(beam.size()) +
                         " vs channel antennas " + std::to_string(channel.antennas));
  }
  double power = 0.0;
  for (std::size_t k = 0; k < channel.subcarriers; ++k) {
    const Complex* row = channel.h.data() + k * channel.antennas;
    Complex y{0.0, 0.0};
    for (std::size_t m = 0; m < channel.antennas; ++m) y += row[m] * beam[m];
    power += std::norm(y);
  }
  return power;
}

std::size_t beam_select(const ChannelMatrix& channel, const Codebook& codebook) {
  if (codebook.antennas != channel.antennas) {
    throw DimensionError("beam_select: codebook for " + std::to_string(codebook.antennas) +
                         " antennas, channel has " + std::to_string(channel.antennas));
  }
  std::size_t best = 0;
  double best_power = -1.0;
  for (std::size_t q = 0; q < codebook.size(); ++q) {
    const double p = beam_power(channel, codebook.beams[q]);
    if (p > best_power) {
      best_power = p;
      best = q;
    }
  }
  return best;
}

}  // namespace beamwatch::wireless

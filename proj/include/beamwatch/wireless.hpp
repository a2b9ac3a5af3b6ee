#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "beamwatch/rng.hpp"

namespace beamwatch::wireless {

using Complex = std::complex<double>;
using ComplexVector = std::vector<Complex>;

inline constexpr double kSpeedOfLight = 299'792'458.0;

/// One propagation path: complex gain (path loss included), delay and arrival angles.
struct Path {
  Complex gain{1.0, 0.0};
  double delay = 0.0;      // seconds
  double azimuth = 0.0;    // radians from array boresight
  double elevation = 0.0;  // radians
};

using PathSet = std::vector<Path>;

struct OfdmConfig {
  std::size_t subcarriers = 16;      // K
  std::size_t cyclic_prefix = 64;    // D, in samples
  double sampling_time = 5e-9;       // T_S, seconds
  std::size_t antennas = 32;         // M

  /// Throws ConfigError when any field is out of range.
  void validate() const;
  double max_delay() const { return static_cast<double>(cyclic_prefix) * sampling_time; }
};

struct Codebook {
  std::size_t antennas = 0;
  std::vector<ComplexVector> beams;
  std::vector<double> angles;  // steering azimuth of each beam

  std::size_t size() const { return beams.size(); }
  /// Stable 64-bit digest of (M, Q, beam coefficients).
  std::uint64_t fingerprint() const;
};

/// K x M channel, row k holds h_k.
struct ChannelMatrix {
  std::size_t subcarriers = 0;
  std::size_t antennas = 0;
  ComplexVector h;

  Complex& at(std::size_t k, std::size_t m) { return h[k * antennas + m]; }
  Complex at(std::size_t k, std::size_t m) const { return h[k * antennas + m]; }
  std::span<const Complex> row(std::size_t k) const { return {h.data() + k * antennas, antennas}; }
};

/// Half-wavelength ULA response a_m = exp(j*pi*m*sin(az)*cos(el)), m = 0..M-1.
ComplexVector steering_vector(double azimuth, double elevation, std::size_t antennas);

/// Q unit-norm beams steered at the midpoints of Q equal cells of [-pi/2, pi/2].
Codebook build_codebook(std::size_t antennas, std::size_t beams);

/// Truncated band-limited pulse p(t) = sinc(t / T_S).
double pulse(double t, double sampling_time);

/// Frequency-domain channel h_k = sum_d sum_l alpha_l e^{-j 2 pi k d / K} p(d T_S - tau_l) a(theta_l, phi_l).
ChannelMatrix channel(const PathSet& paths, const OfdmConfig& cfg);

/// y = h^T f x + n with n ~ CN(0, sigma2).
Complex receive_signal(std::span<const Complex> h, std::span<const Complex> f, Complex x,
                       double sigma2, Rng& rng);

/// Total noiseless received power sum_k |h_k^T f|^2 for one beam.
double beam_power(const ChannelMatrix& channel, std::span<const Complex> beam);

/// Index of the beam with the largest total power; ties go to the lowest index.
std::size_t beam_select(const ChannelMatrix& channel, const Codebook& codebook);

}  // namespace beamwatch::wireless

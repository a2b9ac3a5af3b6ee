#pragma once

#include <cmath>

#include "beamwatch/numerics/tensor.hpp"
#include "beamwatch/rng.hpp"

namespace beamwatch::numerics {

template <typename T>
void fill_uniform(Tensor<T>& t, double bound, Rng& rng) {
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-bound, bound));
}

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
template <typename T>
void fill_glorot(Tensor<T>& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  fill_uniform(t, std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)), rng);
}

}  // namespace beamwatch::numerics

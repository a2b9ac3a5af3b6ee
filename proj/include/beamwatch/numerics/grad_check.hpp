#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "beamwatch/error.hpp"
#include "beamwatch/numerics/tensor.hpp"

namespace beamwatch::numerics {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares analytic gradients of a scalar function against central differences.
///
/// Each coordinate's error is |a - n| / max(|a|, |n|, 1e-8). `f` must rebuild its
/// graph on every call; any randomness inside it must be reseeded per call.
GradCheckResult grad_check_detailed(const std::function<TensorD()>& f,
                                    std::vector<TensorD> inputs, double h = 1e-6);

inline double grad_check(const std::function<TensorD()>& f, std::vector<TensorD> inputs,
                         double h = 1e-6) {
  return grad_check_detailed(f, std::move(inputs), h).max_rel_error;
}

}  // namespace beamwatch::numerics

#pragma once

#include <cstdint>
#include <vector>

#include "beamwatch/numerics/tensor.hpp"

namespace beamwatch::numerics {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over a fixed parameter list.
template <typename T>
class Adam {
 public:
  Adam(std::vector<Tensor<T>> params, AdamOptions options = {});

  /// Applies one update from the accumulated gradients, then zeroes them.
  /// Throws ValidationError naming the first parameter without a gradient.
  void step();

  std::int64_t step_count() const noexcept { return step_count_; }
  const AdamOptions& options() const noexcept { return options_; }
  const std::vector<Tensor<T>>& params() const noexcept { return params_; }
  const std::vector<std::vector<double>>& first_moments() const noexcept { return m_; }
  const std::vector<std::vector<double>>& second_moments() const noexcept { return v_; }

 private:
  std::vector<Tensor<T>> params_;
  AdamOptions options_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::int64_t step_count_ = 0;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace beamwatch::numerics

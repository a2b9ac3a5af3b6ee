#include "beamwatch/numerics/adam.hpp"

#include <cmath>

#include "beamwatch/error.hpp"

namespace beamwatch::numerics {

template <typename T>
Adam<T>::Adam(std::vector<Tensor<T>> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

template <typename T>
void Adam<T>::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!params_[i].has_grad()) {
      const auto& name = params_[i].name();
      throw ValidationError("adam: parameter " + (name.empty() ? "#" + std::to_string(i) : name) +
                            " has no gradient");
    }
  }
  ++step_count_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_count_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_count_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto values = params_[i].values();
    auto grad = params_[i].grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = grad[j];
      m[j] = b1 * m[j] + (1.0 - b1) * g;
      v[j] = b2 * v[j] + (1.0 - b2) * g * g;
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      const double update = options_.lr * m_hat / (std::sqrt(v_hat) + options_.eps);
      values[j] = static_cast<T>(static_cast<double>(values[j]) - update);
    }
    params_[i].zero_grad();
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace beamwatch::numerics

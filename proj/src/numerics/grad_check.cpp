#include "beamwatch/numerics/grad_check.hpp"

namespace beamwatch::numerics {

GradCheckResult grad_check_detailed(const std::function<TensorD()>& f,
                                    std::vector<TensorD> inputs, double h) {
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  TensorD out = f();
  if (out.numel() != 1) {
    throw DimensionError("grad_check: function output " + shape_string(out.shape()) +
                         " is not scalar");
  }
  out.backward();

  GradCheckResult result;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    auto& input = inputs[t];
    std::vector<double> analytic(input.numel(), 0.0);
    if (input.has_grad()) std::copy(input.grad().begin(), input.grad().end(), analytic.begin());
    auto values = input.values();
    NoGradGuard no_grad;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double plus = f().item();
      values[i] = saved - h;
      const double minus = f().item();
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
      const double err = std::abs(analytic[i] - numeric) / denom;
      if (err > result.max_rel_error) {
        result = {err, t, i, analytic[i], numeric};
      }
    }
  }
  return result;
}

}  // namespace beamwatch::numerics

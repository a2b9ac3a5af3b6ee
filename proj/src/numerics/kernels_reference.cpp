#include <algorithm>
#include <cstdint>

#include "beamwatch/numerics/kernels.hpp"

namespace beamwatch::numerics::kernels::reference {

template <typename T>
void dense_forward(std::size_t batch, std::size_t in, std::size_t out, std::span<const T> x,
                   std::span<const T> w, std::span<const T> bias, std::span<T> y) {
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < out; ++o) {
      T acc = bias.empty() ? T{0} : bias[o];
      for (std::size_t i = 0; i < in; ++i) acc += x[b * in + i] * w[o * in + i];
      y[b * out + o] = acc;
    }
  }
}

template <typename T>
void dense_backward(std::size_t batch, std::size_t in, std::size_t out, std::span<const T> x,
                    std::span<const T> w, std::span<const T> dy, std::span<T> dx, std::span<T> dw,
                    std::span<T> dbias) {
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < out; ++o) {
      const T g = dy[b * out + o];
      if (!dbias.empty()) dbias[o] += g;
      for (std::size_t i = 0; i < in; ++i) {
        if (!dx.empty()) dx[b * in + i] += g * w[o * in + i];
        if (!dw.empty()) dw[o * in + i] += g * x[b * in + i];
      }
    }
  }
}

namespace {

// Calls f(n, co, oy, ox, ci, ki, kj, input_index, output_index, kernel_index)
// for every in-bounds tap of a direct convolution.
template <typename F>
void for_each_tap(const Conv2dGeometry& g, F&& f) {
  const std::size_t oh = g.out_height();
  const std::size_t ow = g.out_width();
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const std::size_t out_idx = ((n * g.out_channels + co) * oh + oy) * ow + ox;
          for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
            for (std::size_t ki = 0; ki < g.kernel_height; ++ki) {
              for (std::size_t kj = 0; kj < g.kernel_width; ++kj) {
                const auto iy = static_cast<std::int64_t>(oy * g.stride + ki) -
                                static_cast<std::int64_t>(g.padding);
                const auto ix = static_cast<std::int64_t>(ox * g.stride + kj) -
                                static_cast<std::int64_t>(g.padding);
                if (iy < 0 || ix < 0 || iy >= static_cast<std::int64_t>(g.in_height) ||
                    ix >= static_cast<std::int64_t>(g.in_width)) {
                  continue;
                }
                const std::size_t in_idx =
                    ((n * g.in_channels + ci) * g.in_height + static_cast<std::size_t>(iy)) *
                        g.in_width +
                    static_cast<std::size_t>(ix);
                const std::size_t k_idx =
                    ((co * g.in_channels + ci) * g.kernel_height + ki) * g.kernel_width + kj;
                f(in_idx, out_idx, k_idx);
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
void conv2d_forward(const Conv2dGeometry& g, std::span<const T> x, std::span<const T> kernels,
                    std::span<T> y) {
  std::fill(y.begin(), y.end(), T{0});
  for_each_tap(g, [&](std::size_t in_idx, std::size_t out_idx, std::size_t k_idx) {
    y[out_idx] += x[in_idx] * kernels[k_idx];
  });
}

template <typename T>
void conv2d_backward_input(const Conv2dGeometry& g, std::span<const T> kernels,
                           std::span<const T> dy, std::span<T> dx) {
  for_each_tap(g, [&](std::size_t in_idx, std::size_t out_idx, std::size_t k_idx) {
    dx[in_idx] += dy[out_idx] * kernels[k_idx];
  });
}

template <typename T>
void conv2d_backward_kernels(const Conv2dGeometry& g, std::span<const T> x, std::span<const T> dy,
                             std::span<T> dkernels) {
  for_each_tap(g, [&](std::size_t in_idx, std::size_t out_idx, std::size_t k_idx) {
    dkernels[k_idx] += dy[out_idx] * x[in_idx];
  });
}

template <typename T>
void maxpool2d_forward(const PoolGeometry& g, std::span<const T> x, std::span<T> y,
                       std::span<std::size_t> argmax) {
  const std::size_t oh = g.out_height();
  const std::size_t ow = g.out_width();
  for (std::size_t p = 0; p < g.planes; ++p) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        bool first = true;
        std::size_t best = 0;
        for (std::size_t i = 0; i < g.window; ++i) {
          for (std::size_t j = 0; j < g.window; ++j) {
            const std::size_t idx =
                p * g.in_height * g.in_width + (oy * g.stride + i) * g.in_width + ox * g.stride + j;
            if (first || x[idx] > x[best]) best = idx;
            first = false;
          }
        }
        y[(p * oh + oy) * ow + ox] = x[best];
        argmax[(p * oh + oy) * ow + ox] = best;
      }
    }
  }
}

#define BEAMWATCH_INSTANTIATE_REFERENCE(T)                                                       \
  template void dense_forward<T>(std::size_t, std::size_t, std::size_t, std::span<const T>,      \
                                 std::span<const T>, std::span<const T>, std::span<T>);          \
  template void dense_backward<T>(std::size_t, std::size_t, std::size_t, std::span<const T>,     \
                                  std::span<const T>, std::span<const T>, std::span<T>,          \
                                  std::span<T>, std::span<T>);                                   \
  template void conv2d_forward<T>(const Conv2dGeometry&, std::span<const T>, std::span<const T>, \
                                  std::span<T>);                                                 \
  template void conv2d_backward_input<T>(const Conv2dGeometry&, std::span<const T>,              \
                                         std::span<const T>, std::span<T>);                      \
  template void conv2d_backward_kernels<T>(const Conv2dGeometry&, std::span<const T>,            \
                                           std::span<const T>, std::span<T>);                    \
  template void maxpool2d_forward<T>(const PoolGeometry&, std::span<const T>, std::span<T>,      \
                                     std::span<std::size_t>);

BEAMWATCH_INSTANTIATE_REFERENCE(float)
BEAMWATCH_INSTANTIATE_REFERENCE(double)

}  // namespace beamwatch::numerics::kernels::reference

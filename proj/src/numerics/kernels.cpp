#include "beamwatch/numerics/kernels.hpp"

#include <algorithm>
#include <cstdint>
#include <vector>

namespace beamwatch::numerics::kernels {

namespace {

using Index = std::int64_t;

constexpr std::size_t kTile = 64;

template <typename T>
inline T dot(const T* a, const T* b, std::size_t n) {
  T acc{0};
#pragma omp simd reduction(+ : acc)
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
inline void axpy(T* y, T alpha, const T* x, std::size_t n) {
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

// Output columns [lo, hi) whose input column ox * stride + kj - pad is inside the image.
inline void valid_span(const Conv2dGeometry& g, std::size_t kj, std::size_t ow, std::size_t& lo,
                       std::size_t& hi) {
  const auto pad = static_cast<Index>(g.padding);
  const auto stride = static_cast<Index>(g.stride);
  const auto first = pad - static_cast<Index>(kj);  // smallest ox * stride allowed
  const auto last = static_cast<Index>(g.in_width) + pad - static_cast<Index>(kj);  // exclusive
  lo = first <= 0 ? 0 : static_cast<std::size_t>((first + stride - 1) / stride);
  hi = last <= 0 ? 0 : std::min(ow, static_cast<std::size_t>((last + stride - 1) / stride));
  if (hi < lo) hi = lo;
}

// cols is [patch_size, out_h * out_w] for one image.
template <typename T>
void im2col(const Conv2dGeometry& g, const T* image, T* cols) {
  const std::size_t oh = g.out_height();
  const std::size_t ow = g.out_width();
  const auto pad = static_cast<Index>(g.padding);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    const T* plane = image + c * g.in_height * g.in_width;
    for (std::size_t ki = 0; ki < g.kernel_height; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel_width; ++kj, ++row) {
        std::size_t lo = 0, hi = 0;
        valid_span(g, kj, ow, lo, hi);
        T* out = cols + row * oh * ow;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const Index iy = static_cast<Index>(oy * g.stride + ki) - pad;
          T* out_row = out + oy * ow;
          if (iy < 0 || iy >= static_cast<Index>(g.in_height) || lo == hi) {
            std::fill(out_row, out_row + ow, T{0});
            continue;
          }
          const T* in_row = plane + static_cast<std::size_t>(iy) * g.in_width;
          std::fill(out_row, out_row + lo, T{0});
          const Index offset = static_cast<Index>(kj) - pad;
          if (g.stride == 1) {
            std::copy(in_row + (static_cast<Index>(lo) + offset), in_row + (static_cast<Index>(hi) + offset),
                      out_row + lo);
          } else {
            for (std::size_t ox = lo; ox < hi; ++ox) {
              out_row[ox] = in_row[static_cast<Index>(ox * g.stride) + offset];
            }
          }
          std::fill(out_row + hi, out_row + ow, T{0});
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const Conv2dGeometry& g, const T* cols, T* image) {
  const std::size_t oh = g.out_height();
  const std::size_t ow = g.out_width();
  const auto pad = static_cast<Index>(g.padding);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    T* plane = image + c * g.in_height * g.in_width;
    for (std::size_t ki = 0; ki < g.kernel_height; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel_width; ++kj, ++row) {
        std::size_t lo = 0, hi = 0;
        valid_span(g, kj, ow, lo, hi);
        const T* in = cols + row * oh * ow;
        const Index offset = static_cast<Index>(kj) - pad;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const Index iy = static_cast<Index>(oy * g.stride + ki) - pad;
          if (iy < 0 || iy >= static_cast<Index>(g.in_height)) continue;
          T* out_row = plane + static_cast<std::size_t>(iy) * g.in_width;
          const T* in_row = in + oy * ow;
          if (g.stride == 1) {
            T* dst = out_row + offset;
#pragma omp simd
            for (std::size_t ox = lo; ox < hi; ++ox) dst[ox] += in_row[ox];
          } else {
            for (std::size_t ox = lo; ox < hi; ++ox) {
              out_row[static_cast<Index>(ox * g.stride) + offset] += in_row[ox];
            }
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
void dense_forward(std::size_t batch, std::size_t in, std::size_t out, std::span<const T> x,
                   std::span<const T> w, std::span<const T> bias, std::span<T> y) {
  const auto total = static_cast<Index>(batch * out);
#pragma omp parallel for schedule(static)
  for (Index idx = 0; idx < total; ++idx) {
    const auto b = static_cast<std::size_t>(idx) / out;
    const auto o = static_cast<std::size_t>(idx) % out;
    T acc = dot(x.data() + b * in, w.data() + o * in, in);
    if (!bias.empty()) acc += bias[o];
    y[b * out + o] = acc;
  }
}

template <typename T>
void dense_backward(std::size_t batch, std::size_t in, std::size_t out, std::span<const T> x,
                    std::span<const T> w, std::span<const T> dy, std::span<T> dx, std::span<T> dw,
                    std::span<T> dbias) {
  if (!dx.empty()) {
#pragma omp parallel for schedule(static)
    for (Index b = 0; b < static_cast<Index>(batch); ++b) {
      const auto bb = static_cast<std::size_t>(b);
      for (std::size_t o = 0; o < out; ++o) {
        const T g = dy[bb * out + o];
        if (g != T{0}) axpy(dx.data() + bb * in, g, w.data() + o * in, in);
      }
    }
  }
  if (!dw.empty() || !dbias.empty()) {
#pragma omp parallel for schedule(static)
    for (Index o = 0; o < static_cast<Index>(out); ++o) {
      const auto oo = static_cast<std::size_t>(o);
      T bias_acc{0};
      for (std::size_t b = 0; b < batch; ++b) {
        const T g = dy[b * out + oo];
        bias_acc += g;
        if (!dw.empty() && g != T{0}) axpy(dw.data() + oo * in, g, x.data() + b * in, in);
      }
      if (!dbias.empty()) dbias[oo] += bias_acc;
    }
  }
}

namespace {

template <typename T>
void conv_forward_impl(const Conv2dGeometry& g, const T* x, const T* kernels, T* y, bool accumulate) {
  const std::size_t in_plane = g.in_channels * g.in_height * g.in_width;
  const std::size_t positions = g.out_height() * g.out_width();
  const std::size_t patch = g.patch_size();
#pragma omp parallel
  {
    std::vector<T> cols(patch * positions);
#pragma omp for schedule(static)
    for (Index n = 0; n < static_cast<Index>(g.batch); ++n) {
      const auto nn = static_cast<std::size_t>(n);
      im2col(g, x + nn * in_plane, cols.data());
      T* out = y + nn * g.out_channels * positions;
      // Accumulate a tile of output positions in registers across the whole patch.
      for (std::size_t p0 = 0; p0 < positions; p0 += kTile) {
        const std::size_t len = std::min(kTile, positions - p0);
        for (std::size_t co = 0; co < g.out_channels; ++co) {
          const T* wrow = kernels + co * patch;
          alignas(64) T acc[kTile] = {};
          if (len == kTile) {
            for (std::size_t k = 0; k < patch; ++k) {
              const T w = wrow[k];
              const T* c = cols.data() + k * positions + p0;
#pragma omp simd aligned(acc : 64)
              for (std::size_t i = 0; i < kTile; ++i) acc[i] += w * c[i];
            }
          } else {
            for (std::size_t k = 0; k < patch; ++k) {
              const T w = wrow[k];
              const T* c = cols.data() + k * positions + p0;
              for (std::size_t i = 0; i < len; ++i) acc[i] += w * c[i];
            }
          }
          T* dst = out + co * positions + p0;
          if (accumulate) {
            for (std::size_t i = 0; i < len; ++i) dst[i] += acc[i];
          } else {
            std::copy(acc, acc + len, dst);
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
  conv_forward_impl(g, x.data(), kernels.data(), y.data(), false);
}

template <typename T>
void conv2d_backward_input(const Conv2dGeometry& g, std::span<const T> kernels,
                           std::span<const T> dy, std::span<T> dx) {
  const std::size_t positions = g.out_height() * g.out_width();
  const std::size_t patch = g.patch_size();
  const std::size_t kh = g.kernel_height;
  const std::size_t kw = g.kernel_width;
  if (g.stride == 1 && kh == kw && g.padding + 1 <= kh) {
    // Stride 1: the input gradient is a correlation of dy with the flipped kernels.
    Conv2dGeometry t{g.batch, g.out_channels, g.out_height(), g.out_width(), g.in_channels,
                     kh, kw, 1, kh - 1 - g.padding};
    std::vector<T> flipped(kernels.size());
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
        for (std::size_t i = 0; i < kh; ++i) {
          for (std::size_t j = 0; j < kw; ++j) {
            flipped[((ci * g.out_channels + co) * kh + (kh - 1 - i)) * kw + (kw - 1 - j)] =
                kernels[((co * g.in_channels + ci) * kh + i) * kw + j];
          }
        }
      }
    }
    conv_forward_impl(t, dy.data(), flipped.data(), dx.data(), true);
    return;
  }
  const std::size_t in_plane = g.in_channels * g.in_height * g.in_width;
#pragma omp parallel
  {
    std::vector<T> dcols(patch * positions);
#pragma omp for schedule(static)
    for (Index n = 0; n < static_cast<Index>(g.batch); ++n) {
      const auto nn = static_cast<std::size_t>(n);
      std::fill(dcols.begin(), dcols.end(), T{0});
      const T* grad = dy.data() + nn * g.out_channels * positions;
      for (std::size_t co = 0; co < g.out_channels; ++co) {
        const T* wrow = kernels.data() + co * patch;
        const T* grow = grad + co * positions;
        for (std::size_t k = 0; k < patch; ++k) {
          if (wrow[k] != T{0}) axpy(dcols.data() + k * positions, wrow[k], grow, positions);
        }
      }
      col2im_add(g, dcols.data(), dx.data() + nn * in_plane);
    }
  }
}

template <typename T>
void conv2d_backward_kernels(const Conv2dGeometry& g, std::span<const T> x, std::span<const T> dy,
                             std::span<T> dkernels) {
  const std::size_t in_plane = g.in_channels * g.in_height * g.in_width;
  const std::size_t positions = g.out_height() * g.out_width();
  const std::size_t patch = g.patch_size();
  std::vector<T> cols(patch * positions);
  // Images are visited in order so every kernel gradient sums in a fixed order.
  for (std::size_t n = 0; n < g.batch; ++n) {
    im2col(g, x.data() + n * in_plane, cols.data());
    const T* grad = dy.data() + n * g.out_channels * positions;
#pragma omp parallel for schedule(static)
    for (Index co = 0; co < static_cast<Index>(g.out_channels); ++co) {
      const auto c = static_cast<std::size_t>(co);
      const T* grow = grad + c * positions;
      T* drow = dkernels.data() + c * patch;
      for (std::size_t k = 0; k < patch; ++k) drow[k] += dot(grow, cols.data() + k * positions, positions);
    }
  }
}

template <typename T>
void maxpool2d_forward(const PoolGeometry& g, std::span<const T> x, std::span<T> y,
                       std::span<std::size_t> argmax) {
  const std::size_t oh = g.out_height();
  const std::size_t ow = g.out_width();
  const std::size_t in_plane = g.in_height * g.in_width;
#pragma omp parallel for schedule(static)
  for (Index p = 0; p < static_cast<Index>(g.planes); ++p) {
    const auto plane = static_cast<std::size_t>(p);
    const T* in = x.data() + plane * in_plane;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = (oy * g.stride) * g.in_width + ox * g.stride;
        for (std::size_t i = 0; i < g.window; ++i) {
          for (std::size_t j = 0; j < g.window; ++j) {
            const std::size_t idx = (oy * g.stride + i) * g.in_width + ox * g.stride + j;
            if (in[idx] > in[best]) best = idx;
          }
        }
        const std::size_t out_idx = plane * oh * ow + oy * ow + ox;
        y[out_idx] = in[best];
        argmax[out_idx] = plane * in_plane + best;
      }
    }
  }
}

#define BEAMWATCH_INSTANTIATE_KERNELS(T)                                                         \
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

BEAMWATCH_INSTANTIATE_KERNELS(float)
BEAMWATCH_INSTANTIATE_KERNELS(double)

}  // namespace beamwatch::numerics::kernels

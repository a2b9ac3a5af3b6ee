#pragma once

#include <cstddef>
#include <span>

// Raw compute kernels behind the differentiable ops.
//
// Two implementations share every signature: `kernels::` holds the
// OpenMP-parallel versions used in training, `kernels::reference::` holds
// direct serial loops kept as the test oracle and benchmark baseline.
// Backward kernels accumulate (+=) into their outputs.
//
// Parallel kernels never split a single output element across threads, so
// results do not depend on the thread count.

namespace beamwatch::numerics::kernels {

struct Conv2dGeometry {
  std::size_t batch = 1;
  std::size_t in_channels = 1;
  std::size_t in_height = 1;
  std::size_t in_width = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_height = 1;
  std::size_t kernel_width = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;

  std::size_t out_height() const { return (in_height + 2 * padding - kernel_height) / stride + 1; }
  std::size_t out_width() const { return (in_width + 2 * padding - kernel_width) / stride + 1; }
  std::size_t patch_size() const { return in_channels * kernel_height * kernel_width; }
};

struct PoolGeometry {
  std::size_t planes = 1;  // batch * channels
  std::size_t in_height = 1;
  std::size_t in_width = 1;
  std::size_t window = 2;
  std::size_t stride = 1;

  std::size_t out_height() const { return (in_height - window) / stride + 1; }
  std::size_t out_width() const { return (in_width - window) / stride + 1; }
};

/// y[b, o] = sum_i x[b, i] * w[o, i] + bias[o]
template <typename T>
void dense_forward(std::size_t batch, std::size_t in, std::size_t out, std::span<const T> x,
                   std::span<const T> w, std::span<const T> bias, std::span<T> y);

/// dx += dy * w ; dw += dy^T * x ; dbias += column sums of dy. Empty spans are skipped.
template <typename T>
void dense_backward(std::size_t batch, std::size_t in, std::size_t out, std::span<const T> x,
                    std::span<const T> w, std::span<const T> dy, std::span<T> dx, std::span<T> dw,
                    std::span<T> dbias);

template <typename T>
void conv2d_forward(const Conv2dGeometry& g, std::span<const T> x, std::span<const T> kernels,
                    std::span<T> y);

template <typename T>
void conv2d_backward_input(const Conv2dGeometry& g, std::span<const T> kernels,
                           std::span<const T> dy, std::span<T> dx);

template <typename T>
void conv2d_backward_kernels(const Conv2dGeometry& g, std::span<const T> x, std::span<const T> dy,
                             std::span<T> dkernels);

/// Window maximum; `argmax` receives the flat input index of the first (row-major) maximum.
template <typename T>
void maxpool2d_forward(const PoolGeometry& g, std::span<const T> x, std::span<T> y,
                       std::span<std::size_t> argmax);

namespace reference {

template <typename T>
void dense_forward(std::size_t batch, std::size_t in, std::size_t out, std::span<const T> x,
                   std::span<const T> w, std::span<const T> bias, std::span<T> y);

template <typename T>
void dense_backward(std::size_t batch, std::size_t in, std::size_t out, std::span<const T> x,
                    std::span<const T> w, std::span<const T> dy, std::span<T> dx, std::span<T> dw,
                    std::span<T> dbias);

template <typename T>
void conv2d_forward(const Conv2dGeometry& g, std::span<const T> x, std::span<const T> kernels,
                    std::span<T> y);

template <typename T>
void conv2d_backward_input(const Conv2dGeometry& g, std::span<const T> kernels,
                           std::span<const T> dy, std::span<T> dx);

template <typename T>
void conv2d_backward_kernels(const Conv2dGeometry& g, std::span<const T> x, std::span<const T> dy,
                             std::span<T> dkernels);

template <typename T>
void maxpool2d_forward(const PoolGeometry& g, std::span<const T> x, std::span<T> y,
                       std::span<std::size_t> argmax);

}  // namespace reference

}  // namespace beamwatch::numerics::kernels

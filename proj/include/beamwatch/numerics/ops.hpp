#pragma once

#include <cstddef>
#include <span>

#include "beamwatch/numerics/tensor.hpp"
#include "beamwatch/rng.hpp"

namespace beamwatch::numerics {

// ---- elementwise and reductions ------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

template <typename T>
Tensor<T> sum(const Tensor<T>& x);

/// sum(x * weights) with constant weights; handy as a generic scalar probe.
template <typename T>
Tensor<T> weighted_sum(const Tensor<T>& x, std::span<const T> weights);

/// [B, ...] -> [B, prod(...)]
template <typename T>
Tensor<T> flatten(const Tensor<T>& x);

/// Selects rows of a [F, N] tensor; gradients scatter-add back to the source rows.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, std::span<const std::size_t> rows);

// ---- layers ----------------------------------------------------------------

/// y = x W^T + b for x [batch, in], W [out, in], b [out].
template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

/// Cross-correlation of x [N, C_in, H, W] with kernels [C_out, C_in, kH, kW]; no bias.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernels, std::size_t stride,
                 std::size_t padding);

/// Max over k x k windows; gradient goes to the first row-major maximum.
template <typename T>
Tensor<T> maxpool2d(const Tensor<T>& x, std::size_t window, std::size_t stride);

/// Running statistics owned by a batch-norm layer.
template <typename T>
struct BatchNormState {
  explicit BatchNormState(std::size_t channels = 0)
      : running_mean(Shape{channels}), running_var(Shape{channels}, std::vector<T>(channels, T{1})) {}

  Tensor<T> running_mean;
  Tensor<T> running_var;
  std::size_t updates = 0;  // train-mode forward passes seen
  T momentum = T(0.1);
  T eps = T(1e-5);
};

/// Per-channel normalization of x [N, C, H, W]. Train mode normalizes with batch
/// statistics and updates `state`; eval mode uses the running statistics.
template <typename T>
Tensor<T> batchnorm2d(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                      BatchNormState<T>& state, Mode mode);

/// Inverted dropout. Identity in eval mode or when p_drop == 0.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p_drop, Mode mode, Rng& rng);

template <typename T>
struct GruCellParams {
  Tensor<T> w_z, w_r, w_n;  // [hidden, input]
  Tensor<T> u_z, u_r, u_n;  // [hidden, hidden]
  Tensor<T> b_z, b_r, b_n;  // [hidden]

  std::size_t hidden_dim() const { return b_z.dim(0); }
  std::size_t input_dim() const { return w_z.dim(1); }
};

/// One GRU step for x [batch, in] and h_prev [batch, hidden]:
///   z = sigmoid(W_z x + U_z h + b_z)
///   r = sigmoid(W_r x + U_r h + b_r)
///   n = tanh(W_n x + r * (U_n h) + b_n)
///   h' = (1 - z) * n + z * h
template <typename T>
Tensor<T> gru_cell(const Tensor<T>& x, const Tensor<T>& h_prev, const GruCellParams<T>& p);

/// Mean over the batch of -log softmax(logits)[label].
template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels);

/// Row-wise softmax without graph recording.
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits);

namespace testing {
/// Fault injection for mutation tests: when set, gru_cell's backward pass
/// corrupts the W_z gradient. Never set outside self-tests.
void set_gru_backward_fault(bool enabled);
bool gru_backward_fault();
}  // namespace testing

}  // namespace beamwatch::numerics

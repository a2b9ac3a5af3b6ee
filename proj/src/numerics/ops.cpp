#include "beamwatch/numerics/ops.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <memory>
#include <sstream>

#include "beamwatch/error.hpp"
#include "beamwatch/numerics/kernels.hpp"

namespace beamwatch::numerics {

namespace {

template <typename T>
using NodePtr = std::shared_ptr<detail::Node<T>>;

template <typename T>
void require_rank(const Tensor<T>& t, std::size_t rank, const char* op, const char* what) {
  if (t.rank() != rank) {
    std::ostringstream msg;
    msg << op << ": " << what << " must have rank " << rank << ", got " << shape_string(t.shape());
    throw DimensionError(msg.str());
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ");
  }
}

template <typename T>
T sigmoid(T v) {
  return T{1} / (T{1} + std::exp(-v));
}

std::atomic<bool> g_gru_fault{false};

}  // namespace

namespace testing {
void set_gru_backward_fault(bool enabled) { g_gru_fault.store(enabled); }
bool gru_backward_fault() { return g_gru_fault.load(); }
}  // namespace testing

// ---- elementwise and reductions ------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  auto out = detail::make_result<T>(a.shape(), {a.node(), b.node()}, [](detail::Node<T>& self) {
    for (auto& parent : self.parents) {
      if (!parent->requires_grad) continue;
      T* g = parent->grad_data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
  });
  for (std::size_t i = 0; i < out.numel(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
  detail::check_finite(out, "add");
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  auto out = detail::make_result<T>(a.shape(), {a.node(), b.node()}, [](detail::Node<T>& self) {
    auto& lhs = *self.parents[0];
    auto& rhs = *self.parents[1];
    if (lhs.requires_grad) {
      T* g = lhs.grad_data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * rhs.value[i];
    }
    if (rhs.requires_grad) {
      T* g = rhs.grad_data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * lhs.value[i];
    }
  });
  for (std::size_t i = 0; i < out.numel(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
  detail::check_finite(out, "mul");
  return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  auto out = detail::make_result<T>(x.shape(), {x.node()}, [](detail::Node<T>& self) {
    auto& in = *self.parents[0];
    T* g = in.grad_data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (in.value[i] > T{0}) g[i] += self.grad[i];
    }
  });
  for (std::size_t i = 0; i < out.numel(); ++i) out.data()[i] = std::max(x.data()[i], T{0});
  return out;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  auto out = detail::make_result<T>(Shape{1}, {x.node()}, [](detail::Node<T>& self) {
    auto& in = *self.parents[0];
    T* g = in.grad_data();
    for (std::size_t i = 0; i < in.value.size(); ++i) g[i] += self.grad[0];
  });
  T acc{0};
  for (T v : x.values()) acc += v;
  out.data()[0] = acc;
  detail::check_finite(out, "sum");
  return out;
}

template <typename T>
Tensor<T> weighted_sum(const Tensor<T>& x, std::span<const T> weights) {
  if (weights.size() != x.numel()) {
    throw DimensionError("weighted_sum: " + std::to_string(weights.size()) +
                         " weights for tensor " + shape_string(x.shape()));
  }
  auto w = std::make_shared<std::vector<T>>(weights.begin(), weights.end());
  auto out = detail::make_result<T>(Shape{1}, {x.node()}, [w](detail::Node<T>& self) {
    auto& in = *self.parents[0];
    T* g = in.grad_data();
    for (std::size_t i = 0; i < in.value.size(); ++i) g[i] += self.grad[0] * (*w)[i];
  });
  T acc{0};
  for (std::size_t i = 0; i < x.numel(); ++i) acc += x.data()[i] * weights[i];
  out.data()[0] = acc;
  return out;
}

template <typename T>
Tensor<T> flatten(const Tensor<T>& x) {
  if (x.rank() < 1) throw DimensionError("flatten: scalar input");
  const std::size_t batch = x.dim(0);
  const std::size_t rest = batch == 0 ? 0 : x.numel() / batch;
  auto out = detail::make_result<T>(Shape{batch, rest}, {x.node()}, [](detail::Node<T>& self) {
    auto& in = *self.parents[0];
    T* g = in.grad_data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
  std::copy(x.values().begin(), x.values().end(), out.values().begin());
  return out;
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, std::span<const std::size_t> rows) {
  require_rank(table, 2, "gather_rows", "table");
  const std::size_t count = table.dim(0);
  const std::size_t width = table.dim(1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= count) {
      throw LookupError("gather_rows: row " + std::to_string(rows[i]) + " at position " +
                        std::to_string(i) + " outside table of " + std::to_string(count) +
                        " rows");
    }
  }
  auto idx = std::make_shared<std::vector<std::size_t>>(rows.begin(), rows.end());
  auto out = detail::make_result<T>(Shape{rows.size(), width}, {table.node()},
                                    [idx, width](detail::Node<T>& self) {
                                      T* g = self.parents[0]->grad_data();
                                      for (std::size_t i = 0; i < idx->size(); ++i) {
                                        const T* src = self.grad.data() + i * width;
                                        T* dst = g + (*idx)[i] * width;
                                        for (std::size_t j = 0; j < width; ++j) dst[j] += src[j];
                                      }
                                    });
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(table.data() + rows[i] * width, width, out.data() + i * width);
  }
  return out;
}

// ---- layers ----------------------------------------------------------------

template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_rank(x, 2, "dense", "input");
  require_rank(weight, 2, "dense", "weight");
  if (x.dim(1) != weight.dim(1) || bias.rank() != 1 || bias.dim(0) != weight.dim(0)) {
    throw DimensionError("dense: input " + shape_string(x.shape()) + " incompatible with weight " +
                         shape_string(weight.shape()) + " and bias " + shape_string(bias.shape()));
  }
  const std::size_t batch = x.dim(0);
  const std::size_t in = x.dim(1);
  const std::size_t outs = weight.dim(0);
  auto out = detail::make_result<T>(
      Shape{batch, outs}, {x.node(), weight.node(), bias.node()},
      [batch, in, outs](detail::Node<T>& self) {
        auto& xn = *self.parents[0];
        auto& wn = *self.parents[1];
        auto& bn = *self.parents[2];
        std::span<T> dx, dw, db;
        if (xn.requires_grad) dx = std::span<T>(xn.grad_data(), xn.value.size());
        if (wn.requires_grad) dw = std::span<T>(wn.grad_data(), wn.value.size());
        if (bn.requires_grad) db = std::span<T>(bn.grad_data(), bn.value.size());
        kernels::dense_backward<T>(batch, in, outs, xn.value, wn.value, self.grad, dx, dw, db);
      });
  kernels::dense_forward<T>(batch, in, outs, x.values(), weight.values(), bias.values(),
                            out.values());
  detail::check_finite(out, "dense");
  return out;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& k, std::size_t stride, std::size_t padding) {
  require_rank(x, 4, "conv2d", "input");
  require_rank(k, 4, "conv2d", "kernels");
  if (x.dim(1) != k.dim(1)) {
    throw DimensionError("conv2d: input " + shape_string(x.shape()) + " has " +
                         std::to_string(x.dim(1)) + " channels but kernels " +
                         shape_string(k.shape()) + " expect " + std::to_string(k.dim(1)));
  }
  if (stride == 0) throw ConfigError("conv2d: stride must be positive");
  kernels::Conv2dGeometry g;
  g.batch = x.dim(0);
  g.in_channels = x.dim(1);
  g.in_height = x.dim(2);
  g.in_width = x.dim(3);
  g.out_channels = k.dim(0);
  g.kernel_height = k.dim(2);
  g.kernel_width = k.dim(3);
  g.stride = stride;
  g.padding = padding;
  const std::size_t ph = g.in_height + 2 * padding;
  const std::size_t pw = g.in_width + 2 * padding;
  if (g.kernel_height > ph || g.kernel_width > pw) {
    throw ConfigError("conv2d: kernel " + shape_string(k.shape()) +
                      " larger than padded input " + std::to_string(ph) + "x" + std::to_string(pw));
  }
  if ((ph - g.kernel_height) % stride != 0 || (pw - g.kernel_width) % stride != 0) {
    throw ConfigError("conv2d: output size is not integral for input " + shape_string(x.shape()) +
                      ", kernel " + shape_string(k.shape()) + ", stride " + std::to_string(stride) +
                      ", padding " + std::to_string(padding));
  }
  auto out = detail::make_result<T>(
      Shape{g.batch, g.out_channels, g.out_height(), g.out_width()}, {x.node(), k.node()},
      [g](detail::Node<T>& self) {
        auto& xn = *self.parents[0];
        auto& kn = *self.parents[1];
        if (xn.requires_grad) {
          kernels::conv2d_backward_input<T>(g, kn.value, self.grad,
                                            std::span<T>(xn.grad_data(), xn.value.size()));
        }
        if (kn.requires_grad) {
          kernels::conv2d_backward_kernels<T>(g, xn.value, self.grad,
                                              std::span<T>(kn.grad_data(), kn.value.size()));
        }
      });
  kernels::conv2d_forward<T>(g, x.values(), k.values(), out.values());
  detail::check_finite(out, "conv2d");
  return out;
}

template <typename T>
Tensor<T> maxpool2d(const Tensor<T>& x, std::size_t window, std::size_t stride) {
  require_rank(x, 4, "maxpool2d", "input");
  if (window == 0 || stride == 0) throw ConfigError("maxpool2d: window and stride must be positive");
  if (window > x.dim(2) || window > x.dim(3)) {
    throw ConfigError("maxpool2d: window " + std::to_string(window) + " larger than input " +
                      shape_string(x.shape()));
  }
  kernels::PoolGeometry g;
  g.planes = x.dim(0) * x.dim(1);
  g.in_height = x.dim(2);
  g.in_width = x.dim(3);
  g.window = window;
  g.stride = stride;
  auto argmax = std::make_shared<std::vector<std::size_t>>(g.planes * g.out_height() * g.out_width());
  auto out = detail::make_result<T>(Shape{x.dim(0), x.dim(1), g.out_height(), g.out_width()},
                                    {x.node()}, [argmax](detail::Node<T>& self) {
                                      T* g_in = self.parents[0]->grad_data();
                                      for (std::size_t i = 0; i < self.grad.size(); ++i) {
                                        g_in[(*argmax)[i]] += self.grad[i];
                                      }
                                    });
  kernels::maxpool2d_forward<T>(g, x.values(), out.values(), *argmax);
  return out;
}

template <typename T>
Tensor<T> batchnorm2d(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                      BatchNormState<T>& state, Mode mode) {
  require_rank(x, 4, "batchnorm2d", "input");
  const std::size_t n = x.dim(0);
  const std::size_t c = x.dim(1);
  const std::size_t hw = x.dim(2) * x.dim(3);
  if (gamma.numel() != c || beta.numel() != c || state.running_mean.numel() != c) {
    throw DimensionError("batchnorm2d: input " + shape_string(x.shape()) + " with gamma " +
                         shape_string(gamma.shape()) + ", beta " + shape_string(beta.shape()) +
                         ", running stats of " + std::to_string(state.running_mean.numel()));
  }
  const std::size_t m = n * hw;
  auto xhat = std::make_shared<std::vector<T>>(x.numel());
  auto inv_std = std::make_shared<std::vector<T>>(c);

  if (mode == Mode::kTrain) {
    if (m < 2) {
      throw ValidationError("batchnorm2d: train mode needs at least 2 values per channel, got " +
                            std::to_string(m));
    }
    for (std::size_t ch = 0; ch < c; ++ch) {
      T mean{0};
      for (std::size_t b = 0; b < n; ++b) {
        const T* plane = x.data() + (b * c + ch) * hw;
        for (std::size_t i = 0; i < hw; ++i) mean += plane[i];
      }
      mean /= static_cast<T>(m);
      T var{0};
      for (std::size_t b = 0; b < n; ++b) {
        const T* plane = x.data() + (b * c + ch) * hw;
        for (std::size_t i = 0; i < hw; ++i) var += (plane[i] - mean) * (plane[i] - mean);
      }
      var /= static_cast<T>(m);
      (*inv_std)[ch] = T{1} / std::sqrt(var + state.eps);
      for (std::size_t b = 0; b < n; ++b) {
        const T* plane = x.data() + (b * c + ch) * hw;
        T* out_plane = xhat->data() + (b * c + ch) * hw;
        for (std::size_t i = 0; i < hw; ++i) out_plane[i] = (plane[i] - mean) * (*inv_std)[ch];
      }
      const T unbiased = var * static_cast<T>(m) / static_cast<T>(m - 1);
      state.running_mean.data()[ch] =
          (T{1} - state.momentum) * state.running_mean.data()[ch] + state.momentum * mean;
      state.running_var.data()[ch] =
          (T{1} - state.momentum) * state.running_var.data()[ch] + state.momentum * unbiased;
    }
    ++state.updates;
  } else {
    if (state.updates == 0) {
      throw ValidationError("batchnorm2d: eval mode before any train step (uninitialized statistics)");
    }
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T mean = state.running_mean.data()[ch];
      (*inv_std)[ch] = T{1} / std::sqrt(state.running_var.data()[ch] + state.eps);
      for (std::size_t b = 0; b < n; ++b) {
        const T* plane = x.data() + (b * c + ch) * hw;
        T* out_plane = xhat->data() + (b * c + ch) * hw;
        for (std::size_t i = 0; i < hw; ++i) out_plane[i] = (plane[i] - mean) * (*inv_std)[ch];
      }
    }
  }

  const bool train = mode == Mode::kTrain;
  auto out = detail::make_result<T>(
      x.shape(), {x.node(), gamma.node(), beta.node()},
      [xhat, inv_std, n, c, hw, m, train](detail::Node<T>& self) {
        auto& xn = *self.parents[0];
        auto& gn = *self.parents[1];
        auto& bn = *self.parents[2];
        for (std::size_t ch = 0; ch < c; ++ch) {
          T sum_dy{0};
          T sum_dy_xhat{0};
          for (std::size_t b = 0; b < n; ++b) {
            const std::size_t base = (b * c + ch) * hw;
            for (std::size_t i = 0; i < hw; ++i) {
              sum_dy += self.grad[base + i];
              sum_dy_xhat += self.grad[base + i] * (*xhat)[base + i];
            }
          }
          if (gn.requires_grad) gn.grad_data()[ch] += sum_dy_xhat;
          if (bn.requires_grad) bn.grad_data()[ch] += sum_dy;
          if (!xn.requires_grad) continue;
          T* dx = xn.grad_data();
          const T g = gn.value[ch];
          const T scale = g * (*inv_std)[ch];
          for (std::size_t b = 0; b < n; ++b) {
            const std::size_t base = (b * c + ch) * hw;
            for (std::size_t i = 0; i < hw; ++i) {
              if (train) {
                const T mm = static_cast<T>(m);
                dx[base + i] += scale / mm *
                                (mm * self.grad[base + i] - sum_dy - (*xhat)[base + i] * sum_dy_xhat);
              } else {
                dx[base + i] += scale * self.grad[base + i];
              }
            }
          }
        }
      });
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t base = (b * c + ch) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        out.data()[base + i] = gamma.data()[ch] * (*xhat)[base + i] + beta.data()[ch];
      }
    }
  }
  detail::check_finite(out, "batchnorm2d");
  return out;
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p_drop, Mode mode, Rng& rng) {
  if (!(p_drop >= 0.0 && p_drop < 1.0)) {
    throw ConfigError("dropout: rate must lie in [0, 1), got " + std::to_string(p_drop));
  }
  if (mode == Mode::kEval || p_drop == 0.0) return x;
  const T scale = static_cast<T>(1.0 / (1.0 - p_drop));
  auto mask = std::make_shared<std::vector<T>>(x.numel());
  for (auto& v : *mask) v = rng.bernoulli(p_drop) ? T{0} : scale;
  auto out = detail::make_result<T>(x.shape(), {x.node()}, [mask](detail::Node<T>& self) {
    T* g = self.parents[0]->grad_data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * (*mask)[i];
  });
  for (std::size_t i = 0; i < x.numel(); ++i) out.data()[i] = x.data()[i] * (*mask)[i];
  return out;
}

template <typename T>
Tensor<T> gru_cell(const Tensor<T>& x, const Tensor<T>& h_prev, const GruCellParams<T>& p) {
  require_rank(x, 2, "gru_cell", "input");
  require_rank(h_prev, 2, "gru_cell", "hidden state");
  const std::size_t hidden = p.b_z.numel();
  const std::size_t in = x.dim(1);
  const std::size_t batch = x.dim(0);
  auto check = [&](const Tensor<T>& t, const char* gate, Shape expected) {
    if (t.shape() != expected) {
      throw DimensionError(std::string("gru_cell: ") + gate + " has shape " +
                           shape_string(t.shape()) + ", expected " + shape_string(expected));
    }
  };
  check(p.w_z, "update gate W_z", {hidden, in});
  check(p.w_r, "reset gate W_r", {hidden, in});
  check(p.w_n, "candidate W_n", {hidden, in});
  check(p.u_z, "update gate U_z", {hidden, hidden});
  check(p.u_r, "reset gate U_r", {hidden, hidden});
  check(p.u_n, "candidate U_n", {hidden, hidden});
  check(p.b_r, "reset gate b_r", {hidden});
  check(p.b_n, "candidate b_n", {hidden});
  check(h_prev, "hidden state h_prev", {batch, hidden});

  // Saved activations, each [batch, hidden].
  struct Saved {
    std::vector<T> z, r, n, un;
  };
  auto saved = std::make_shared<Saved>();
  const std::size_t bh = batch * hidden;
  saved->z.resize(bh);
  saved->r.resize(bh);
  saved->n.resize(bh);
  saved->un.resize(bh);
  std::vector<T> xz(bh), xr(bh), xn(bh), hz(bh), hr(bh);
  kernels::dense_forward<T>(batch, in, hidden, x.values(), p.w_z.values(), p.b_z.values(), xz);
  kernels::dense_forward<T>(batch, in, hidden, x.values(), p.w_r.values(), p.b_r.values(), xr);
  kernels::dense_forward<T>(batch, in, hidden, x.values(), p.w_n.values(), p.b_n.values(), xn);
  kernels::dense_forward<T>(batch, hidden, hidden, h_prev.values(), p.u_z.values(), {}, hz);
  kernels::dense_forward<T>(batch, hidden, hidden, h_prev.values(), p.u_r.values(), {}, hr);
  kernels::dense_forward<T>(batch, hidden, hidden, h_prev.values(), p.u_n.values(), {}, saved->un);

  auto out = detail::make_result<T>(
      Shape{batch, hidden},
      {x.node(), h_prev.node(), p.w_z.node(), p.w_r.node(), p.w_n.node(), p.u_z.node(),
       p.u_r.node(), p.u_n.node(), p.b_z.node(), p.b_r.node(), p.b_n.node()},
      [saved, batch, in, hidden](detail::Node<T>& self) {
        auto& xv = *self.parents[0];
        auto& hv = *self.parents[1];
        const std::size_t bh = batch * hidden;
        std::vector<T> daz(bh), dar(bh), dan(bh), dun(bh), dh(bh);
        for (std::size_t i = 0; i < bh; ++i) {
          const T g = self.grad[i];
          const T z = saved->z[i];
          const T r = saved->r[i];
          const T n = saved->n[i];
          const T dz = g * (hv.value[i] - n);
          const T dn = g * (T{1} - z);
          dh[i] = g * z;
          dan[i] = dn * (T{1} - n * n);
          dun[i] = dan[i] * r;
          dar[i] = dan[i] * saved->un[i] * r * (T{1} - r);
          daz[i] = dz * z * (T{1} - z);
        }
        auto grad_of = [](detail::Node<T>& node) {
          return node.requires_grad ? std::span<T>(node.grad_data(), node.value.size())
                                    : std::span<T>{};
        };
        std::span<T> dx = grad_of(xv);
        auto& wz = *self.parents[2];
        auto& wr = *self.parents[3];
        auto& wn = *self.parents[4];
        auto& uz = *self.parents[5];
        auto& ur = *self.parents[6];
        auto& un = *self.parents[7];
        auto& bz = *self.parents[8];
        auto& br = *self.parents[9];
        auto& bn = *self.parents[10];
        if (testing::gru_backward_fault()) {
          for (auto& v : daz) v *= T(1.05);
        }
        kernels::dense_backward<T>(batch, in, hidden, xv.value, wz.value, daz, dx, grad_of(wz),
                                   grad_of(bz));
        kernels::dense_backward<T>(batch, in, hidden, xv.value, wr.value, dar, dx, grad_of(wr),
                                   grad_of(br));
        kernels::dense_backward<T>(batch, in, hidden, xv.value, wn.value, dan, dx, grad_of(wn),
                                   grad_of(bn));
        if (testing::gru_backward_fault()) {
          for (auto& v : daz) v /= T(1.05);
        }
        kernels::dense_backward<T>(batch, hidden, hidden, hv.value, uz.value, daz, dh,
                                   grad_of(uz), {});
        kernels::dense_backward<T>(batch, hidden, hidden, hv.value, ur.value, dar, dh,
                                   grad_of(ur), {});
        kernels::dense_backward<T>(batch, hidden, hidden, hv.value, un.value, dun, dh,
                                   grad_of(un), {});
        if (hv.requires_grad) {
          T* g = hv.grad_data();
          for (std::size_t i = 0; i < bh; ++i) g[i] += dh[i];
        }
      });

  for (std::size_t i = 0; i < bh; ++i) {
    const T z = sigmoid(xz[i] + hz[i]);
    const T r = sigmoid(xr[i] + hr[i]);
    const T n = std::tanh(xn[i] + r * saved->un[i]);
    saved->z[i] = z;
    saved->r[i] = r;
    saved->n[i] = n;
    out.data()[i] = (T{1} - z) * n + z * h_prev.data()[i];
  }
  detail::check_finite(out, "gru_cell");
  return out;
}

template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
  require_rank(logits, 2, "softmax_cross_entropy", "logits");
  const std::size_t batch = logits.dim(0);
  const std::size_t classes = logits.dim(1);
  if (labels.size() != batch) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for logits " + shape_string(logits.shape()));
  }
  if (batch == 0) throw ValidationError("softmax_cross_entropy: empty batch");
  for (std::size_t i = 0; i < batch; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw ValidationError("softmax_cross_entropy: label " + std::to_string(labels[i]) +
                            " at index " + std::to_string(i) + " outside [0, " +
                            std::to_string(classes) + ")");
    }
  }
  auto probs = std::make_shared<std::vector<T>>(batch * classes);
  T loss{0};
  for (std::size_t b = 0; b < batch; ++b) {
    const T* row = logits.data() + b * classes;
    const T peak = *std::max_element(row, row + classes);
    T denom{0};
    for (std::size_t c = 0; c < classes; ++c) denom += std::exp(row[c] - peak);
    const T log_denom = std::log(denom);
    for (std::size_t c = 0; c < classes; ++c) {
      (*probs)[b * classes + c] = std::exp(row[c] - peak - log_denom);
    }
    loss += log_denom - (row[labels[b]] - peak);
  }
  auto label_copy = std::make_shared<std::vector<int>>(labels.begin(), labels.end());
  auto out = detail::make_result<T>(
      Shape{1}, {logits.node()}, [probs, label_copy, batch, classes](detail::Node<T>& self) {
        T* g = self.parents[0]->grad_data();
        const T scale = self.grad[0] / static_cast<T>(batch);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t c = 0; c < classes; ++c) {
            const T onehot = static_cast<std::size_t>((*label_copy)[b]) == c ? T{1} : T{0};
            g[b * classes + c] += scale * ((*probs)[b * classes + c] - onehot);
          }
        }
      });
  out.data()[0] = loss / static_cast<T>(batch);
  detail::check_finite(out, "softmax_cross_entropy");
  return out;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
  require_rank(logits, 2, "softmax", "logits");
  Tensor<T> out(logits.shape());
  const std::size_t classes = logits.dim(1);
  for (std::size_t b = 0; b < logits.dim(0); ++b) {
    const T* row = logits.data() + b * classes;
    T* dst = out.data() + b * classes;
    const T peak = *std::max_element(row, row + classes);
    T denom{0};
    for (std::size_t c = 0; c < classes; ++c) {
      dst[c] = std::exp(row[c] - peak);
      denom += dst[c];
    }
    for (std::size_t c = 0; c < classes; ++c) dst[c] /= denom;
  }
  return out;
}

#define BEAMWATCH_INSTANTIATE_OPS(T)                                                            \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> relu(const Tensor<T>&);                                                    \
  template Tensor<T> sum(const Tensor<T>&);                                                     \
  template Tensor<T> weighted_sum(const Tensor<T>&, std::span<const T>);                        \
  template Tensor<T> flatten(const Tensor<T>&);                                                 \
  template Tensor<T> gather_rows(const Tensor<T>&, std::span<const std::size_t>);               \
  template Tensor<T> dense(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);               \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, std::size_t, std::size_t);      \
  template Tensor<T> maxpool2d(const Tensor<T>&, std::size_t, std::size_t);                     \
  template Tensor<T> batchnorm2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,          \
                                 BatchNormState<T>&, Mode);                                     \
  template Tensor<T> dropout(const Tensor<T>&, double, Mode, Rng&);                             \
  template Tensor<T> gru_cell(const Tensor<T>&, const Tensor<T>&, const GruCellParams<T>&);     \
  template Tensor<T> softmax_cross_entropy(const Tensor<T>&, std::span<const int>);             \
  template Tensor<T> softmax(const Tensor<T>&);

BEAMWATCH_INSTANTIATE_OPS(float)
BEAMWATCH_INSTANTIATE_OPS(double)

}  // namespace beamwatch::numerics

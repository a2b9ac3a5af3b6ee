#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace beamwatch::numerics {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Train mode uses batch statistics and random dropout masks; eval is deterministic.
enum class Mode { kTrain, kEval };

namespace detail {

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // lazily allocated, same size as value
  bool requires_grad = false;
  std::string name;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  T* grad_data() {
    if (grad.empty()) grad.assign(value.size(), T{0});
    return grad.data();
  }
};

bool finite_checks_enabled();

}  // namespace detail

/// True unless a NoGradGuard is alive on this thread.
bool grad_enabled();

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Dense row-major array with an optional gradient and a link into the tape.
///
/// Tensors are handles: copies share storage. Operations on tensors that
/// require gradients record a backward closure; `backward()` on a scalar
/// result walks the recorded graph in reverse topological order.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);

  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t numel() const { return node_->value.size(); }

  std::span<T> values() { return node_->value; }
  std::span<const T> values() const { return node_->value; }
  T* data() { return node_->value.data(); }
  const T* data() const { return node_->value.data(); }

  /// Scalar value of a one-element tensor.
  T item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool flag) { node_->requires_grad = flag; }

  bool has_grad() const { return !node_->grad.empty(); }
  /// Gradient view; empty when no gradient has been accumulated.
  std::span<T> grad() { return node_->grad; }
  std::span<const T> grad() const { return node_->grad; }
  void zero_grad();

  const std::string& name() const { return node_->name; }
  Tensor& set_name(std::string name) {
    node_->name = std::move(name);
    return *this;
  }

  /// New leaf sharing no storage or history with this tensor.
  Tensor clone() const;
  /// Same values, cut from the graph, never requires grad.
  Tensor detach() const;

  /// Back-propagates from this scalar into every reachable tensor that requires grad.
  void backward();

  std::shared_ptr<detail::Node<T>> node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node<T>> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node<T>> node_;
};

namespace detail {

/// Allocates an op result and, when any parent requires grad and recording is on,
/// wires the parents and backward closure into it.
template <typename T>
Tensor<T> make_result(Shape shape, std::vector<std::shared_ptr<Node<T>>> parents,
                      std::function<void(Node<T>&)> backward_fn);

/// Throws NumericError when finite checking is enabled and values contain NaN/Inf.
template <typename T>
void check_finite(const Tensor<T>& t, const char* op);

}  // namespace detail

extern template class Tensor<float>;
extern template class Tensor<double>;

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace beamwatch::numerics

#include "beamwatch/numerics/tensor.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>
#include <unordered_set>

#include "beamwatch/error.hpp"

namespace beamwatch::numerics {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace {
thread_local bool t_grad_enabled = true;
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

namespace detail {

bool finite_checks_enabled() {
  static const bool enabled = [] {
    const char* env = std::getenv("NUMERICS_CHECK_FINITE");
    return env != nullptr && std::string(env) == "1";
  }();
  return enabled;
}

template <typename T>
Tensor<T> make_result(Shape shape, std::vector<std::shared_ptr<Node<T>>> parents,
                      std::function<void(Node<T>&)> backward_fn) {
  auto node = std::make_shared<Node<T>>();
  node->value.assign(shape_numel(shape), T{0});
  node->shape = std::move(shape);
  bool needs_grad = false;
  if (grad_enabled()) {
    for (const auto& p : parents) needs_grad = needs_grad || (p && p->requires_grad);
  }
  if (needs_grad) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor<T>(std::move(node));
}

template <typename T>
void check_finite(const Tensor<T>& t, const char* op) {
  if (!finite_checks_enabled()) return;
  for (std::size_t i = 0; i < t.numel(); ++i) {
    if (!std::isfinite(t.values()[i])) {
      std::ostringstream msg;
      msg << op << ": non-finite value at flat index " << i << " of tensor "
          << shape_string(t.shape());
      throw NumericError(msg.str());
    }
  }
}

template Tensor<float> make_result(Shape, std::vector<std::shared_ptr<Node<float>>>,
                                   std::function<void(Node<float>&)>);
template Tensor<double> make_result(Shape, std::vector<std::shared_ptr<Node<double>>>,
                                    std::function<void(Node<double>&)>);
template void check_finite(const Tensor<float>&, const char*);
template void check_finite(const Tensor<double>&, const char*);

}  // namespace detail

template <typename T>
Tensor<T>::Tensor(Shape shape, bool requires_grad) : node_(std::make_shared<detail::Node<T>>()) {
  node_->value.assign(shape_numel(shape), T{0});
  node_->shape = std::move(shape);
  node_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values, bool requires_grad)
    : node_(std::make_shared<detail::Node<T>>()) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor: shape " + shape_string(shape) + " holds " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<T>{value}, requires_grad);
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) {
    throw DimensionError("item: tensor " + shape_string(shape()) + " is not a scalar");
  }
  return node_->value[0];
}

template <typename T>
void Tensor<T>::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), T{0});
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  Tensor copy(shape(), node_->value, requires_grad());
  copy.node_->name = node_->name;
  return copy;
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor(shape(), node_->value, false);
}

template <typename T>
void Tensor<T>::backward() {
  if (numel() != 1) {
    throw DimensionError("backward: output " + shape_string(shape()) + " is not a scalar");
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order of the tape.
  std::vector<detail::Node<T>*> order;
  std::unordered_set<const detail::Node<T>*> visited;
  std::vector<std::pair<detail::Node<T>*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node<T>* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->grad_data()[0] += T{1};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node<T>* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace beamwatch::numerics

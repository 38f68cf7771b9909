#pragma once

// Private graph machinery shared by the tensor translation units.

#include <functional>

#include "advspec/tensor.hpp"

namespace advspec {

namespace detail {

using BackwardFn = std::function<std::vector<Tensor>(
    const Tensor& grad_out, const std::vector<bool>& needed)>;

struct TensorImpl {
  Shape shape;
  std::vector<double> values;
  bool requires_grad = false;
  std::shared_ptr<TensorImpl> grad;
  std::shared_ptr<Node> grad_fn;
};

struct Node {
  std::uint64_t sequence = 0;
  const char* name = "";
  bool supports_double_backward = true;
  bool released = false;
  std::vector<Tensor> inputs;
  std::vector<bool> input_requires_grad;
  BackwardFn backward;

  static const std::shared_ptr<TensorImpl>& impl_of(const Tensor& t) {
    return t.impl_;
  }
  static Tensor wrap(std::shared_ptr<TensorImpl> impl) {
    return Tensor(std::move(impl));
  }

  void release() {
    released = true;
    backward = nullptr;
    inputs.clear();
  }
};

}  // namespace detail

class TensorAccess {
 public:
  static detail::TensorImpl& impl(const Tensor& t) { return *t.impl_; }
  static Tensor make(Shape shape, std::vector<double> values) {
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = std::move(shape);
    impl->values = std::move(values);
    return Tensor(std::move(impl));
  }
};

// Attaches a backward node to `out` when grad mode is on and any input
// requires a gradient. Returns `out`.
Tensor record(const char* name, Tensor out, std::vector<Tensor> inputs,
              detail::BackwardFn backward, bool supports_double_backward = true);

inline std::vector<double>& values_of(const Tensor& t) {
  return TensorAccess::impl(t).values;
}

}  // namespace advspec

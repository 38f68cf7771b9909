#pragma once

// Dense row-major tensors of doubles with reverse-mode automatic
// differentiation.
//
// Operations record themselves on a dynamic graph when gradient mode is on
// and at least one input requires a gradient. Every node carries a sequence
// number taken from a global counter, so creation order is a topological
// order of the graph; backward replays the reachable nodes in descending
// sequence order.
//
// Gradients of gradients are supported for the piecewise-linear closure used
// by the critic: add, sub, mul, scale, neg, matmul, transpose, reshape,
// sum, mean, sum_except, broadcast_along, add_bias, relu, leaky_relu,
// clamp_min, conv1d, conv1d_transpose and conv1d_kernel_grad. The remaining
// operations (tanh, sigmoid, exp, log, sqrt, softmax_rows, max_pool1d,
// pick_columns) have first-order backward only; asking for create_graph
// through them raises autograd_error.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace advspec {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class shape_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class autograd_error : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

namespace detail {
struct TensorImpl;
struct Node;
}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim() const { return shape().size(); }
  std::size_t size(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  // Writable view for in-place parameter updates. Only leaves may be
  // mutated; tensors produced by a recorded operation throw.
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t flat_index) const { return data()[flat_index]; }

  bool requires_grad() const;
  Tensor& set_requires_grad(bool value);
  bool is_leaf() const;

  // Accumulated gradient from backward(); undefined tensor if none.
  Tensor grad() const;
  void zero_grad();

  // Reverse pass from a scalar. The recorded graph is freed afterwards
  // unless retain_graph is set; a second call on a freed graph throws.
  void backward(bool retain_graph = false) const;

  // Same values, cut from the graph.
  Tensor detach() const;
  // Name of the recording operation, empty for leaves.
  std::string grad_fn_name() const;

  bool same_as(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl)
      : impl_(std::move(impl)) {}

  std::shared_ptr<detail::TensorImpl> impl_;

  friend struct detail::Node;
  friend class TensorAccess;
};

struct GradOptions {
  bool retain_graph = false;
  // Record the backward computation itself so the returned gradients can
  // be differentiated again. Implies retain_graph.
  bool create_graph = false;
};

// Gradients of a scalar output with respect to inputs; does not touch
// .grad() of any tensor. Inputs that the output does not depend on get a
// zero tensor of their shape.
std::vector<Tensor> grad(const Tensor& output, std::span<const Tensor> inputs,
                         GradOptions options = {});

bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Reachable graph from a scalar, in backward replay order.
struct Tape {
  std::vector<std::string> op_names;
  std::vector<std::uint64_t> sequence;

  static Tape record_from(const Tensor& root);
};

// Elementwise arithmetic. Shapes must match, or one side must hold a single
// element, which is broadcast.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);
Tensor neg(const Tensor& x);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }
inline Tensor operator+(const Tensor& a, double s) { return add_scalar(a, s); }
inline Tensor operator-(const Tensor& a, double s) { return add_scalar(a, -s); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& x, Shape shape);

Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope = 0.2);
Tensor clamp_min(const Tensor& x, double floor);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor sqrt(const Tensor& x);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Sums every axis except `axis`; result has shape [x.size(axis)].
Tensor sum_except(const Tensor& x, std::size_t axis);
// Inverse layout of sum_except: v of shape [shape[axis]] repeated over the
// other axes.
Tensor broadcast_along(const Tensor& v, std::size_t axis, const Shape& shape);
// x + b broadcast along `axis`.
Tensor add_bias(const Tensor& x, const Tensor& bias, std::size_t axis);

// Row-wise softmax of a 2-D tensor.
Tensor softmax_rows(const Tensor& x);
// Non-overlapping max pooling over the last axis of [N, C, L].
Tensor max_pool1d(const Tensor& x, std::size_t window);
// out[i] = x[i, columns[i]] for a 2-D x.
Tensor pick_columns(const Tensor& x, std::span<const int> columns);

// Cross-correlation. x is [N, C_in, L] or [C_in, L]; kernel is
// [C_out, C_in, K]. Output length floor((L + 2 pad - K) / stride) + 1.
Tensor conv1d(const Tensor& x, const Tensor& kernel, std::size_t stride,
              std::size_t pad);
// Adjoint of conv1d with the same kernel: x is [N, C_out, L], kernel is
// [C_out, C_in, K], result [N, C_in, (L - 1) stride - 2 pad + K + out_pad].
Tensor conv1d_transpose(const Tensor& x, const Tensor& kernel,
                        std::size_t stride, std::size_t pad,
                        std::size_t out_pad);
// Gradient of conv1d with respect to its kernel:
// out[o, c, j] = sum_{n, t} grad_out[n, o, t] x[n, c, t stride - pad + j].
Tensor conv1d_kernel_grad(const Tensor& x, const Tensor& grad_out,
                          std::size_t kernel_size, std::size_t stride,
                          std::size_t pad);

// Per-sample Euclidean norm of d f(x)_n / d x_n for a function whose output
// has one scalar per sample (shape [N] or [N, 1]). Returns shape [N]. With
// create_graph the norms stay differentiable with respect to whatever f
// closes over.
Tensor input_gradient_norms(const Tensor& x, const Tensor& per_sample_output,
                            bool create_graph);

}  // namespace advspec

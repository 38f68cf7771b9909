#include "advspec/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "graph.hpp"

namespace advspec {

namespace {

thread_local bool g_grad_enabled = true;
std::atomic<std::uint64_t> g_next_sequence{1};

using detail::Node;
using detail::TensorImpl;

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

namespace {

class GradModeGuard {
 public:
  explicit GradModeGuard(bool enabled) : previous_(g_grad_enabled) {
    g_grad_enabled = enabled;
  }
  ~GradModeGuard() { g_grad_enabled = previous_; }

 private:
  bool previous_;
};

}  // namespace

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw shape_error("tensor shape " + shape_str(shape) + " holds " +
                      std::to_string(shape_numel(shape)) + " values, got " +
                      std::to_string(values.size()));
  }
  for (auto d : shape) {
    if (d == 0) throw shape_error("tensor dimensions must be positive: " + shape_str(shape));
  }
  Tensor t = TensorAccess::make(std::move(shape), std::move(values));
  t.impl_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = shape_numel(shape);
  return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto n = shape_numel(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
  if (!impl_) throw std::logic_error("undefined tensor");
  return impl_->shape;
}

std::size_t Tensor::size(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw shape_error("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }

std::span<const double> Tensor::data() const {
  if (!impl_) throw std::logic_error("undefined tensor");
  return impl_->values;
}

std::span<double> Tensor::mutable_data() {
  if (!impl_) throw std::logic_error("undefined tensor");
  if (impl_->grad_fn) throw autograd_error("cannot mutate a non-leaf tensor in place");
  return impl_->values;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw shape_error("item() needs a single-element tensor, got " + shape_str(shape()));
  }
  return impl_->values[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool value) {
  if (!impl_) throw std::logic_error("undefined tensor");
  if (impl_->grad_fn && !value) {
    throw autograd_error("cannot clear requires_grad on a non-leaf tensor; use detach()");
  }
  impl_->requires_grad = value;
  return *this;
}

bool Tensor::is_leaf() const { return impl_ && !impl_->grad_fn; }

Tensor Tensor::grad() const {
  if (!impl_ || !impl_->grad) return Tensor();
  return Tensor(impl_->grad);
}

void Tensor::zero_grad() {
  if (impl_) impl_->grad.reset();
}

Tensor Tensor::detach() const {
  return TensorAccess::make(shape(), impl_->values);
}

std::string Tensor::grad_fn_name() const {
  if (!impl_ || !impl_->grad_fn) return {};
  return impl_->grad_fn->name;
}

Tensor record(const char* name, Tensor out, std::vector<Tensor> inputs,
              detail::BackwardFn backward, bool supports_double_backward) {
  if (!g_grad_enabled) return out;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return out;

  auto node = std::make_shared<Node>();
  node->sequence = g_next_sequence.fetch_add(1);
  node->name = name;
  node->supports_double_backward = supports_double_backward;
  node->input_requires_grad.reserve(inputs.size());
  for (const auto& in : inputs) node->input_requires_grad.push_back(in.requires_grad());
  node->inputs = std::move(inputs);
  node->backward = std::move(backward);

  auto& impl = TensorAccess::impl(out);
  impl.grad_fn = std::move(node);
  impl.requires_grad = true;
  return out;
}

namespace {

std::vector<std::shared_ptr<Node>> collect_nodes(const Tensor& root) {
  std::vector<std::shared_ptr<Node>> nodes;
  std::unordered_set<const Node*> seen;
  std::vector<std::shared_ptr<Node>> stack;
  const auto& root_fn = Node::impl_of(root)->grad_fn;
  if (root_fn) stack.push_back(root_fn);
  while (!stack.empty()) {
    auto node = std::move(stack.back());
    stack.pop_back();
    if (!seen.insert(node.get()).second) continue;
    if (node->released) {
      throw autograd_error(
          std::string("backward through a graph that was already freed (op ") +
          node->name + "); a second backward needs retain_graph on the first call");
    }
    for (const auto& in : node->inputs) {
      const auto& fn = Node::impl_of(in)->grad_fn;
      if (fn && !seen.count(fn.get())) stack.push_back(fn);
    }
    nodes.push_back(std::move(node));
  }
  std::sort(nodes.begin(), nodes.end(),
            [](const auto& a, const auto& b) { return a->sequence > b->sequence; });
  return nodes;
}

Tensor accumulate(const Tensor& existing, const Tensor& incoming, bool create_graph) {
  if (!existing.defined()) return incoming;
  if (create_graph) return add(existing, incoming);
  NoGradGuard guard;
  return add(existing, incoming);
}

struct EngineResult {
  std::unordered_map<const TensorImpl*, Tensor> leaf_grads;
  std::unordered_map<const Node*, Tensor> node_grads;
};

// Runs the reverse pass. When `targets` is non-empty, only paths that reach
// one of them are evaluated.
EngineResult run_backward(const Tensor& root, std::span<const Tensor> targets,
                          bool retain_graph, bool create_graph) {
  if (!root.defined()) throw std::logic_error("backward on an undefined tensor");
  if (root.numel() != 1) {
    throw shape_error("backward needs a scalar output, got shape " + shape_str(root.shape()));
  }
  if (!root.requires_grad()) {
    throw autograd_error("output does not require grad; nothing was recorded");
  }

  EngineResult result;
  const auto& root_impl = Node::impl_of(root);
  Tensor seed = Tensor::full(root.shape(), 1.0);
  if (!root_impl->grad_fn) {
    result.leaf_grads[root_impl.get()] = seed;
    return result;
  }

  auto nodes = collect_nodes(root);

  // Prune to paths that reach a target: ascending sequence order visits
  // producers before consumers.
  std::unordered_set<const TensorImpl*> target_leaves;
  std::unordered_set<const Node*> target_nodes;
  for (const auto& t : targets) {
    const auto& impl = Node::impl_of(t);
    if (impl->grad_fn) {
      target_nodes.insert(impl->grad_fn.get());
    } else {
      target_leaves.insert(impl.get());
    }
  }
  std::unordered_set<const Node*> reaches;
  const bool pruned = !targets.empty();
  if (pruned) {
    for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
      const Node* node = it->get();
      bool hit = false;
      for (const auto& in : node->inputs) {
        const auto& impl = Node::impl_of(in);
        if (impl->grad_fn ? (reaches.count(impl->grad_fn.get()) ||
                             target_nodes.count(impl->grad_fn.get()))
                          : target_leaves.count(impl.get()) > 0) {
          hit = true;
          break;
        }
      }
      if (hit) reaches.insert(node);
    }
  }

  result.node_grads[root_impl->grad_fn.get()] = seed;
  GradModeGuard mode(create_graph);

  for (const auto& node : nodes) {
    auto found = result.node_grads.find(node.get());
    if (found == result.node_grads.end()) continue;
    const Tensor grad_out = found->second;
    if (pruned && !target_nodes.count(node.get())) result.node_grads.erase(found);

    std::vector<bool> needed(node->inputs.size(), false);
    bool any = false;
    for (std::size_t i = 0; i < node->inputs.size(); ++i) {
      if (!node->input_requires_grad[i]) continue;
      if (pruned) {
        const auto& impl = Node::impl_of(node->inputs[i]);
        needed[i] = impl->grad_fn ? (reaches.count(impl->grad_fn.get()) ||
                                     target_nodes.count(impl->grad_fn.get()))
                                  : target_leaves.count(impl.get()) > 0;
      } else {
        needed[i] = true;
      }
      any = any || needed[i];
    }
    if (any) {
      if (create_graph && !node->supports_double_backward) {
        throw autograd_error(std::string("double backward is not supported through ") +
                             node->name);
      }
      auto grads = node->backward(grad_out, needed);
      for (std::size_t i = 0; i < node->inputs.size(); ++i) {
        if (!needed[i] || !grads[i].defined()) continue;
        const auto& impl = Node::impl_of(node->inputs[i]);
        if (impl->grad_fn) {
          auto& slot = result.node_grads[impl->grad_fn.get()];
          slot = accumulate(slot, grads[i], create_graph);
        } else {
          auto& slot = result.leaf_grads[impl.get()];
          slot = accumulate(slot, grads[i], create_graph);
        }
      }
    }
    if (!retain_graph && !create_graph) node->release();
  }
  return result;
}

}  // namespace

void Tensor::backward(bool retain_graph) const {
  auto result = run_backward(*this, {}, retain_graph, false);
  for (auto& [impl, g] : result.leaf_grads) {
    auto* target = const_cast<TensorImpl*>(impl);
    if (!target->requires_grad) continue;
    if (target->grad) {
      NoGradGuard guard;
      target->grad = Node::impl_of(add(Tensor(target->grad), g));
    } else {
      target->grad = Node::impl_of(g.detach());
    }
  }
}

std::vector<Tensor> grad(const Tensor& output, std::span<const Tensor> inputs,
                         GradOptions options) {
  for (const auto& in : inputs) {
    if (!in.requires_grad()) {
      throw autograd_error("grad() input of shape " + shape_str(in.shape()) +
                           " does not require grad");
    }
  }
  auto result = run_backward(output, inputs, options.retain_graph, options.create_graph);
  std::vector<Tensor> out;
  out.reserve(inputs.size());
  for (const auto& in : inputs) {
    const auto& impl = Node::impl_of(in);
    Tensor g;
    if (impl->grad_fn) {
      auto it = result.node_grads.find(impl->grad_fn.get());
      if (it != result.node_grads.end()) g = it->second;
    } else {
      auto it = result.leaf_grads.find(impl.get());
      if (it != result.leaf_grads.end()) g = it->second;
    }
    out.push_back(g.defined() ? g : Tensor::zeros(in.shape()));
  }
  return out;
}

Tape Tape::record_from(const Tensor& root) {
  Tape tape;
  if (!root.defined() || !Node::impl_of(root)->grad_fn) return tape;
  for (const auto& node : collect_nodes(root)) {
    tape.op_names.emplace_back(node->name);
    tape.sequence.push_back(node->sequence);
  }
  return tape;
}

}  // namespace advspec

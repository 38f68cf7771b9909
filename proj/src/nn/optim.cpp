#include <cmath>

#include "advspec/nn.hpp"

namespace advspec {

void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state) {
  if (params.size() != grads.size()) {
    throw shape_error("adam_step: " + std::to_string(params.size()) + " parameters but " +
                      std::to_string(grads.size()) + " gradients");
  }
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.numel(), 0.0);
      state.second_moment.emplace_back(p.numel(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw shape_error("adam_step: optimizer state tracks " +
                      std::to_string(state.first_moment.size()) + " parameters, got " +
                      std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.first_moment[i].size() != params[i].numel()) {
      throw shape_error("adam_step: moment size mismatch for parameter " + std::to_string(i) +
                        " of shape " + shape_str(params[i].shape()));
    }
    if (grads[i].defined() && grads[i].shape() != params[i].shape()) {
      throw shape_error("adam_step: gradient " + shape_str(grads[i].shape()) +
                        " does not match parameter " + shape_str(params[i].shape()));
    }
  }

  const auto& o = state.options;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(o.beta1, t);
  const double correction2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].mutable_data();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    const bool has_grad = grads[i].defined();
    auto g = has_grad ? grads[i].data() : std::span<const double>();
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = has_grad ? g[k] : 0.0;
      m[k] = o.beta1 * m[k] + (1.0 - o.beta1) * gk;
      v[k] = o.beta2 * v[k] + (1.0 - o.beta2) * gk * gk;
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      p[k] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
  }
}

Tensor cross_entropy(const Tensor& probabilities, std::span<const int> labels) {
  if (probabilities.dim() != 2) {
    throw shape_error("cross_entropy expects [N, K] probabilities, got " +
                      shape_str(probabilities.shape()));
  }
  const auto classes = static_cast<int>(probabilities.size(1));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes) {
      throw std::out_of_range("label " + std::to_string(labels[i]) + " at row " +
                              std::to_string(i) + " outside [0, " + std::to_string(classes) + ")");
    }
  }
  return neg(mean(log(clamp_min(pick_columns(probabilities, labels), 1e-12))));
}

}  // namespace advspec

#pragma once

// Randomized finite-difference cases, one per differentiable primitive.

#include <functional>
#include <random>
#include <vector>

#include "support/gradcheck.hpp"

namespace advspec::testing {

// Contracts an arbitrary-shaped output to a scalar with fixed random
// weights, so every output entry contributes to the checked gradient.
inline Tensor contract(const Tensor& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sum(mul(y, random_tensor(y.shape(), rng)));
}

struct PrimitiveCase {
  const char* name;
  std::function<std::vector<Tensor>(std::mt19937_64&)> inputs;
  ScalarFn fn;
};

inline std::vector<PrimitiveCase> primitive_cases() {
  auto dim = [](std::mt19937_64& r) { return std::uniform_int_distribution<std::size_t>(1, 4)(r); };
  return {
      {"add", [dim](auto& r) { Shape s{dim(r), dim(r)}; return std::vector{random_tensor(s, r), random_tensor(s, r)}; },
       [](const auto& in) { return contract(in[0] + in[1], 5); }},
      {"sub_broadcast", [dim](auto& r) { return std::vector{random_tensor({dim(r), 3}, r), random_tensor({1}, r)}; },
       [](const auto& in) { return contract(in[0] - in[1], 5); }},
      {"mul", [dim](auto& r) { Shape s{dim(r), dim(r)}; return std::vector{random_tensor(s, r), random_tensor(s, r)}; },
       [](const auto& in) { return contract(in[0] * in[1], 5); }},
      {"mul_scalar_tensor", [dim](auto& r) { return std::vector{random_tensor({dim(r), 2}, r), random_tensor({1}, r)}; },
       [](const auto& in) { return contract(in[0] * in[1], 5); }},
      {"scale_add_scalar", [dim](auto& r) { return std::vector{random_tensor({dim(r), dim(r)}, r)}; },
       [](const auto& in) { return contract(scale(in[0], -1.7) + 0.3, 5); }},
      {"matmul", [dim](auto& r) { auto k = dim(r); return std::vector{random_tensor({dim(r), k}, r), random_tensor({k, dim(r)}, r)}; },
       [](const auto& in) { return contract(matmul(in[0], in[1]), 5); }},
      {"transpose", [dim](auto& r) { return std::vector{random_tensor({dim(r), dim(r)}, r)}; },
       [](const auto& in) { return contract(transpose(in[0]), 5); }},
      {"reshape", [dim](auto& r) { return std::vector{random_tensor({2, 6}, r)}; },
       [](const auto& in) { return contract(reshape(in[0], {3, 4}), 5); }},
      {"relu", [dim](auto& r) { return std::vector{random_tensor_away_from_zero({dim(r), dim(r)}, r)}; },
       [](const auto& in) { return contract(relu(in[0]), 5); }},
      {"leaky_relu", [dim](auto& r) { return std::vector{random_tensor_away_from_zero({dim(r), dim(r)}, r)}; },
       [](const auto& in) { return contract(leaky_relu(in[0], 0.2), 5); }},
      {"clamp_min", [dim](auto& r) { return std::vector{random_tensor_away_from_zero({dim(r), dim(r)}, r)}; },
       [](const auto& in) { return contract(clamp_min(in[0], 0.0), 5); }},
      {"tanh", [dim](auto& r) { return std::vector{random_tensor({dim(r), dim(r)}, r, -2, 2)}; },
       [](const auto& in) { return contract(tanh(in[0]), 5); }},
      {"sigmoid", [dim](auto& r) { return std::vector{random_tensor({dim(r), dim(r)}, r, -4, 4)}; },
       [](const auto& in) { return contract(sigmoid(in[0]), 5); }},
      {"exp", [dim](auto& r) { return std::vector{random_tensor({dim(r), dim(r)}, r)}; },
       [](const auto& in) { return contract(exp(in[0]), 5); }},
      {"log", [dim](auto& r) { return std::vector{random_tensor({dim(r), dim(r)}, r, 0.2, 2.0)}; },
       [](const auto& in) { return contract(log(in[0]), 5); }},
      {"sqrt", [dim](auto& r) { return std::vector{random_tensor({dim(r), dim(r)}, r, 0.2, 2.0)}; },
       [](const auto& in) { return contract(sqrt(in[0]), 5); }},
      {"sum_mean", [dim](auto& r) { return std::vector{random_tensor({dim(r), dim(r)}, r)}; },
       [](const auto& in) { return sum(in[0] * in[0]) * mean(in[0]); }},
      {"sum_except", [dim](auto& r) { return std::vector{random_tensor({dim(r), dim(r), dim(r)}, r)}; },
       [](const auto& in) { return contract(sum_except(in[0], 1), 5); }},
      {"broadcast_along", [dim](auto& r) { return std::vector{random_tensor({3}, r)}; },
       [](const auto& in) { return contract(broadcast_along(in[0], 1, {2, 3, 2}), 5); }},
      {"add_bias", [dim](auto& r) { return std::vector{random_tensor({2, 3, 4}, r), random_tensor({3}, r)}; },
       [](const auto& in) { return contract(add_bias(in[0], in[1], 1), 5); }},
      {"softmax_rows", [dim](auto& r) { return std::vector{random_tensor({dim(r), dim(r) + 1}, r, -2, 2)}; },
       [](const auto& in) { return contract(softmax_rows(in[0]), 5); }},
      {"max_pool1d", [dim](auto& r) { return std::vector{random_tensor({2, dim(r), 6}, r)}; },
       [](const auto& in) { return contract(max_pool1d(in[0], 3), 5); }},
      {"pick_columns", [dim](auto& r) { return std::vector{random_tensor({3, 4}, r)}; },
       [](const auto& in) { std::vector<int> c{0, 3, 1}; return contract(pick_columns(in[0], c), 5); }},
      {"conv1d", [dim](auto& r) { auto c = dim(r); return std::vector{random_tensor({2, c, 9}, r), random_tensor({dim(r), c, 3}, r)}; },
       [](const auto& in) { return contract(conv1d(in[0], in[1], 2, 1), 5); }},
      {"conv1d_transpose", [dim](auto& r) { auto c = dim(r); return std::vector{random_tensor({2, c, 5}, r), random_tensor({c, dim(r), 3}, r)}; },
       [](const auto& in) { return contract(conv1d_transpose(in[0], in[1], 2, 1, 1), 5); }},
      {"conv1d_kernel_grad", [dim](auto& r) { return std::vector{random_tensor({2, 2, 8}, r), random_tensor({2, 3, 4}, r)}; },
       [](const auto& in) { return contract(conv1d_kernel_grad(in[0], in[1], 3, 2, 1), 5); }},
  };
}

}  // namespace advspec::testing

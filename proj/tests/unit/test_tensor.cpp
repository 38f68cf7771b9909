#include <cmath>
#include <random>

#include "advspec/tensor.hpp"
#include "doctest.h"
#include "support/gradcheck.hpp"
#include "support/primitive_cases.hpp"

using namespace advspec;
using advspec::testing::contract;
using advspec::testing::max_gradient_error;
using advspec::testing::random_tensor;
using advspec::testing::random_tensor_away_from_zero;

namespace {

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

double inner(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += a.at(i) * b.at(i);
  return s;
}

}  // namespace

TEST_CASE("elementwise arithmetic") {
  auto a = Tensor::from({2}, {1, 2});
  auto b = Tensor::from({2}, {3, 4});
  CHECK(values(a + b) == std::vector<double>{4, 6});
  CHECK(values(a * Tensor::scalar(1.0)) == values(a));
  CHECK(values(a - b) == std::vector<double>{-2, -2});
  CHECK(values(scale(a, 3)) == std::vector<double>{3, 6});
}

TEST_CASE("product rule") {
  auto x = Tensor::from({1}, {2}, true);
  auto y = Tensor::from({1}, {3}, true);
  (x * y).backward();
  CHECK(x.grad().item() == 3.0);
  CHECK(y.grad().item() == 2.0);
}

TEST_CASE("shape mismatch names both shapes") {
  auto a = Tensor::zeros({2, 3});
  auto b = Tensor::zeros({3, 2});
  try {
    (void)add(a, b);
    FAIL("expected shape_error");
  } catch (const shape_error& e) {
    std::string msg = e.what();
    CHECK(msg.find("[2,3]") != std::string::npos);
    CHECK(msg.find("[3,2]") != std::string::npos);
  }
}

TEST_CASE("matmul") {
  auto eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  auto m = Tensor::from({2, 2}, {5, -1, 2, 7});
  CHECK(values(matmul(eye, m)) == values(m));
  CHECK(matmul(Tensor::from({1, 2}, {1, 2}), Tensor::from({2, 1}, {3, 4})).item() == 11.0);
  CHECK_THROWS_AS((void)matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), shape_error);

  std::mt19937_64 rng(7);
  auto a = random_tensor({3, 4}, rng);
  auto b = random_tensor({4, 2}, rng);
  double err = max_gradient_error(
      [](const std::vector<Tensor>& in) { return contract(matmul(in[0], in[1]), 1); }, {a, b});
  CHECK(err < 1e-6);
}

TEST_CASE("conv1d examples") {
  SUBCASE("identity kernel") {
    auto x = Tensor::from({1, 3}, {1, 2, 3});
    auto k = Tensor::from({1, 1, 1}, {1});
    CHECK(values(conv1d(x, k, 1, 0)) == std::vector<double>{1, 2, 3});
  }
  SUBCASE("two-tap sum") {
    auto x = Tensor::from({1, 3}, {1, 2, 3});
    auto k = Tensor::from({1, 1, 2}, {1, 1});
    auto y = conv1d(x, k, 1, 0);
    CHECK(y.shape() == Shape{1, 2});
    CHECK(values(y) == std::vector<double>{3, 5});
  }
  SUBCASE("critic first layer halves 48 bands") {
    auto y = conv1d(Tensor::zeros({1, 48}), Tensor::zeros({16, 1, 5}), 2, 2);
    CHECK(y.shape() == Shape{16, 24});
  }
  SUBCASE("kernel larger than padded input") {
    CHECK_THROWS_AS((void)conv1d(Tensor::zeros({1, 3}), Tensor::zeros({1, 1, 6}), 1, 1),
                    shape_error);
  }
  SUBCASE("batched and unbatched agree") {
    std::mt19937_64 rng(3);
    auto x = random_tensor({2, 3, 10}, rng);
    auto k = random_tensor({4, 3, 3}, rng);
    auto y = conv1d(x, k, 2, 1);
    auto x1 = reshape(x, {2, 30});
    (void)x1;
    auto first = Tensor::from({3, 10}, std::vector<double>(x.data().begin(), x.data().begin() + 30));
    auto y1 = conv1d(first, k, 2, 1);
    for (std::size_t i = 0; i < y1.numel(); ++i) CHECK(y1.at(i) == y.at(i));
  }
}

TEST_CASE("conv1d_transpose doubles length") {
  auto y = conv1d_transpose(Tensor::zeros({64, 6}), Tensor::zeros({64, 32, 3}), 2, 1, 1);
  CHECK(y.shape() == Shape{32, 12});
  auto z = conv1d_transpose(Tensor::zeros({16, 24}), Tensor::zeros({16, 1, 5}), 2, 2, 1);
  CHECK(z.shape() == Shape{1, 48});
  CHECK_THROWS_AS((void)conv1d_transpose(Tensor::zeros({1, 1}), Tensor::zeros({1, 1, 1}), 1, 2, 0),
                  shape_error);
}

TEST_CASE("conv1d and conv1d_transpose are adjoint") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> small(1, 4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t cin = small(rng), cout = small(rng), kernel = small(rng) + 1;
    const std::size_t stride = small(rng) % 3 + 1, pad = small(rng) % 3;
    const std::size_t len = kernel + small(rng) * 3;
    auto x = random_tensor({2, cin, len}, rng);
    auto k = random_tensor({cout, cin, kernel}, rng);
    auto y_shape_probe = conv1d(x, k, stride, pad);
    auto y = random_tensor(y_shape_probe.shape(), rng);
    // Pick out_pad so the transpose reproduces the input length.
    const long long base = (static_cast<long long>(y.size(2)) - 1) * stride - 2 * pad + kernel;
    const long long out_pad = static_cast<long long>(len) - base;
    if (out_pad < 0 || (out_pad >= static_cast<long long>(stride) && out_pad > 0)) continue;
    auto xt = conv1d_transpose(y, k, stride, pad, static_cast<std::size_t>(out_pad));
    REQUIRE(xt.shape() == x.shape());
    const double lhs = inner(y_shape_probe, y);
    const double rhs = inner(x, xt);
    CHECK(std::abs(lhs - rhs) < 1e-10 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_CASE("activations and reductions") {
  auto x = Tensor::from({2}, {-1, 2});
  CHECK(values(relu(x)) == std::vector<double>{0, 2});
  CHECK(values(leaky_relu(x, 0.2)) == std::vector<double>{-0.2, 2});
  CHECK(mean(Tensor::from({3}, {1, 2, 3})).item() == 2.0);
  CHECK_THROWS_AS((void)log(Tensor::from({2}, {1.0, 0.0})), std::domain_error);
  CHECK_THROWS_AS((void)log(Tensor::from({1}, {-2.0})), std::domain_error);

  auto probs = softmax_rows(Tensor::from({2, 3}, {1, 2, 3, -5, 0, 5}));
  for (std::size_t r = 0; r < 2; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < 3; ++c) total += probs.at(r * 3 + c);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("backward basics") {
  auto x = Tensor::from({3}, {1, 2, 3}, true);
  sum(x).backward();
  CHECK(values(x.grad()) == std::vector<double>{1, 1, 1});

  auto y = Tensor::from({2}, {1, 2}, true);
  sum(y * y).backward();
  CHECK(values(y.grad()) == std::vector<double>{2, 4});

  auto z = Tensor::from({2}, {1, 2}, true);
  CHECK_THROWS_AS((z * z).backward(), shape_error);
}

TEST_CASE("second backward on a freed graph is an error") {
  auto x = Tensor::from({2}, {1, 2}, true);
  auto loss = sum(x * x);
  loss.backward();
  CHECK_THROWS_AS(loss.backward(), autograd_error);

  auto x2 = Tensor::from({2}, {1, 2}, true);
  auto kept = sum(x2 * x2);
  kept.backward(true);
  kept.backward();
  CHECK(values(x2.grad()) == std::vector<double>{4, 8});
  x2.zero_grad();
  CHECK_FALSE(x2.grad().defined());
}

TEST_CASE("shared subexpressions accumulate") {
  auto x = Tensor::from({3}, {-1, 0.5, 2}, true);
  auto shared = x * x;
  auto loss = sum(shared + shared * x + x);
  loss.backward();
  for (std::size_t i = 0; i < 3; ++i) {
    const double v = x.data()[i];
    CHECK(x.grad().at(i) == doctest::Approx(2 * v + 3 * v * v + 1).epsilon(1e-14));
  }
}

TEST_CASE("tape replays in reverse topological order") {
  auto x = Tensor::from({2}, {1, 2}, true);
  auto w = Tensor::from({2}, {3, 4}, true);
  auto loss = mean(relu(x * w) + x);
  auto tape = Tape::record_from(loss);
  REQUIRE(tape.sequence.size() == 5);
  for (std::size_t i = 1; i < tape.sequence.size(); ++i) {
    CHECK(tape.sequence[i - 1] > tape.sequence[i]);
  }
  CHECK(tape.op_names.front() == "scale");
  CHECK(tape.op_names.back() == "mul");
}

TEST_CASE("every primitive matches central finite differences") {
  std::mt19937_64 rng(2024);
  for (const auto& c : advspec::testing::primitive_cases()) {
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      worst = std::max(worst, max_gradient_error(c.fn, c.inputs(rng)));
    }
    INFO(c.name);
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("input gradient norms") {
  SUBCASE("linear map has constant gradient norm") {
    auto a = Tensor::from({3, 1}, {1, -2, 2});
    std::mt19937_64 rng(1);
    auto x = random_tensor({5, 3}, rng).set_requires_grad(true);
    auto norms = input_gradient_norms(x, matmul(x, a), false);
    for (std::size_t i = 0; i < 5; ++i) CHECK(norms.at(i) == doctest::Approx(3.0).epsilon(1e-14));
  }
  SUBCASE("half squared norm") {
    auto x = Tensor::from({2, 2}, {3, 4, 1, 0}, true);
    auto f = scale(sum_except(x * x, 0), 0.5);
    auto norms = input_gradient_norms(x, f, false);
    CHECK(norms.at(0) == doctest::Approx(5.0));
    CHECK(norms.at(1) == doctest::Approx(1.0));
  }
}

TEST_CASE("double backward through a conv critic matches finite differences") {
  // h(k1, w) = sum_n ||d/dx f(x_n)||^2 where f = dense(leaky(conv(x)))
  std::mt19937_64 rng(99);
  auto x_values = random_tensor({3, 1, 8}, rng);
  auto penalty = [x_values](const std::vector<Tensor>& params) {
    auto x = x_values.detach().set_requires_grad(true);
    auto h = leaky_relu(conv1d(x, params[0], 2, 1), 0.2);
    auto out = matmul(reshape(h, {3, 8}), params[1]);
    auto grads = grad(sum(out), std::span<const Tensor>(&x, 1),
                      GradOptions{.retain_graph = true, .create_graph = true});
    return sum(grads[0] * grads[0]);
  };
  for (int trial = 0; trial < 20; ++trial) {
    auto k = random_tensor({2, 1, 3}, rng);
    auto w = random_tensor({8, 1}, rng);
    CHECK(max_gradient_error(penalty, {k, w}) < 1e-5);
  }
}

TEST_CASE("double backward through a smooth op is rejected") {
  auto x = Tensor::from({2}, {0.1, 0.2}, true);
  auto y = sum(tanh(x));
  CHECK_THROWS_AS((void)grad(y, std::span<const Tensor>(&x, 1), GradOptions{.create_graph = true}),
                  autograd_error);
}

TEST_CASE("identical inputs give bit-identical outputs") {
  std::mt19937_64 r1(5), r2(5);
  auto a = random_tensor({4, 3, 12}, r1);
  auto b = random_tensor({4, 3, 12}, r2);
  std::mt19937_64 rk(6);
  auto k = random_tensor({5, 3, 3}, rk);
  auto ya = conv1d(a, k, 2, 1);
  auto yb = conv1d(b, k, 2, 1);
  CHECK(values(ya) == values(yb));
}

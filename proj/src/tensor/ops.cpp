#include <cmath>
#include <limits>

#include "advspec/tensor.hpp"
#include "graph.hpp"

namespace advspec {

namespace {

Tensor make(Shape shape, std::vector<double> values) {
  return TensorAccess::make(std::move(shape), std::move(values));
}

// Result shape for same-shape or single-element broadcasting.
Shape broadcast_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return a.shape();
  if (b.numel() == 1) return a.shape();
  if (a.numel() == 1) return b.shape();
  throw shape_error(std::string("shape mismatch in ") + op + ": " + shape_str(a.shape()) +
                    " vs " + shape_str(b.shape()));
}

Tensor reduce_to(const Tensor& g, const Shape& shape) {
  if (g.shape() == shape) return g;
  if (shape_numel(shape) == 1) return reshape(sum(g), shape);
  throw shape_error("cannot reduce gradient " + shape_str(g.shape()) + " to " + shape_str(shape));
}

template <class F>
Tensor binary(const Tensor& a, const Tensor& b, const char* op, F f) {
  Shape shape = broadcast_shape(a, b, op);
  const auto n = shape_numel(shape);
  auto av = a.data();
  auto bv = b.data();
  const bool a_scalar = av.size() == 1 && n != 1;
  const bool b_scalar = bv.size() == 1 && n != 1;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = f(av[a_scalar ? 0 : i], bv[b_scalar ? 0 : i]);
  }
  return make(std::move(shape), std::move(out));
}

template <class F>
std::vector<double> map_values(const Tensor& x, F f) {
  auto xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return out;
}

void require_rank(const Tensor& x, std::size_t rank, const char* op) {
  if (x.dim() != rank) {
    throw shape_error(std::string(op) + " expects a rank-" + std::to_string(rank) +
                      " tensor, got " + shape_str(x.shape()));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  Tensor out = binary(a, b, "add", [](double x, double y) { return x + y; });
  return record("add", std::move(out), {a, b},
                [sa = a.shape(), sb = b.shape()](const Tensor& g, const std::vector<bool>& need) {
                  return std::vector<Tensor>{need[0] ? reduce_to(g, sa) : Tensor(),
                                             need[1] ? reduce_to(g, sb) : Tensor()};
                });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  Tensor out = binary(a, b, "sub", [](double x, double y) { return x - y; });
  return record("sub", std::move(out), {a, b},
                [sa = a.shape(), sb = b.shape()](const Tensor& g, const std::vector<bool>& need) {
                  return std::vector<Tensor>{need[0] ? reduce_to(g, sa) : Tensor(),
                                             need[1] ? reduce_to(neg(g), sb) : Tensor()};
                });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  Tensor out = binary(a, b, "mul", [](double x, double y) { return x * y; });
  return record("mul", std::move(out), {a, b},
                [a, b](const Tensor& g, const std::vector<bool>& need) {
                  return std::vector<Tensor>{need[0] ? reduce_to(mul(g, b), a.shape()) : Tensor(),
                                             need[1] ? reduce_to(mul(g, a), b.shape()) : Tensor()};
                });
}

Tensor scale(const Tensor& x, double factor) {
  Tensor out = make(x.shape(), map_values(x, [factor](double v) { return v * factor; }));
  return record("scale", std::move(out), {x},
                [factor](const Tensor& g, const std::vector<bool>&) {
                  return std::vector<Tensor>{scale(g, factor)};
                });
}

Tensor add_scalar(const Tensor& x, double value) {
  Tensor out = make(x.shape(), map_values(x, [value](double v) { return v + value; }));
  return record("add_scalar", std::move(out), {x},
                [](const Tensor& g, const std::vector<bool>&) { return std::vector<Tensor>{g}; });
}

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const auto m = a.size(0), k = a.size(1), n = b.size(1);
  if (b.size(0) != k) {
    throw shape_error("matmul inner dimensions disagree: " + shape_str(a.shape()) + " x " +
                      shape_str(b.shape()));
  }
  auto av = a.data();
  auto bv = b.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = av[i * k + p];
      if (s == 0.0) continue;
      const double* brow = bv.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += s * brow[j];
    }
  }
  return record("matmul", make({m, n}, std::move(out)), {a, b},
                [a, b](const Tensor& g, const std::vector<bool>& need) {
                  return std::vector<Tensor>{need[0] ? matmul(g, transpose(b)) : Tensor(),
                                             need[1] ? matmul(transpose(a), g) : Tensor()};
                });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const auto r = a.size(0), c = a.size(1);
  auto av = a.data();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  }
  return record("transpose", make({c, r}, std::move(out)), {a},
                [](const Tensor& g, const std::vector<bool>&) {
                  return std::vector<Tensor>{transpose(g)};
                });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw shape_error("cannot reshape " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  for (auto d : shape) {
    if (d == 0) throw shape_error("reshape target has a zero dimension: " + shape_str(shape));
  }
  auto values = values_of(x);
  return record("reshape", make(std::move(shape), std::move(values)), {x},
                [from = x.shape()](const Tensor& g, const std::vector<bool>&) {
                  return std::vector<Tensor>{reshape(g, from)};
                });
}

namespace {

// Piecewise-linear activation: out = x * slope(x), gradient g * slope(x)
// with the slope mask treated as constant.
Tensor piecewise_linear(const Tensor& x, const char* name, double below, double above,
                        double threshold) {
  auto xv = x.data();
  std::vector<double> out(xv.size());
  std::vector<double> mask(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    mask[i] = xv[i] > threshold ? above : below;
    out[i] = xv[i] > threshold ? xv[i] * above : xv[i] * below;
  }
  Tensor m = make(x.shape(), std::move(mask));
  return record(name, make(x.shape(), std::move(out)), {x},
                [m](const Tensor& g, const std::vector<bool>&) {
                  return std::vector<Tensor>{mul(g, m)};
                });
}

}  // namespace

Tensor relu(const Tensor& x) { return piecewise_linear(x, "relu", 0.0, 1.0, 0.0); }

Tensor leaky_relu(const Tensor& x, double slope) {
  return piecewise_linear(x, "leaky_relu", slope, 1.0, 0.0);
}

Tensor clamp_min(const Tensor& x, double floor) {
  auto xv = x.data();
  std::vector<double> out(xv.size());
  std::vector<double> mask(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const bool pass = xv[i] > floor;
    out[i] = pass ? xv[i] : floor;
    mask[i] = pass ? 1.0 : 0.0;
  }
  Tensor m = make(x.shape(), std::move(mask));
  return record("clamp_min", make(x.shape(), std::move(out)), {x},
                [m](const Tensor& g, const std::vector<bool>&) {
                  return std::vector<Tensor>{mul(g, m)};
                });
}

namespace {

// Elementwise op with first-order backward: grad_in = g * coeff where coeff
// is computed from input and output values.
template <class Fwd, class Coeff>
Tensor smooth_unary(const Tensor& x, const char* name, Fwd fwd, Coeff coeff) {
  auto xv = x.data();
  std::vector<double> out(xv.size());
  std::vector<double> c(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    out[i] = fwd(xv[i]);
    c[i] = coeff(xv[i], out[i]);
  }
  Tensor ct = make(x.shape(), std::move(c));
  return record(
      name, make(x.shape(), std::move(out)), {x},
      [ct](const Tensor& g, const std::vector<bool>&) { return std::vector<Tensor>{mul(g, ct)}; },
      false);
}

}  // namespace

Tensor tanh(const Tensor& x) {
  return smooth_unary(
      x, "tanh", [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return smooth_unary(
      x, "sigmoid",
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& x) {
  return smooth_unary(
      x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  for (double v : x.data()) {
    if (!(v > 0.0)) {
      throw std::domain_error("log of non-positive entry " + std::to_string(v));
    }
  }
  return smooth_unary(
      x, "log", [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor sqrt(const Tensor& x) {
  for (double v : x.data()) {
    if (v < 0.0) throw std::domain_error("sqrt of negative entry " + std::to_string(v));
  }
  // The derivative at 0 is taken as 0 so that zero-gradient inputs do not
  // poison the reverse pass with inf * 0.
  return smooth_unary(
      x, "sqrt", [](double v) { return std::sqrt(v); },
      [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

namespace {

Tensor expand_scalar(const Tensor& g, const Shape& shape);

}  // namespace

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return record("sum", make({1}, {total}), {x},
                [shape = x.shape()](const Tensor& g, const std::vector<bool>&) {
                  return std::vector<Tensor>{expand_scalar(g, shape)};
                });
}

namespace {

Tensor expand_scalar(const Tensor& g, const Shape& shape) {
  Tensor out = make(shape, std::vector<double>(shape_numel(shape), g.data()[0]));
  return record("expand", std::move(out), {g},
                [s = g.shape()](const Tensor& gg, const std::vector<bool>&) {
                  return std::vector<Tensor>{reshape(sum(gg), s)};
                });
}

// Splits a shape around `axis` into (outer, extent, inner) strides.
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw shape_error("axis " + std::to_string(axis) + " out of range for " + shape_str(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor sum_except(const Tensor& x, std::size_t axis) {
  const auto s = split_axis(x.shape(), axis);
  auto xv = x.data();
  std::vector<double> out(s.extent, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t e = 0; e < s.extent; ++e) {
      const double* p = xv.data() + (o * s.extent + e) * s.inner;
      double acc = 0.0;
      for (std::size_t i = 0; i < s.inner; ++i) acc += p[i];
      out[e] += acc;
    }
  }
  return record("sum_except", make({s.extent}, std::move(out)), {x},
                [axis, shape = x.shape()](const Tensor& g, const std::vector<bool>&) {
                  return std::vector<Tensor>{broadcast_along(g, axis, shape)};
                });
}

Tensor broadcast_along(const Tensor& v, std::size_t axis, const Shape& shape) {
  const auto s = split_axis(shape, axis);
  if (v.numel() != s.extent) {
    throw shape_error("broadcast_along: vector " + shape_str(v.shape()) + " does not match axis " +
                      std::to_string(axis) + " of " + shape_str(shape));
  }
  auto vv = v.data();
  std::vector<double> out(shape_numel(shape));
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t e = 0; e < s.extent; ++e) {
      double* p = out.data() + (o * s.extent + e) * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) p[i] = vv[e];
    }
  }
  return record("broadcast_along", make(shape, std::move(out)), {v},
                [axis, vshape = v.shape()](const Tensor& g, const std::vector<bool>&) {
                  return std::vector<Tensor>{reshape(sum_except(g, axis), vshape)};
                });
}

Tensor add_bias(const Tensor& x, const Tensor& bias, std::size_t axis) {
  const auto s = split_axis(x.shape(), axis);
  if (bias.numel() != s.extent) {
    throw shape_error("add_bias: bias " + shape_str(bias.shape()) + " does not match axis " +
                      std::to_string(axis) + " of " + shape_str(x.shape()));
  }
  auto xv = x.data();
  auto bv = bias.data();
  std::vector<double> out(xv.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t e = 0; e < s.extent; ++e) {
      const std::size_t base = (o * s.extent + e) * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) out[base + i] = xv[base + i] + bv[e];
    }
  }
  return record("add_bias", make(x.shape(), std::move(out)), {x, bias},
                [axis, bshape = bias.shape()](const Tensor& g, const std::vector<bool>& need) {
                  return std::vector<Tensor>{
                      need[0] ? g : Tensor(),
                      need[1] ? reshape(sum_except(g, axis), bshape) : Tensor()};
                });
}

Tensor softmax_rows(const Tensor& x) {
  require_rank(x, 2, "softmax_rows");
  const auto rows = x.size(0), cols = x.size(1);
  auto xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * cols;
    double* o = out.data() + r * cols;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c) mx = std::max(mx, in[c]);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      o[c] = std::exp(in[c] - mx);
      total += o[c];
    }
    for (std::size_t c = 0; c < cols; ++c) o[c] /= total;
  }
  Tensor y = make(x.shape(), out);
  return record(
      "softmax_rows", std::move(y), {x},
      [probs = std::move(out), rows, cols, shape = x.shape()](const Tensor& g,
                                                             const std::vector<bool>&) {
        auto gv = g.data();
        std::vector<double> gin(gv.size());
        for (std::size_t r = 0; r < rows; ++r) {
          const double* p = probs.data() + r * cols;
          const double* gr = gv.data() + r * cols;
          double dot = 0.0;
          for (std::size_t c = 0; c < cols; ++c) dot += gr[c] * p[c];
          for (std::size_t c = 0; c < cols; ++c) gin[r * cols + c] = p[c] * (gr[c] - dot);
        }
        return std::vector<Tensor>{make(shape, std::move(gin))};
      },
      false);
}

Tensor max_pool1d(const Tensor& x, std::size_t window) {
  require_rank(x, 3, "max_pool1d");
  if (window == 0) throw shape_error("max_pool1d window must be positive");
  const auto n = x.size(0), c = x.size(1), len = x.size(2);
  const auto out_len = len / window;
  if (out_len == 0) {
    throw shape_error("max_pool1d window " + std::to_string(window) + " exceeds length " +
                      std::to_string(len));
  }
  auto xv = x.data();
  std::vector<double> out(n * c * out_len);
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t row = 0; row < n * c; ++row) {
    for (std::size_t t = 0; t < out_len; ++t) {
      std::size_t best = row * len + t * window;
      for (std::size_t k = 1; k < window; ++k) {
        const std::size_t idx = row * len + t * window + k;
        if (xv[idx] > xv[best]) best = idx;
      }
      out[row * out_len + t] = xv[best];
      argmax[row * out_len + t] = best;
    }
  }
  return record(
      "max_pool1d", make({n, c, out_len}, std::move(out)), {x},
      [argmax = std::move(argmax), shape = x.shape()](const Tensor& g, const std::vector<bool>&) {
        auto gv = g.data();
        std::vector<double> gin(shape_numel(shape), 0.0);
        for (std::size_t i = 0; i < argmax.size(); ++i) gin[argmax[i]] += gv[i];
        return std::vector<Tensor>{make(shape, std::move(gin))};
      },
      false);
}

Tensor pick_columns(const Tensor& x, std::span<const int> columns) {
  require_rank(x, 2, "pick_columns");
  const auto rows = x.size(0), cols = x.size(1);
  if (columns.size() != rows) {
    throw shape_error("pick_columns: " + std::to_string(columns.size()) + " indices for " +
                      std::to_string(rows) + " rows");
  }
  std::vector<int> idx(columns.begin(), columns.end());
  auto xv = x.data();
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    if (idx[r] < 0 || static_cast<std::size_t>(idx[r]) >= cols) {
      throw std::out_of_range("column index " + std::to_string(idx[r]) + " out of range [0," +
                              std::to_string(cols) + ") at row " + std::to_string(r));
    }
    out[r] = xv[r * cols + static_cast<std::size_t>(idx[r])];
  }
  return record(
      "pick_columns", make({rows}, std::move(out)), {x},
      [idx = std::move(idx), shape = x.shape()](const Tensor& g, const std::vector<bool>&) {
        auto gv = g.data();
        std::vector<double> gin(shape_numel(shape), 0.0);
        const auto cols = shape[1];
        for (std::size_t r = 0; r < idx.size(); ++r) {
          gin[r * cols + static_cast<std::size_t>(idx[r])] = gv[r];
        }
        return std::vector<Tensor>{make(shape, std::move(gin))};
      },
      false);
}

Tensor input_gradient_norms(const Tensor& x, const Tensor& per_sample_output,
                            bool create_graph) {
  const auto n = x.size(0);
  if (per_sample_output.numel() != n) {
    throw shape_error("expected one scalar output per sample: input " + shape_str(x.shape()) +
                      ", output " + shape_str(per_sample_output.shape()));
  }
  // Samples do not interact, so the gradient of the summed output holds
  // every per-sample gradient at once.
  auto grads = grad(sum(per_sample_output), std::span<const Tensor>(&x, 1),
                    GradOptions{.retain_graph = true, .create_graph = create_graph});
  const Tensor& g = grads[0];
  return sqrt(sum_except(mul(g, g), 0));
}

}  // namespace advspec

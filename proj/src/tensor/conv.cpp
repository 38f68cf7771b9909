#include <algorithm>
#include <span>

#include "advspec/tensor.hpp"
#include "graph.hpp"

namespace advspec {

namespace {

// Geometry shared by conv1d, its transpose and its kernel gradient: output
// position t reads input position t * stride - pad + j for tap j.
struct ConvGeometry {
  std::size_t batch, in_channels, out_channels, in_length, out_length, kernel, stride, pad;

  // Range [begin, end) of output positions whose tap j lands inside the
  // input.
  std::pair<std::size_t, std::size_t> valid_range(std::size_t j) const {
    const long long s = static_cast<long long>(stride);
    const long long offset = static_cast<long long>(j) - static_cast<long long>(pad);
    long long lo = offset >= 0 ? 0 : (-offset + s - 1) / s;
    long long hi = (static_cast<long long>(in_length) - 1 - offset);
    hi = hi < 0 ? -1 : hi / s;
    hi = std::min(hi, static_cast<long long>(out_length) - 1);
    if (hi < lo) return {0, 0};
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi) + 1};
  }
};

Tensor make(Shape shape, std::vector<double> values) {
  return TensorAccess::make(std::move(shape), std::move(values));
}

Tensor conv_forward(const Tensor& x, const Tensor& k, const ConvGeometry& geo);
Tensor conv_adjoint(const Tensor& y, const Tensor& k, const ConvGeometry& geo);
Tensor conv_kernel(const Tensor& x, const Tensor& gy, const ConvGeometry& geo);

// Patch matrix cols[(c, j), (n, t)] = x[n, c, t s - p + j], zero outside.
std::vector<double> im2col(std::span<const double> xv, const ConvGeometry& geo) {
  const std::size_t width = geo.batch * geo.out_length;
  std::vector<double> cols(geo.in_channels * geo.kernel * width, 0.0);
  for (std::size_t c = 0; c < geo.in_channels; ++c) {
    for (std::size_t j = 0; j < geo.kernel; ++j) {
      double* row = cols.data() + (c * geo.kernel + j) * width;
      auto [lo, hi] = geo.valid_range(j);
      for (std::size_t n = 0; n < geo.batch; ++n) {
        const double* xrow = xv.data() + (n * geo.in_channels + c) * geo.in_length;
        double* dst = row + n * geo.out_length;
        for (std::size_t t = lo; t < hi; ++t) dst[t] = xrow[t * geo.stride + j - geo.pad];
      }
    }
  }
  return cols;
}

// Scatter-adds a patch matrix back onto [N, C_in, L_in].
std::vector<double> col2im(const std::vector<double>& cols, const ConvGeometry& geo) {
  const std::size_t width = geo.batch * geo.out_length;
  std::vector<double> x(geo.batch * geo.in_channels * geo.in_length, 0.0);
  for (std::size_t c = 0; c < geo.in_channels; ++c) {
    for (std::size_t j = 0; j < geo.kernel; ++j) {
      const double* row = cols.data() + (c * geo.kernel + j) * width;
      auto [lo, hi] = geo.valid_range(j);
      for (std::size_t n = 0; n < geo.batch; ++n) {
        double* xrow = x.data() + (n * geo.in_channels + c) * geo.in_length;
        const double* src = row + n * geo.out_length;
        for (std::size_t t = lo; t < hi; ++t) xrow[t * geo.stride + j - geo.pad] += src[t];
      }
    }
  }
  return x;
}

// [N, C_out, L_out] <-> [C_out, N * L_out]
std::vector<double> to_channel_major(std::span<const double> y, const ConvGeometry& geo) {
  const std::size_t width = geo.batch * geo.out_length;
  std::vector<double> out(geo.out_channels * width);
  for (std::size_t n = 0; n < geo.batch; ++n) {
    for (std::size_t o = 0; o < geo.out_channels; ++o) {
      const double* src = y.data() + (n * geo.out_channels + o) * geo.out_length;
      std::copy(src, src + geo.out_length, out.data() + o * width + n * geo.out_length);
    }
  }
  return out;
}

std::vector<double> from_channel_major(const std::vector<double>& m, const ConvGeometry& geo) {
  const std::size_t width = geo.batch * geo.out_length;
  std::vector<double> out(geo.batch * geo.out_channels * geo.out_length);
  for (std::size_t n = 0; n < geo.batch; ++n) {
    for (std::size_t o = 0; o < geo.out_channels; ++o) {
      const double* src = m.data() + o * width + n * geo.out_length;
      std::copy(src, src + geo.out_length,
                out.data() + (n * geo.out_channels + o) * geo.out_length);
    }
  }
  return out;
}

// y[n, o, t] = sum_{c, j} k[o, c, j] x[n, c, t s - p + j]
Tensor conv_forward(const Tensor& x, const Tensor& k, const ConvGeometry& geo) {
  const auto cols = im2col(x.data(), geo);
  auto kv = k.data();
  const std::size_t width = geo.batch * geo.out_length;
  const std::size_t depth = geo.in_channels * geo.kernel;
  std::vector<double> ym(geo.out_channels * width, 0.0);
  for (std::size_t o = 0; o < geo.out_channels; ++o) {
    double* dst = ym.data() + o * width;
    for (std::size_t q = 0; q < depth; ++q) {
      const double w = kv[o * depth + q];
      const double* src = cols.data() + q * width;
      for (std::size_t i = 0; i < width; ++i) dst[i] += w * src[i];
    }
  }
  Tensor y = make({geo.batch, geo.out_channels, geo.out_length}, from_channel_major(ym, geo));
  return record("conv1d", std::move(y), {x, k},
                [x, k, geo](const Tensor& g, const std::vector<bool>& need) {
                  return std::vector<Tensor>{need[0] ? conv_adjoint(g, k, geo) : Tensor(),
                                             need[1] ? conv_kernel(x, g, geo) : Tensor()};
                });
}

// x[n, c, t s - p + j] += k[o, c, j] y[n, o, t]
Tensor conv_adjoint(const Tensor& y, const Tensor& k, const ConvGeometry& geo) {
  const auto ym = to_channel_major(y.data(), geo);
  auto kv = k.data();
  const std::size_t width = geo.batch * geo.out_length;
  const std::size_t depth = geo.in_channels * geo.kernel;
  std::vector<double> cols(depth * width, 0.0);
  for (std::size_t o = 0; o < geo.out_channels; ++o) {
    const double* src = ym.data() + o * width;
    for (std::size_t q = 0; q < depth; ++q) {
      const double w = kv[o * depth + q];
      double* dst = cols.data() + q * width;
      for (std::size_t i = 0; i < width; ++i) dst[i] += w * src[i];
    }
  }
  Tensor x = make({geo.batch, geo.in_channels, geo.in_length}, col2im(cols, geo));
  return record("conv1d_transpose", std::move(x), {y, k},
                [y, k, geo](const Tensor& g, const std::vector<bool>& need) {
                  return std::vector<Tensor>{need[0] ? conv_forward(g, k, geo) : Tensor(),
                                             need[1] ? conv_kernel(g, y, geo) : Tensor()};
                });
}

// dk[o, c, j] = sum_{n, t} gy[n, o, t] x[n, c, t s - p + j]
Tensor conv_kernel(const Tensor& x, const Tensor& gy, const ConvGeometry& geo) {
  const auto cols = im2col(x.data(), geo);
  const auto gm = to_channel_major(gy.data(), geo);
  const std::size_t width = geo.batch * geo.out_length;
  const std::size_t depth = geo.in_channels * geo.kernel;
  std::vector<double> out(geo.out_channels * depth, 0.0);
  for (std::size_t o = 0; o < geo.out_channels; ++o) {
    const double* grow = gm.data() + o * width;
    for (std::size_t q = 0; q < depth; ++q) {
      const double* xrow = cols.data() + q * width;
      double acc = 0.0;
      for (std::size_t i = 0; i < width; ++i) acc += grow[i] * xrow[i];
      out[o * depth + q] = acc;
    }
  }
  Tensor dk = make({geo.out_channels, geo.in_channels, geo.kernel}, std::move(out));
  return record("conv1d_kernel_grad", std::move(dk), {x, gy},
                [x, gy, geo](const Tensor& g, const std::vector<bool>& need) {
                  return std::vector<Tensor>{need[0] ? conv_adjoint(gy, g, geo) : Tensor(),
                                             need[1] ? conv_forward(x, g, geo) : Tensor()};
                });
}

void require_kernel(const Tensor& kernel, const char* op) {
  if (kernel.dim() != 3) {
    throw shape_error(std::string(op) + " kernel must be [C_out, C_in, K], got " +
                      shape_str(kernel.shape()));
  }
}

// Lifts [C, L] to [1, C, L]; returns whether it did.
bool lift_batch(Tensor& x, const char* op) {
  if (x.dim() == 2) {
    x = reshape(x, {1, x.size(0), x.size(1)});
    return true;
  }
  if (x.dim() != 3) {
    throw shape_error(std::string(op) + " input must be [N, C, L] or [C, L], got " +
                      shape_str(x.shape()));
  }
  return false;
}

Tensor drop_batch(const Tensor& y, bool lifted) {
  return lifted ? reshape(y, {y.size(1), y.size(2)}) : y;
}

}  // namespace

Tensor conv1d(const Tensor& input, const Tensor& kernel, std::size_t stride, std::size_t pad) {
  require_kernel(kernel, "conv1d");
  if (stride == 0) throw shape_error("conv1d stride must be positive");
  Tensor x = input;
  const bool lifted = lift_batch(x, "conv1d");
  if (x.size(1) != kernel.size(1)) {
    throw shape_error("conv1d channel mismatch: input " + shape_str(input.shape()) +
                      ", kernel " + shape_str(kernel.shape()));
  }
  const std::size_t padded = x.size(2) + 2 * pad;
  if (kernel.size(2) > padded) {
    throw shape_error("conv1d kernel of size " + std::to_string(kernel.size(2)) +
                      " is larger than the padded input of length " + std::to_string(padded));
  }
  ConvGeometry geo{x.size(0), x.size(1),  kernel.size(0), x.size(2),
                   (padded - kernel.size(2)) / stride + 1, kernel.size(2), stride, pad};
  return drop_batch(conv_forward(x, kernel, geo), lifted);
}

Tensor conv1d_transpose(const Tensor& input, const Tensor& kernel, std::size_t stride,
                        std::size_t pad, std::size_t out_pad) {
  require_kernel(kernel, "conv1d_transpose");
  if (stride == 0) throw shape_error("conv1d_transpose stride must be positive");
  if (out_pad >= stride && out_pad > 0) {
    throw shape_error("conv1d_transpose out_pad must be smaller than stride");
  }
  Tensor y = input;
  const bool lifted = lift_batch(y, "conv1d_transpose");
  if (y.size(1) != kernel.size(0)) {
    throw shape_error("conv1d_transpose channel mismatch: input " + shape_str(input.shape()) +
                      ", kernel " + shape_str(kernel.shape()));
  }
  const long long out_len = (static_cast<long long>(y.size(2)) - 1) * static_cast<long long>(stride) -
                            2 * static_cast<long long>(pad) +
                            static_cast<long long>(kernel.size(2)) +
                            static_cast<long long>(out_pad);
  if (out_len <= 0) {
    throw shape_error("conv1d_transpose output length would be " + std::to_string(out_len));
  }
  ConvGeometry geo{y.size(0),  kernel.size(1),  kernel.size(0), static_cast<std::size_t>(out_len),
                   y.size(2), kernel.size(2), stride,        pad};
  return drop_batch(conv_adjoint(y, kernel, geo), lifted);
}

Tensor conv1d_kernel_grad(const Tensor& input, const Tensor& grad_out, std::size_t kernel_size,
                          std::size_t stride, std::size_t pad) {
  Tensor x = input;
  Tensor g = grad_out;
  const bool lifted_x = lift_batch(x, "conv1d_kernel_grad");
  const bool lifted_g = lift_batch(g, "conv1d_kernel_grad");
  if (lifted_x != lifted_g || x.size(0) != g.size(0)) {
    throw shape_error("conv1d_kernel_grad batch mismatch: " + shape_str(input.shape()) + " vs " +
                      shape_str(grad_out.shape()));
  }
  ConvGeometry geo{x.size(0), x.size(1),   g.size(1), x.size(2),
                   g.size(2), kernel_size, stride,    pad};
  return conv_kernel(x, g, geo);
}

}  // namespace advspec

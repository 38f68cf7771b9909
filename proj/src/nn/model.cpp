#include <bit>
#include <cmath>
#include <sstream>

#include "advspec/nn.hpp"

namespace advspec {

LayerSpec LayerSpec::dense(std::size_t units, InitScheme init) {
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.units = units;
  s.init = init;
  return s;
}

LayerSpec LayerSpec::reshape(Shape target) {
  LayerSpec s;
  s.kind = LayerKind::reshape;
  s.target_shape = std::move(target);
  return s;
}

LayerSpec LayerSpec::conv(std::size_t out_channels, std::size_t out_length, std::size_t kernel,
                          std::size_t stride, std::size_t pad) {
  LayerSpec s;
  s.kind = LayerKind::conv1d;
  s.out_channels = out_channels;
  s.out_length = out_length;
  s.kernel = kernel;
  s.stride = stride;
  s.pad = pad;
  return s;
}

LayerSpec LayerSpec::conv_transpose(std::size_t out_channels, std::size_t out_length,
                                    std::size_t kernel, std::size_t stride, std::size_t pad,
                                    std::size_t out_pad) {
  LayerSpec s = conv(out_channels, out_length, kernel, stride, pad);
  s.kind = LayerKind::conv1d_transpose;
  s.out_pad = out_pad;
  return s;
}

LayerSpec LayerSpec::act(Activation a, double slope) {
  LayerSpec s;
  s.kind = LayerKind::activation;
  s.activation = a;
  s.slope = slope;
  return s;
}

LayerSpec LayerSpec::max_pool(std::size_t window) {
  LayerSpec s;
  s.kind = LayerKind::max_pool1d;
  s.window = window;
  return s;
}

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::reshape: return "reshape";
    case LayerKind::conv1d: return "conv1d";
    case LayerKind::conv1d_transpose: return "conv1d_transpose";
    case LayerKind::activation: return "activation";
    case LayerKind::max_pool1d: return "max_pool1d";
  }
  return "?";
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::softmax: return "softmax";
  }
  return "?";
}

Activation parse_activation(const std::string& name) {
  for (auto a : {Activation::identity, Activation::relu, Activation::leaky_relu, Activation::tanh,
                 Activation::sigmoid, Activation::softmax}) {
    if (to_string(a) == name) return a;
  }
  throw std::invalid_argument("unknown activation '" + name + "'");
}

namespace {

std::string describe(const ModelConfig& cfg, std::size_t i) {
  if (i == 0) return "input";
  return "layer " + std::to_string(i - 1) + " (" + to_string(cfg.layers[i - 1].kind) + ")";
}

[[noreturn]] void composition_error(const ModelConfig& cfg, std::size_t layer,
                                    const Shape& got, const std::string& why) {
  throw shape_error("model '" + cfg.name + "': layer " + std::to_string(layer) + " (" +
                    to_string(cfg.layers[layer].kind) + ") cannot follow " +
                    describe(cfg, layer) + " with output " + shape_str(got) + ": " + why);
}

Shape infer_output(const ModelConfig& cfg, std::size_t i, const Shape& in) {
  const LayerSpec& l = cfg.layers[i];
  switch (l.kind) {
    case LayerKind::dense:
      if (in.size() != 1) composition_error(cfg, i, in, "dense needs a flat [features] input");
      if (l.units == 0) composition_error(cfg, i, in, "dense needs units > 0");
      return {l.units};
    case LayerKind::reshape:
      if (shape_numel(l.target_shape) != shape_numel(in) || l.target_shape.empty()) {
        composition_error(cfg, i, in, "reshape target " + shape_str(l.target_shape) +
                                          " has a different element count");
      }
      return l.target_shape;
    case LayerKind::conv1d: {
      if (in.size() != 2) composition_error(cfg, i, in, "conv1d needs a [channels, length] input");
      if (l.kernel == 0 || l.stride == 0 || l.out_channels == 0) {
        composition_error(cfg, i, in, "conv1d needs positive kernel, stride and channels");
      }
      const std::size_t padded = in[1] + 2 * l.pad;
      if (l.kernel > padded) composition_error(cfg, i, in, "kernel larger than padded input");
      const std::size_t len = (padded - l.kernel) / l.stride + 1;
      if (l.out_length != 0 && len != l.out_length) {
        composition_error(cfg, i, in, "computed length " + std::to_string(len) +
                                          " differs from declared " + std::to_string(l.out_length));
      }
      return {l.out_channels, len};
    }
    case LayerKind::conv1d_transpose: {
      if (in.size() != 2) {
        composition_error(cfg, i, in, "conv1d_transpose needs a [channels, length] input");
      }
      if (l.kernel == 0 || l.stride == 0 || l.out_channels == 0) {
        composition_error(cfg, i, in, "conv1d_transpose needs positive kernel, stride and channels");
      }
      const long long len = (static_cast<long long>(in[1]) - 1) * static_cast<long long>(l.stride) -
                            2 * static_cast<long long>(l.pad) + static_cast<long long>(l.kernel) +
                            static_cast<long long>(l.out_pad);
      if (len <= 0) composition_error(cfg, i, in, "negative output length");
      if (l.out_length != 0 && static_cast<std::size_t>(len) != l.out_length) {
        composition_error(cfg, i, in, "computed length " + std::to_string(len) +
                                          " differs from declared " + std::to_string(l.out_length));
      }
      return {l.out_channels, static_cast<std::size_t>(len)};
    }
    case LayerKind::activation:
      if (l.activation == Activation::softmax && in.size() != 1) {
        composition_error(cfg, i, in, "softmax needs a flat [classes] input");
      }
      return in;
    case LayerKind::max_pool1d:
      if (in.size() != 2) composition_error(cfg, i, in, "max_pool1d needs a [channels, length] input");
      if (l.window == 0 || in[1] / l.window == 0) composition_error(cfg, i, in, "bad pool window");
      return {in[0], in[1] / l.window};
  }
  return in;
}

Tensor init_tensor(Shape shape, InitScheme scheme, std::size_t fan_in, Rng& rng) {
  std::vector<double> v(shape_numel(shape), 0.0);
  if (scheme == InitScheme::he_uniform) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (auto& x : v) x = rng.uniform(-bound, bound);
  }
  return Tensor::from(std::move(shape), std::move(v), true);
}

}  // namespace

Model::Model(ModelConfig config) : config_(std::move(config)) {
  if (config_.input_shape.empty() || shape_numel(config_.input_shape) == 0) {
    throw shape_error("model '" + config_.name + "' needs a non-empty input shape");
  }
  if (config_.layers.empty()) throw shape_error("model '" + config_.name + "' has no layers");
  Rng rng(config_.seed);
  Shape current = config_.input_shape;
  for (std::size_t i = 0; i < config_.layers.size(); ++i) {
    const LayerSpec& l = config_.layers[i];
    Shape next = infer_output(config_, i, current);
    const std::size_t first = params_.size();
    switch (l.kind) {
      case LayerKind::dense:
        params_.push_back(init_tensor({current[0], l.units}, l.init, current[0], rng));
        params_.push_back(Tensor::zeros({l.units}, true));
        break;
      case LayerKind::conv1d:
        params_.push_back(init_tensor({l.out_channels, current[0], l.kernel}, l.init,
                                      current[0] * l.kernel, rng));
        params_.push_back(Tensor::zeros({l.out_channels}, true));
        break;
      case LayerKind::conv1d_transpose:
        params_.push_back(init_tensor({current[0], l.out_channels, l.kernel}, l.init,
                                      current[0] * l.kernel, rng));
        params_.push_back(Tensor::zeros({l.out_channels}, true));
        break;
      default:
        break;
    }
    param_slots_.emplace_back(first, params_.size() - first);
    shapes_.push_back(next);
    current = std::move(next);
  }
  if (!config_.output_shape.empty() && config_.output_shape != current) {
    throw shape_error("model '" + config_.name + "' produces " + shape_str(current) +
                      " but the config declares output " + shape_str(config_.output_shape));
  }
}

std::span<const Tensor> Model::layer_parameters(std::size_t layer) const {
  auto [first, count] = param_slots_.at(layer);
  return {params_.data() + first, count};
}

Tensor Model::forward(const Tensor& batch) const {
  const Shape& in = batch.shape();
  Shape expected = config_.input_shape;
  if (in.size() != expected.size() + 1 || !std::equal(expected.begin(), expected.end(), in.begin() + 1)) {
    throw shape_error("model '" + config_.name + "' expects [N]+" + shape_str(expected) +
                      ", got " + shape_str(in));
  }
  const std::size_t n = in[0];
  Tensor x = batch;
  for (std::size_t i = 0; i < config_.layers.size(); ++i) {
    const LayerSpec& l = config_.layers[i];
    auto p = layer_parameters(i);
    switch (l.kind) {
      case LayerKind::dense:
        x = add_bias(matmul(x, p[0]), p[1], 1);
        break;
      case LayerKind::reshape: {
        Shape s{n};
        s.insert(s.end(), l.target_shape.begin(), l.target_shape.end());
        x = reshape(x, std::move(s));
        break;
      }
      case LayerKind::conv1d:
        x = add_bias(conv1d(x, p[0], l.stride, l.pad), p[1], 1);
        break;
      case LayerKind::conv1d_transpose:
        x = add_bias(conv1d_transpose(x, p[0], l.stride, l.pad, l.out_pad), p[1], 1);
        break;
      case LayerKind::activation:
        switch (l.activation) {
          case Activation::identity: break;
          case Activation::relu: x = relu(x); break;
          case Activation::leaky_relu: x = leaky_relu(x, l.slope); break;
          case Activation::tanh: x = tanh(x); break;
          case Activation::sigmoid: x = sigmoid(x); break;
          case Activation::softmax: x = softmax_rows(x); break;
        }
        break;
      case LayerKind::max_pool1d:
        x = max_pool1d(x, l.window);
        break;
    }
  }
  return x;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.numel();
  return n;
}

Model Model::clone() const {
  Model copy = *this;
  for (auto& p : copy.params_) p = p.detach().set_requires_grad(true);
  return copy;
}

std::uint64_t Model::parameter_checksum() const {
  // FNV-1a over the raw bits.
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& p : params_) {
    for (double v : p.data()) {
      auto bits = std::bit_cast<std::uint64_t>(v);
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xff;
        h *= 1099511628211ULL;
      }
    }
  }
  return h;
}

Model build_generator(const ModelConfig& config) {
  if (config.input_shape.size() != 1) {
    throw shape_error("generator '" + config.name + "' must take a flat latent vector, got input " +
                      shape_str(config.input_shape));
  }
  return Model(config);
}

Model build_critic(const ModelConfig& config) {
  Model m(config);
  if (m.output_shape() != Shape{1}) {
    throw shape_error("critic '" + config.name + "' must output one value per sample, got " +
                      shape_str(m.output_shape()));
  }
  if (config.layers.back().kind == LayerKind::activation &&
      config.layers.back().activation != Activation::identity) {
    throw shape_error("critic '" + config.name + "' must end without a nonlinearity");
  }
  return m;
}

Model build_classifier(const ModelConfig& config) {
  const auto& last = config.layers.empty() ? LayerSpec{} : config.layers.back();
  if (last.kind != LayerKind::activation || last.activation != Activation::softmax) {
    throw shape_error("classifier '" + config.name + "' must end in a softmax layer");
  }
  return Model(config);
}

ModelConfig default_generator_config(std::size_t latent_dim, std::uint64_t seed) {
  ModelConfig c;
  c.name = "generator";
  c.input_shape = {latent_dim};
  c.output_shape = {1, 48};
  c.seed = seed;
  c.layers = {
      LayerSpec::dense(384),
      LayerSpec::act(Activation::relu),
      LayerSpec::reshape({64, 6}),
      LayerSpec::conv_transpose(32, 12, 3, 2, 1, 1),
      LayerSpec::act(Activation::relu),
      LayerSpec::conv_transpose(16, 24, 3, 2, 1, 1),
      LayerSpec::act(Activation::relu),
      LayerSpec::conv_transpose(1, 48, 5, 2, 2, 1),
      LayerSpec::act(Activation::sigmoid),
  };
  return c;
}

ModelConfig default_critic_config(std::size_t bands, std::uint64_t seed) {
  ModelConfig c;
  c.name = "critic";
  c.input_shape = {1, bands};
  c.output_shape = {1};
  c.seed = seed;
  c.layers = {
      LayerSpec::conv(16, bands / 2, 5, 2, 2),
      LayerSpec::act(Activation::leaky_relu, 0.2),
      LayerSpec::conv(32, bands / 4, 3, 2, 1),
      LayerSpec::act(Activation::leaky_relu, 0.2),
      LayerSpec::conv(64, bands / 8, 3, 2, 1),
      LayerSpec::act(Activation::leaky_relu, 0.2),
      LayerSpec::reshape({64 * (bands / 8)}),
      LayerSpec::dense(1),
  };
  return c;
}

ModelConfig default_classifier_config(std::size_t bands, std::size_t classes, std::uint64_t seed) {
  ModelConfig c;
  c.name = "classifier";
  c.input_shape = {1, bands};
  c.output_shape = {classes};
  c.seed = seed;
  const std::size_t conv_len = bands - 10;
  const std::size_t pooled = conv_len / 3;
  c.layers = {
      LayerSpec::conv(20, conv_len, 11, 1, 0),
      LayerSpec::act(Activation::tanh),
      LayerSpec::max_pool(3),
      LayerSpec::reshape({20 * pooled}),
      LayerSpec::dense(100),
      LayerSpec::act(Activation::tanh),
      LayerSpec::dense(classes, InitScheme::zeros),
      LayerSpec::act(Activation::softmax),
  };
  return c;
}

ModelConfig toy_generator_config(std::size_t latent_dim, std::uint64_t seed) {
  ModelConfig c;
  c.name = "toy_generator";
  c.input_shape = {latent_dim};
  c.output_shape = {2};
  c.seed = seed;
  c.layers = {
      LayerSpec::dense(64), LayerSpec::act(Activation::relu),
      LayerSpec::dense(64), LayerSpec::act(Activation::relu),
      LayerSpec::dense(2),
  };
  return c;
}

ModelConfig toy_critic_config(std::uint64_t seed) {
  ModelConfig c;
  c.name = "toy_critic";
  c.input_shape = {2};
  c.output_shape = {1};
  c.seed = seed;
  c.layers = {
      LayerSpec::dense(64), LayerSpec::act(Activation::leaky_relu, 0.2),
      LayerSpec::dense(64), LayerSpec::act(Activation::leaky_relu, 0.2),
      LayerSpec::dense(1),
  };
  return c;
}

ModelConfig toy_classifier_config(std::size_t classes, std::uint64_t seed) {
  ModelConfig c;
  c.name = "toy_classifier";
  c.input_shape = {2};
  c.output_shape = {classes};
  c.seed = seed;
  c.layers = {LayerSpec::dense(classes, InitScheme::zeros), LayerSpec::act(Activation::softmax)};
  return c;
}

Tensor grad_norm_of_output_wrt_input(const Model& model, const Tensor& x, bool create_graph) {
  Tensor input = x.requires_grad() ? x : x.detach().set_requires_grad(true);
  return input_gradient_norms(input, model.forward(input), create_graph);
}

Tensor as_batch(const Matrix& samples, const Shape& per_sample_shape) {
  if (shape_numel(per_sample_shape) != samples.cols) {
    throw shape_error("samples have " + std::to_string(samples.cols) +
                      " columns, model expects " + shape_str(per_sample_shape));
  }
  Shape s{samples.rows};
  s.insert(s.end(), per_sample_shape.begin(), per_sample_shape.end());
  return Tensor::from(std::move(s), samples.values);
}

Matrix as_matrix(const Tensor& batch) {
  Matrix m;
  m.rows = batch.size(0);
  m.cols = batch.numel() / m.rows;
  m.values.assign(batch.data().begin(), batch.data().end());
  return m;
}

}  // namespace advspec

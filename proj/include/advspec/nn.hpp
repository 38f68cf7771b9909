#pragma once

// Declarative layer stacks for the generator, critic and classifier, the
// Adam optimizer and the classification loss.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "advspec/common.hpp"
#include "advspec/tensor.hpp"

namespace advspec {

enum class LayerKind { dense, reshape, conv1d, conv1d_transpose, activation, max_pool1d };

enum class Activation { identity, relu, leaky_relu, tanh, sigmoid, softmax };

enum class InitScheme { he_uniform, zeros };

// One entry of a layer stack. Per-sample shapes are [features] for dense
// layers and [channels, length] for convolutions; the batch axis is implicit.
struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t units = 0;                 // dense
  Shape target_shape;                    // reshape
  std::size_t out_channels = 0;          // conv1d, conv1d_transpose
  std::size_t out_length = 0;            // conv: expected output length, 0 = unchecked
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t pad = 0;
  std::size_t out_pad = 0;               // conv1d_transpose only
  Activation activation = Activation::identity;
  double slope = 0.2;                    // leaky_relu
  std::size_t window = 0;                // max_pool1d
  InitScheme init = InitScheme::he_uniform;

  static LayerSpec dense(std::size_t units, InitScheme init = InitScheme::he_uniform);
  static LayerSpec reshape(Shape target);
  static LayerSpec conv(std::size_t out_channels, std::size_t out_length, std::size_t kernel,
                        std::size_t stride, std::size_t pad);
  static LayerSpec conv_transpose(std::size_t out_channels, std::size_t out_length,
                                  std::size_t kernel, std::size_t stride, std::size_t pad,
                                  std::size_t out_pad);
  static LayerSpec act(Activation a, double slope = 0.2);
  static LayerSpec max_pool(std::size_t window);

  bool operator==(const LayerSpec&) const = default;
};

struct ModelConfig {
  std::string name;
  Shape input_shape;
  // Expected per-sample output shape; empty means unchecked.
  Shape output_shape;
  std::vector<LayerSpec> layers;
  std::uint64_t seed = 0;

  bool operator==(const ModelConfig&) const = default;
};

std::string to_string(LayerKind kind);
std::string to_string(Activation a);
Activation parse_activation(const std::string& name);

// Copies share parameter storage; clone() makes an independent model.
class Model {
 public:
  Model() = default;
  // Checks that consecutive layer shapes compose and initializes parameters
  // from config.seed. Throws shape_error naming the offending layer pair.
  explicit Model(ModelConfig config);

  // batch: [N, input_shape...] -> [N, output_shape...]
  Tensor forward(const Tensor& batch) const;

  const ModelConfig& config() const { return config_; }
  const Shape& input_shape() const { return config_.input_shape; }
  const Shape& output_shape() const { return shapes_.back(); }
  // Per-sample shape after each layer.
  const std::vector<Shape>& layer_shapes() const { return shapes_; }

  std::vector<Tensor>& parameters() { return params_; }
  const std::vector<Tensor>& parameters() const { return params_; }
  std::size_t parameter_count() const;
  // Deep copy with independent parameter storage.
  Model clone() const;
  // Order-sensitive checksum of all parameter bits.
  std::uint64_t parameter_checksum() const;

  // Parameter tensors of layer i (empty for parameter-free layers).
  std::span<const Tensor> layer_parameters(std::size_t layer) const;

 private:
  ModelConfig config_;
  std::vector<Shape> shapes_;
  std::vector<Tensor> params_;
  // Offset of each layer's first parameter in params_, and its count.
  std::vector<std::pair<std::size_t, std::size_t>> param_slots_;
};

// Role-checked builders. The generator takes a latent vector, the critic
// ends in a single real output with no nonlinearity, the classifier ends in
// a softmax over classes.
Model build_generator(const ModelConfig& config);
Model build_critic(const ModelConfig& config);
Model build_classifier(const ModelConfig& config);

// Generator: Linear 384, reshape to 64 channels x 6, then transposed
// convolutions to (32 x 12), (16 x 24), (1 x 48) with a sigmoid head.
ModelConfig default_generator_config(std::size_t latent_dim = 64, std::uint64_t seed = 1);
// Critic: convolutions (16 x 24, K=5), (32 x 12, K=3), (64 x 6, K=3), flatten
// to 384, Linear 1.
ModelConfig default_critic_config(std::size_t bands = 48, std::uint64_t seed = 2);
// 1-D CNN pixel classifier: conv(20, K=11), tanh, max-pool 3, dense 100,
// tanh, dense classes (zero init), softmax.
ModelConfig default_classifier_config(std::size_t bands, std::size_t classes,
                                      std::uint64_t seed = 3);

ModelConfig toy_generator_config(std::size_t latent_dim = 4, std::uint64_t seed = 1);
ModelConfig toy_critic_config(std::uint64_t seed = 2);
// Logistic regression on 2-D points.
ModelConfig toy_classifier_config(std::size_t classes = 2, std::uint64_t seed = 3);

// Per-sample ||d model(x)_n / d x_n||_2 for a model with one scalar output per
// sample. With create_graph the result is differentiable with respect to the
// model parameters.
Tensor grad_norm_of_output_wrt_input(const Model& model, const Tensor& x, bool create_graph);

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.0;
  double beta2 = 0.9;
  double epsilon = 1e-8;

  static AdamOptions wgan() { return {1e-4, 0.0, 0.9, 1e-8}; }
  static AdamOptions classifier() { return {1e-3, 0.9, 0.999, 1e-8}; }

  bool operator==(const AdamOptions&) const = default;
};

struct AdamState {
  AdamState() = default;
  explicit AdamState(AdamOptions o) : options(o) {}

  AdamOptions options;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

// One bias-corrected Adam update. Undefined gradients count as zero.
void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state);

// Mean negative log-likelihood of rows of class probabilities; log input is
// clamped at 1e-12.
Tensor cross_entropy(const Tensor& probabilities, std::span<const int> labels);

// Binary checkpoint: "ADVS", u32 version, u32 layer count, per-layer
// parameter shapes, then f64 little-endian parameter values. The model
// config is written next to it as JSON (same stem, .json extension).
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

// Raw binary parameter I/O without the sidecar.
void write_parameters(std::ostream& out, const Model& model);
void read_parameters(std::istream& in, Model& model);

// Shapes a sample matrix as a batch for the model's input.
Tensor as_batch(const Matrix& samples, const Shape& per_sample_shape);
// Flattens a batch tensor into one row per sample.
Matrix as_matrix(const Tensor& batch);

}  // namespace advspec

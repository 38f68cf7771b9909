#pragma once

// WGAN training with the one-sided Lipschitz penalty, with real batches
// drawn from a reweighted empirical distribution.

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "advspec/common.hpp"
#include "advspec/nn.hpp"
#include "advspec/weighting.hpp"

namespace advspec {

enum class LatentPrior { normal, uniform };

std::string to_string(LatentPrior prior);
LatentPrior parse_latent_prior(const std::string& name);

struct TrainConfig {
  std::size_t latent_dim = 64;
  LatentPrior prior = LatentPrior::normal;
  std::size_t n_critic = 5;
  double penalty_coefficient = 10.0;
  std::size_t batch_size = 64;
  std::size_t generator_steps = 5000;
  AdamOptions generator_adam = AdamOptions::wgan();
  AdamOptions critic_adam = AdamOptions::wgan();
  std::uint64_t seed = 0;
  // Save a checkpoint every this many generator steps (0 = never).
  std::size_t checkpoint_every = 0;
  std::filesystem::path checkpoint_dir;

  // Throws std::invalid_argument naming the field.
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

// One record per generator iteration: critic loss and penalty averaged over
// its n_critic critic updates, and the generator loss.
struct TraceRecord {
  std::size_t step = 0;
  double d_loss = 0.0;
  double g_loss = 0.0;
  double penalty = 0.0;
  double seconds = 0.0;  // wall clock since the run started; not exported

  bool same_values(const TraceRecord& o) const {
    return step == o.step && d_loss == o.d_loss && g_loss == o.g_loss && penalty == o.penalty;
  }
};

struct LossTrace {
  std::vector<TraceRecord> records;

  std::size_t size() const { return records.size(); }
  bool same_values(const LossTrace& o) const;
  // step,d_loss,g_loss,penalty
  void write_csv(const std::filesystem::path& path) const;
  static LossTrace read_csv(const std::filesystem::path& path);
};

class training_diverged : public std::runtime_error {
 public:
  training_diverged(std::size_t step, double penalty, const std::string& what);
  std::size_t step() const { return step_; }
  double penalty() const { return penalty_; }

 private:
  std::size_t step_;
  double penalty_;
};

// [n, d] latent batch from the prior.
Tensor sample_latent(std::size_t n, std::size_t d, LatentPrior prior, Rng& rng);

// Mean over the batch of max(0, ||grad D(x_hat)|| - 1)^2 with
// x_hat_i = eps_i * real_i + (1 - eps_i) * fake_i. Differentiable with
// respect to the critic parameters; fake is treated as constant.
Tensor lipschitz_penalty(const Model& critic, const Tensor& real, const Tensor& fake,
                         std::span<const double> eps);
// Draws eps_i ~ U[0, 1] from rng.
Tensor lipschitz_penalty(const Model& critic, const Tensor& real, const Tensor& fake, Rng& rng);

struct CriticStepResult {
  double loss = 0.0;
  double penalty = 0.0;
};

// One Adam update of the critic on
//   mean D(G(z)) - mean D(x) + lambda * penalty,
// x drawn through `sampler` from the rows of `data`. Draw order: indices,
// then z, then eps. The generator is not modified.
CriticStepResult critic_step(Model& critic, const Model& generator, const Matrix& data,
                             const WeightedSampler& sampler, const TrainConfig& cfg,
                             AdamState& state, Rng& rng, std::size_t step_index = 0);

// One Adam update of the generator on -mean D(G(z)). The critic is not
// modified.
double generator_step(const Model& critic, Model& generator, const TrainConfig& cfg,
                      AdamState& state, Rng& rng, std::size_t step_index = 0);

// Trains private copies of the models passed in.
class WganTrainer {
 public:
  WganTrainer(Model generator, Model critic, Matrix data, const SampleWeights& weights,
              TrainConfig cfg);

  // run() continues until cfg.generator_steps iterations are done;
  // run_steps() does exactly `steps` more. Both checkpoint per
  // cfg.checkpoint_every.
  void run();
  void run_steps(std::size_t steps);
  void step();

  std::size_t steps_done() const { return step_; }
  const LossTrace& trace() const { return trace_; }
  const Model& generator() const { return generator_; }
  const Model& critic() const { return critic_; }
  const TrainConfig& config() const { return cfg_; }

  // generator.bin/.json, critic.bin/.json, state.json
  void save_checkpoint(const std::filesystem::path& dir) const;
  // Restores models, optimizer moments, stream state and trace, so that
  // continuing reproduces an uninterrupted run exactly.
  static WganTrainer resume(const std::filesystem::path& dir, Matrix data,
                            const SampleWeights& weights, TrainConfig cfg);

 private:
  Model generator_;
  Model critic_;
  Matrix data_;
  WeightedSampler sampler_;
  TrainConfig cfg_;
  AdamState g_state_;
  AdamState d_state_;
  Rng rng_;
  std::size_t step_ = 0;
  LossTrace trace_;
  double elapsed_offset_ = 0.0;
};

struct TrainResult {
  Model generator;
  Model critic;
  LossTrace trace;
};

TrainResult train_wgan(const Matrix& data, const SampleWeights& weights, Model generator,
                       Model critic, const TrainConfig& cfg);

// n samples from the generator, one flattened sample per row.
Matrix generate(const Model& generator, std::size_t n, LatentPrior prior, Rng& rng);

}  // namespace advspec

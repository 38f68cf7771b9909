#include "advspec/gan.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "advspec/serialize.hpp"

namespace advspec {

std::string to_string(LatentPrior prior) {
  return prior == LatentPrior::normal ? "normal" : "uniform";
}

LatentPrior parse_latent_prior(const std::string& name) {
  if (name == "normal") return LatentPrior::normal;
  if (name == "uniform") return LatentPrior::uniform;
  throw std::invalid_argument("unknown latent prior '" + name + "' (expected normal or uniform)");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("train." + field + ": " + why);
  };
  if (latent_dim == 0) fail("latent_dim", "must be >= 1");
  if (n_critic == 0) fail("n_critic", "must be >= 1");
  if (!(penalty_coefficient >= 0.0) || !std::isfinite(penalty_coefficient)) {
    fail("penalty_coefficient", "must be a finite value >= 0");
  }
  if (batch_size < 2) fail("batch_size", "must be >= 2");
  if (!(generator_adam.learning_rate >= 0.0)) fail("generator_adam.learning_rate", "must be >= 0");
  if (!(critic_adam.learning_rate >= 0.0)) fail("critic_adam.learning_rate", "must be >= 0");
}

bool LossTrace::same_values(const LossTrace& o) const {
  if (records.size() != o.records.size()) return false;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].same_values(o.records[i])) return false;
  }
  return true;
}

void LossTrace::write_csv(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "step,d_loss,g_loss,penalty\n" << std::setprecision(17);
  for (const auto& r : records) {
    out << r.step << ',' << r.d_loss << ',' << r.g_loss << ',' << r.penalty << '\n';
  }
}

LossTrace LossTrace::read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing trace file " + path.string());
  LossTrace t;
  std::string line;
  std::getline(in, line);
  if (line != "step,d_loss,g_loss,penalty") {
    throw std::runtime_error(path.string() + ": unexpected trace header '" + line + "'");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    TraceRecord r;
    char c1 = 0, c2 = 0, c3 = 0;
    if (!(row >> r.step >> c1 >> r.d_loss >> c2 >> r.g_loss >> c3 >> r.penalty) || c1 != ',' ||
        c2 != ',' || c3 != ',') {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": malformed row");
    }
    t.records.push_back(r);
  }
  return t;
}

training_diverged::training_diverged(std::size_t step, double penalty, const std::string& what)
    : std::runtime_error(what), step_(step), penalty_(penalty) {}

Tensor sample_latent(std::size_t n, std::size_t d, LatentPrior prior, Rng& rng) {
  std::vector<double> v(n * d);
  for (auto& x : v) x = prior == LatentPrior::normal ? rng.normal() : rng.uniform(-1.0, 1.0);
  return Tensor::from({n, d}, std::move(v));
}

Tensor lipschitz_penalty(const Model& critic, const Tensor& real, const Tensor& fake,
                         std::span<const double> eps) {
  if (real.shape() != fake.shape()) {
    throw shape_error("lipschitz_penalty: real batch " + shape_str(real.shape()) +
                      " vs fake batch " + shape_str(fake.shape()));
  }
  const std::size_t n = real.size(0);
  if (eps.size() != n) {
    throw shape_error("lipschitz_penalty: " + std::to_string(eps.size()) +
                      " interpolation weights for a batch of " + std::to_string(n));
  }
  const std::size_t per = real.numel() / n;
  auto r = real.data();
  auto f = fake.data();
  std::vector<double> mixed(real.numel());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < per; ++k) {
      const std::size_t j = i * per + k;
      mixed[j] = eps[i] * r[j] + (1.0 - eps[i]) * f[j];
    }
  }
  Tensor x_hat = Tensor::from(real.shape(), std::move(mixed), true);
  Tensor norms = input_gradient_norms(x_hat, critic.forward(x_hat), true);
  Tensor excess = relu(add_scalar(norms, -1.0));
  return mean(mul(excess, excess));
}

Tensor lipschitz_penalty(const Model& critic, const Tensor& real, const Tensor& fake, Rng& rng) {
  std::vector<double> eps(real.size(0));
  for (auto& e : eps) e = rng.uniform();
  return lipschitz_penalty(critic, real, fake, eps);
}

namespace {

void check_finite(double value, std::size_t step, double penalty, const char* what) {
  if (!std::isfinite(value)) {
    std::ostringstream msg;
    msg << what << " is not finite at generator step " << step << " (penalty " << penalty << ")";
    throw training_diverged(step, penalty, msg.str());
  }
}

}  // namespace

CriticStepResult critic_step(Model& critic, const Model& generator, const Matrix& data,
                             const WeightedSampler& sampler, const TrainConfig& cfg,
                             AdamState& state, Rng& rng, std::size_t step_index) {
  const auto idx = sampler.sample(cfg.batch_size, rng);
  Tensor real = as_batch(data.select_rows(idx), critic.input_shape());
  Tensor z = sample_latent(cfg.batch_size, cfg.latent_dim, cfg.prior, rng);
  Tensor fake;
  {
    NoGradGuard no_grad;
    fake = generator.forward(z);
  }
  if (fake.shape() != real.shape()) {
    throw shape_error("generator produces " + shape_str(fake.shape()) + " but real batch is " +
                      shape_str(real.shape()));
  }
  Tensor loss = sub(mean(critic.forward(fake)), mean(critic.forward(real)));
  CriticStepResult result;
  if (cfg.penalty_coefficient > 0.0) {
    Tensor pen = lipschitz_penalty(critic, real, fake, rng);
    result.penalty = pen.item();
    loss = add(loss, scale(pen, cfg.penalty_coefficient));
  }
  result.loss = loss.item();
  check_finite(result.loss, step_index, result.penalty, "critic loss");
  auto g = grad(loss, critic.parameters());
  adam_step(critic.parameters(), g, state);
  return result;
}

double generator_step(const Model& critic, Model& generator, const TrainConfig& cfg,
                      AdamState& state, Rng& rng, std::size_t step_index) {
  Tensor z = sample_latent(cfg.batch_size, cfg.latent_dim, cfg.prior, rng);
  Tensor loss = neg(mean(critic.forward(generator.forward(z))));
  const double value = loss.item();
  check_finite(value, step_index, 0.0, "generator loss");
  auto g = grad(loss, generator.parameters());
  adam_step(generator.parameters(), g, state);
  return value;
}

WganTrainer::WganTrainer(Model generator, Model critic, Matrix data, const SampleWeights& weights,
                         TrainConfig cfg)
    : generator_(generator.clone()),
      critic_(critic.clone()),
      data_(std::move(data)),
      sampler_(weights),
      cfg_(std::move(cfg)),
      g_state_(cfg_.generator_adam),
      d_state_(cfg_.critic_adam),
      rng_(cfg_.seed) {
  cfg_.validate();
  if (data_.rows == 0) throw std::invalid_argument("training data is empty");
  if (weights.size() != data_.rows) {
    throw std::invalid_argument("weights cover " + std::to_string(weights.size()) +
                                " samples, data has " + std::to_string(data_.rows));
  }
  if (generator_.input_shape() != Shape{cfg_.latent_dim}) {
    throw shape_error("generator input " + shape_str(generator_.input_shape()) +
                      " does not match latent_dim " + std::to_string(cfg_.latent_dim));
  }
  if (shape_numel(critic_.input_shape()) != data_.cols) {
    throw shape_error("critic input " + shape_str(critic_.input_shape()) + " does not match " +
                      std::to_string(data_.cols) + " data columns");
  }
}

void WganTrainer::step() {
  const auto start = std::chrono::steady_clock::now();
  TraceRecord rec;
  rec.step = step_;
  for (std::size_t k = 0; k < cfg_.n_critic; ++k) {
    auto r = critic_step(critic_, generator_, data_, sampler_, cfg_, d_state_, rng_, step_);
    rec.d_loss += r.loss;
    rec.penalty += r.penalty;
  }
  rec.d_loss /= static_cast<double>(cfg_.n_critic);
  rec.penalty /= static_cast<double>(cfg_.n_critic);
  rec.g_loss = generator_step(critic_, generator_, cfg_, g_state_, rng_, step_);
  elapsed_offset_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  rec.seconds = elapsed_offset_;
  trace_.records.push_back(rec);
  ++step_;
  if (cfg_.checkpoint_every > 0 && !cfg_.checkpoint_dir.empty() &&
      step_ % cfg_.checkpoint_every == 0) {
    save_checkpoint(cfg_.checkpoint_dir);
  }
}

void WganTrainer::run_steps(std::size_t steps) {
  for (std::size_t i = 0; i < steps; ++i) step();
}

void WganTrainer::run() {
  while (step_ < cfg_.generator_steps) step();
}

void WganTrainer::save_checkpoint(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  save_model(generator_, dir / "generator.bin");
  save_model(critic_, dir / "critic.bin");
  Json trace = Json::array();
  for (const auto& r : trace_.records) trace.push_back({r.step, r.d_loss, r.g_loss, r.penalty});
  Json state{{"step", step_},
             {"rng", rng_.state()},
             {"generator_adam", to_json(g_state_)},
             {"critic_adam", to_json(d_state_)},
             {"trace", trace}};
  const auto tmp = dir / "state.json.tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << state.dump() << '\n';
  }
  std::filesystem::rename(tmp, dir / "state.json");
}

WganTrainer WganTrainer::resume(const std::filesystem::path& dir, Matrix data,
                                const SampleWeights& weights, TrainConfig cfg) {
  const auto state_path = dir / "state.json";
  std::ifstream in(state_path);
  if (!in) throw std::runtime_error("missing checkpoint state " + state_path.string());
  const Json state = Json::parse(in);
  WganTrainer t(load_model(dir / "generator.bin"), load_model(dir / "critic.bin"),
                std::move(data), weights, std::move(cfg));
  t.step_ = state.at("step").get<std::size_t>();
  t.rng_.restore(state.at("rng").get<std::string>());
  t.g_state_ = adam_state_from_json(state.at("generator_adam"));
  t.d_state_ = adam_state_from_json(state.at("critic_adam"));
  for (const auto& r : state.at("trace")) {
    TraceRecord rec;
    rec.step = r.at(0).get<std::size_t>();
    rec.d_loss = r.at(1).get<double>();
    rec.g_loss = r.at(2).get<double>();
    rec.penalty = r.at(3).get<double>();
    t.trace_.records.push_back(rec);
  }
  if (t.trace_.size() != t.step_) {
    throw std::runtime_error(state_path.string() + ": trace has " +
                             std::to_string(t.trace_.size()) + " records for step " +
                             std::to_string(t.step_));
  }
  return t;
}

TrainResult train_wgan(const Matrix& data, const SampleWeights& weights, Model generator,
                       Model critic, const TrainConfig& cfg) {
  weights.validate();
  WganTrainer t(std::move(generator), std::move(critic), data, weights, cfg);
  t.run();
  return {t.generator(), t.critic(), t.trace()};
}

Matrix generate(const Model& generator, std::size_t n, LatentPrior prior, Rng& rng) {
  if (n == 0) throw std::invalid_argument("generate needs n >= 1");
  if (generator.input_shape().size() != 1) {
    throw shape_error("generator must take a flat latent vector");
  }
  Tensor z = sample_latent(n, generator.input_shape()[0], prior, rng);
  NoGradGuard no_grad;
  return as_matrix(generator.forward(z));
}

}  // namespace advspec

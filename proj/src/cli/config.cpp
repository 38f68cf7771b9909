#include <cmath>
#include <fstream>
#include <set>

#include "advspec/cli.hpp"

namespace advspec::cli {

namespace {

// Strict reader for one JSON object: every key must be known.
class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw config_error(where() + "expected an object");
  }

  template <class T>
  void get(const std::string& key, T& value) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      value = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw config_error(field(key) + ": wrong type (" + j_.at(key).dump() + ")");
    }
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    static const Json empty = Json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, field(key));
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) throw config_error(field(key) + ": unknown key");
    }
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string where() const { return path_.empty() ? "config: " : path_ + ": "; }

  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_adam(Section s, AdamOptions& o) {
  s.get("learning_rate", o.learning_rate);
  s.get("beta1", o.beta1);
  s.get("beta2", o.beta2);
  s.get("epsilon", o.epsilon);
  s.finish();
}

void require(bool ok, const std::string& field, const std::string& why) {
  if (!ok) throw config_error(field + ": " + why);
}

}  // namespace

void PipelineConfig::validate() const {
  const auto& d = dataset;
  require(d.source == "csv" || d.source == "toy2d" || d.source == "synthetic", "dataset.source",
          "expected csv, toy2d or synthetic, got '" + d.source + "'");
  if (d.source == "csv") require(!d.csv_path.empty(), "dataset.csv_path", "required for csv");
  require(d.bands >= 1, "dataset.bands", "must be >= 1");
  require(d.train_fraction > 0.0 && d.train_fraction < 1.0, "dataset.train_fraction",
          "must lie in (0, 1)");
  require(d.toy_points >= 10, "dataset.toy_points", "must be >= 10");
  require(d.toy_flip_rate >= 0.0 && d.toy_flip_rate < kToyPeakFlip, "dataset.toy_flip_rate",
          "must lie in [0, 0.45)");
  require(d.per_class >= 2, "dataset.per_class", "must be >= 2");
  if (d.source == "synthetic") {
    require(d.bands == 48, "dataset.bands", "the default spectra architecture needs 48 bands");
  }

  require(classifier.epochs >= 1, "classifier.epochs", "must be >= 1");
  require(classifier.batch_size >= 1, "classifier.batch_size", "must be >= 1");
  require(classifier.adam.learning_rate >= 0.0, "classifier.adam.learning_rate", "must be >= 0");

  require(std::isfinite(weighting.temperature) && weighting.temperature >= 0.0,
          "weighting.temperature", "must be a finite value >= 0");

  try {
    gan.validate();
  } catch (const std::invalid_argument& e) {
    std::string msg = e.what();
    if (msg.rfind("train.", 0) == 0) msg = "gan." + msg.substr(6);
    throw config_error(msg);
  }

  require(attack.target_class >= 0, "attack.target_class", "must be >= 0");
  require(attack.runs >= 1, "attack.runs", "must be >= 1");
  require(attack.per_run >= 1, "attack.per_run", "must be >= 1");
  require(attack.baseline_restarts >= 1, "attack.baseline_restarts", "must be >= 1");
  require(attack.baseline_step >= 0.0, "attack.baseline_step", "must be >= 0");
  require(!output_dir.empty(), "output_dir", "must not be empty");
}

bool PipelineConfig::operator==(const PipelineConfig& o) const {
  return to_json(*this) == to_json(o);
}

PipelineConfig toy_preset() {
  PipelineConfig c;
  c.dataset.source = "toy2d";
  c.dataset.bands = 2;
  c.classifier.epochs = 50;
  c.classifier.adam.learning_rate = 0.01;
  c.weighting = WeightingScheme::soft(15.0);
  c.gan.latent_dim = 4;
  c.gan.batch_size = 64;
  c.gan.generator_steps = 500;
  c.output_dir = "toy_out";
  return c;
}

PipelineConfig spectra_preset() {
  PipelineConfig c;
  c.dataset.source = "synthetic";
  c.weighting = WeightingScheme::soft(20.0);
  c.gan.latent_dim = 64;
  c.gan.batch_size = 32;
  c.gan.generator_steps = 400;
  c.gan.generator_adam.learning_rate = 5e-4;
  c.gan.critic_adam.learning_rate = 5e-4;
  c.output_dir = "spectra_out";
  return c;
}

Json to_json(const PipelineConfig& c) {
  const auto& d = c.dataset;
  const auto& g = c.gan;
  const auto& a = c.attack;
  return Json{
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"dataset",
       {{"source", d.source},
        {"csv_path", d.csv_path},
        {"class_names", d.class_names},
        {"bands", d.bands},
        {"toy_points", d.toy_points},
        {"toy_flip_rate", d.toy_flip_rate},
        {"per_class", d.per_class},
        {"train_fraction", d.train_fraction}}},
      {"classifier",
       {{"epochs", c.classifier.epochs},
        {"batch_size", c.classifier.batch_size},
        {"adam", to_json(c.classifier.adam)}}},
      {"weighting", {{"scheme", c.weighting.name()}, {"temperature", c.weighting.temperature}}},
      {"gan",
       {{"latent_dim", g.latent_dim},
        {"prior", to_string(g.prior)},
        {"n_critic", g.n_critic},
        {"penalty_coefficient", g.penalty_coefficient},
        {"batch_size", g.batch_size},
        {"generator_steps", g.generator_steps},
        {"generator_adam", to_json(g.generator_adam)},
        {"critic_adam", to_json(g.critic_adam)},
        {"checkpoint_every", g.checkpoint_every}}},
      {"attack",
       {{"target_class", a.target_class},
        {"runs", a.runs},
        {"per_run", a.per_run},
        {"baseline_restarts", a.baseline_restarts},
        {"baseline_iters", a.baseline_iters},
        {"baseline_step", a.baseline_step}}},
  };
}

PipelineConfig pipeline_config_from_json(const Json& j) {
  PipelineConfig c;
  Section root(j, "");
  root.get("seed", c.seed);
  root.get("output_dir", c.output_dir);

  auto d = root.child("dataset");
  d.get("source", c.dataset.source);
  d.get("csv_path", c.dataset.csv_path);
  d.get("class_names", c.dataset.class_names);
  d.get("bands", c.dataset.bands);
  d.get("toy_points", c.dataset.toy_points);
  d.get("toy_flip_rate", c.dataset.toy_flip_rate);
  d.get("per_class", c.dataset.per_class);
  d.get("train_fraction", c.dataset.train_fraction);
  d.finish();

  auto k = root.child("classifier");
  k.get("epochs", c.classifier.epochs);
  k.get("batch_size", c.classifier.batch_size);
  read_adam(k.child("adam"), c.classifier.adam);
  k.finish();

  auto w = root.child("weighting");
  std::string scheme = c.weighting.name();
  double temperature = c.weighting.temperature;
  w.get("scheme", scheme);
  w.get("temperature", temperature);
  w.finish();
  try {
    c.weighting = WeightingScheme::parse(scheme, temperature);
    if (c.weighting.kind != WeightingScheme::Kind::soft) c.weighting.temperature = temperature;
  } catch (const std::invalid_argument& e) {
    throw config_error(std::string("weighting: ") + e.what());
  }

  auto g = root.child("gan");
  std::string prior = to_string(c.gan.prior);
  g.get("latent_dim", c.gan.latent_dim);
  g.get("prior", prior);
  g.get("n_critic", c.gan.n_critic);
  g.get("penalty_coefficient", c.gan.penalty_coefficient);
  g.get("batch_size", c.gan.batch_size);
  g.get("generator_steps", c.gan.generator_steps);
  read_adam(g.child("generator_adam"), c.gan.generator_adam);
  read_adam(g.child("critic_adam"), c.gan.critic_adam);
  g.get("checkpoint_every", c.gan.checkpoint_every);
  g.finish();
  try {
    c.gan.prior = parse_latent_prior(prior);
  } catch (const std::invalid_argument& e) {
    throw config_error(std::string("gan.prior: ") + e.what());
  }

  auto a = root.child("attack");
  a.get("target_class", c.attack.target_class);
  a.get("runs", c.attack.runs);
  a.get("per_run", c.attack.per_run);
  a.get("baseline_restarts", c.attack.baseline_restarts);
  a.get("baseline_iters", c.attack.baseline_iters);
  a.get("baseline_step", c.attack.baseline_step);
  a.finish();

  root.finish();
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw missing_artifact("cannot open config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw config_error(path.string() + ": " + e.what());
  }
  return pipeline_config_from_json(j);
}

void save_config(const std::filesystem::path& path, const PipelineConfig& cfg) {
  write_json(path, to_json(cfg));
}

Seeds derive_seeds(std::uint64_t s) {
  Seeds r;
  r.data = s;
  r.split = s;
  r.classifier_init = s;
  r.classifier_shuffle = s;
  r.generator_init = s;
  r.critic_init = s + 100;
  r.gan = s;
  r.attack = s * 1000;
  r.baseline = s * 77;
  r.figures = s + 5;
  return r;
}

}  // namespace advspec::cli

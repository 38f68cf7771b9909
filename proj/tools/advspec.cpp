#include <cstdio>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "advspec/cli.hpp"

using namespace advspec;
using namespace advspec::cli;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> scheme;
  std::optional<double> temperature;
  std::optional<int> target_class;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "pipeline config (JSON)");
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--scheme", o.scheme, "weighting scheme")
      ->check(CLI::IsMember({"uniform", "hard", "soft"}));
  cmd->add_option("--temperature", o.temperature, "soft weighting temperature (default 20)");
  cmd->add_option("--target-class", o.target_class, "attacked class id");
}

PipelineConfig resolve(const Overrides& o, PipelineConfig preset) {
  PipelineConfig cfg = o.config.empty() ? std::move(preset) : load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.out) cfg.output_dir = *o.out;
  if (o.scheme || o.temperature) {
    const std::string scheme = o.scheme.value_or(cfg.weighting.name());
    const double w = o.temperature.value_or(o.scheme ? 20.0 : cfg.weighting.temperature);
    try {
      cfg.weighting = WeightingScheme::parse(scheme, w);
    } catch (const std::invalid_argument& e) {
      throw config_error(std::string("--temperature: ") + e.what());
    }
  }
  if (o.target_class) cfg.attack.target_class = *o.target_class;
  cfg.validate();
  return cfg;
}

void print_attack(const AttackReport& r) {
  std::printf("target %d: success %.4f +- %.4f over %zu runs (classifier accuracy on class %.4f)\n",
              r.target_class, r.mean, r.std, r.runs.size(), r.classifier_accuracy_on_class);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"advspec: adversarial spectra from a reweighted WGAN"};
  app.require_subcommand(1);
  Overrides o;
  bool resume = false;
  std::string preset = "spectra";
  std::string config_path;

  auto* train_clf = app.add_subcommand("train-classifier", "train and evaluate the classifier");
  auto* weights = app.add_subcommand("weights", "per-sample weights of the target class");
  auto* train_gan = app.add_subcommand("train-gan", "train the weighted WGAN");
  auto* attack = app.add_subcommand("attack", "success rate and spectra figure");
  auto* baseline = app.add_subcommand("baseline", "simplified latent hill-climb baseline");
  auto* demo_toy = app.add_subcommand("demo-toy", "full pipeline on the 2-D toy set");
  auto* demo_spectra = app.add_subcommand("demo-spectra", "full pipeline on synthetic spectra");
  auto* init = app.add_subcommand("init-config", "write a preset config");
  for (auto* c : {train_clf, weights, train_gan, attack, baseline, demo_toy, demo_spectra}) {
    add_common(c, o);
  }
  train_gan->add_flag("--resume", resume, "continue from gan/checkpoint");
  init->add_option("--preset", preset, "toy or spectra")->check(CLI::IsMember({"toy", "spectra"}));
  init->add_option("path", config_path, "destination")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_config;
  }

  try {
    if (init->parsed()) {
      save_config(config_path, preset == "toy" ? toy_preset() : spectra_preset());
      std::printf("wrote %s\n", config_path.c_str());
    } else if (train_clf->parsed()) {
      const auto cfg = resolve(o, spectra_preset());
      const auto m = cmd_train_classifier(cfg);
      std::printf("overall accuracy %.4f, kappa %.4f\n", m.overall_accuracy, m.kappa);
    } else if (weights->parsed()) {
      const auto cfg = resolve(o, spectra_preset());
      const auto w = cmd_weights(cfg);
      std::printf("%s: %zu weights, entropy %.4f, max %.4g\n", cfg.weighting.label().c_str(),
                  w.size(), w.entropy(), w.max());
    } else if (train_gan->parsed()) {
      const auto cfg = resolve(o, spectra_preset());
      const auto trace = cmd_train_gan(cfg, resume);
      const auto& last = trace.records.back();
      std::printf("%zu generator steps; last d_loss %.5f g_loss %.5f penalty %.5f\n", trace.size(),
                  last.d_loss, last.g_loss, last.penalty);
    } else if (attack->parsed()) {
      print_attack(cmd_attack(resolve(o, spectra_preset())));
    } else if (baseline->parsed()) {
      const auto r = cmd_baseline(resolve(o, spectra_preset()));
      std::printf("simplified baseline: %zu/%zu restarts succeeded, %zu queries, %.4f per query\n",
                  r.successes, r.restarts, r.queries, r.adversarial_per_query);
    } else if (demo_toy->parsed()) {
      const auto r = cmd_demo_toy(resolve(o, toy_preset()));
      std::printf("classifier accuracy %.4f, target error %.4f\n", r.classifier_accuracy,
                  r.target_error);
      std::printf("uniform: ");
      print_attack(r.uniform);
      std::printf("soft w=%g: ", r.soft_temperature);
      print_attack(r.soft);
      std::printf("baseline: %.4f per query vs soft generator %.4f\n",
                  r.baseline.adversarial_per_query, r.soft_equal_budget);
    } else if (demo_spectra->parsed()) {
      for (const auto& row : cmd_demo_spectra(resolve(o, spectra_preset()))) {
        std::printf("%-16s ", row.name.c_str());
        print_attack(row.attack);
      }
    }
  } catch (const config_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return exit_config;
  } catch (const missing_artifact& e) {
    std::fprintf(stderr, "missing artifact: %s\n", e.what());
    return exit_missing;
  } catch (const training_diverged& e) {
    std::fprintf(stderr, "training diverged: %s\n", e.what());
    return exit_runtime;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_runtime;
  }
  return exit_ok;
}

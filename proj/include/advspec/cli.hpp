#pragma once

// Pipeline configuration, artifact-producing commands and SVG figures used
// by the advspec tool.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "advspec/attack.hpp"
#include "advspec/classifier.hpp"
#include "advspec/datasets.hpp"
#include "advspec/gan.hpp"
#include "advspec/serialize.hpp"
#include "advspec/weighting.hpp"

namespace advspec::cli {

enum ExitCode : int { exit_ok = 0, exit_config = 1, exit_runtime = 2, exit_missing = 3 };

class config_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class missing_artifact : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DatasetSection {
  std::string source = "synthetic";  // csv | toy2d | synthetic
  std::string csv_path;
  std::vector<std::string> class_names;  // csv only
  std::size_t bands = 48;                // csv and synthetic
  std::size_t toy_points = 2000;
  double toy_flip_rate = 0.2;
  std::size_t per_class = 400;  // synthetic, before count scaling
  double train_fraction = 0.5;

  bool operator==(const DatasetSection&) const = default;
};

struct AttackSection {
  int target_class = 0;
  std::size_t runs = 10;
  std::size_t per_run = 256;
  std::size_t baseline_restarts = 50;
  std::size_t baseline_iters = 20;
  double baseline_step = 0.5;

  bool operator==(const AttackSection&) const = default;
};

// Every stream derives from `seed`; see Seeds. gan.seed and
// gan.checkpoint_dir are filled in at run time and not serialized.
struct PipelineConfig {
  std::uint64_t seed = 1;
  DatasetSection dataset;
  ClassifierTraining classifier;
  WeightingScheme weighting = WeightingScheme::soft(20.0);
  TrainConfig gan;
  AttackSection attack;
  std::string output_dir = "advspec_out";

  // Throws config_error naming the field path.
  void validate() const;
  bool is_toy() const { return dataset.source == "toy2d"; }

  bool operator==(const PipelineConfig& o) const;
};

// Defaults used by demo-toy and demo-spectra.
PipelineConfig toy_preset();
PipelineConfig spectra_preset();

Json to_json(const PipelineConfig& cfg);
// Unknown keys and type mismatches throw config_error with the field path.
PipelineConfig pipeline_config_from_json(const Json& j);
PipelineConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const PipelineConfig& cfg);

struct Seeds {
  std::uint64_t data, split, classifier_init, classifier_shuffle, generator_init, critic_init,
      gan, attack, baseline, figures;
};
Seeds derive_seeds(std::uint64_t seed);

// Artifact locations under the output directory.
struct Layout {
  std::filesystem::path root;

  std::filesystem::path config() const { return root / "config.json"; }
  std::filesystem::path classifier() const { return root / "classifier.bin"; }
  std::filesystem::path metrics() const { return root / "metrics.json"; }
  std::filesystem::path weights_csv() const { return root / "weights.csv"; }
  std::filesystem::path weights_json() const { return root / "weights.json"; }
  std::filesystem::path weights_svg() const { return root / "weights.svg"; }
  std::filesystem::path gan_dir() const { return root / "gan"; }
  std::filesystem::path generator() const { return gan_dir() / "generator.bin"; }
  std::filesystem::path critic() const { return gan_dir() / "critic.bin"; }
  std::filesystem::path trace() const { return gan_dir() / "trace.csv"; }
  std::filesystem::path checkpoint() const { return gan_dir() / "checkpoint"; }
  std::filesystem::path attack() const { return root / "attack.json"; }
  std::filesystem::path spectra_svg() const { return root / "spectra.svg"; }
  std::filesystem::path spectral_stats() const { return root / "spectral_stats.csv"; }
  std::filesystem::path substitution() const { return root / "substitution.csv"; }
  std::filesystem::path baseline() const { return root / "baseline.json"; }
};

struct PipelineData {
  SpectraDataset all;
  Split split;
  std::optional<Line> toy_boundary;
};

PipelineData load_pipeline_data(const PipelineConfig& cfg);
ModelConfig classifier_model_config(const PipelineConfig& cfg, const SpectraDataset& data);
ModelConfig generator_model_config(const PipelineConfig& cfg, std::size_t bands);
ModelConfig critic_model_config(const PipelineConfig& cfg, std::size_t bands);

// Each command reads its inputs from and writes its artifacts to
// cfg.output_dir. A missing input artifact throws missing_artifact.
ClassificationMetrics cmd_train_classifier(const PipelineConfig& cfg);
SampleWeights cmd_weights(const PipelineConfig& cfg);
LossTrace cmd_train_gan(const PipelineConfig& cfg, bool resume = false);
AttackReport cmd_attack(const PipelineConfig& cfg);
BaselineReport cmd_baseline(const PipelineConfig& cfg);

struct ToyDemoReport {
  double classifier_accuracy = 0.0;
  double target_error = 0.0;  // 1 - accuracy on the target class
  AttackReport uniform;
  AttackReport soft;
  double soft_temperature = 15.0;
  BaselineReport baseline;      // on the uniform generator
  double soft_equal_budget = 0.0;  // soft generator success over baseline.queries samples
};

// Toy pipeline: classifier, the six weighting figures, uniform and soft
// generators, their attacks and the baseline. Wall-clock timing goes to
// timing.json only.
ToyDemoReport cmd_demo_toy(const PipelineConfig& cfg);

struct TrendRow {
  int target_class = 0;
  std::string name;
  double classifier_accuracy = 0.0;
  AttackReport attack;
};

// Synthetic spectra pipeline: one soft-weighted generator per target class
// (the recipe's three attack targets) and the trend table.
std::vector<TrendRow> cmd_demo_spectra(const PipelineConfig& cfg);

// Figures.
struct CurveGroup {
  std::string label;
  std::vector<double> mean;
  std::vector<double> std;
  std::string color;
};

// Solid mean and dotted mean +- std per group, each group in its own
// <g class="curve">.
std::string spectra_svg(const std::vector<CurveGroup>& groups, const std::string& title);

// Points with radius and opacity proportional to weight / max weight, and
// the decision line when given.
std::string weights_svg(const Matrix& points, const SampleWeights& weights,
                        const std::optional<Line>& decision, const std::string& title);

inline constexpr double kWeightRadius = 6.0;

// Decision line of a two-class linear softmax model, if it is one.
std::optional<Line> linear_decision_line(const Model& classifier);

void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const Json& j);
Json read_json(const std::filesystem::path& path);

Json to_json(const ClassificationMetrics& m, const std::vector<std::string>& class_names);
Json to_json(const AttackReport& r);
Json to_json(const BaselineReport& r);

}  // namespace advspec::cli

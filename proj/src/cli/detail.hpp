#pragma once

// Pipeline steps shared by the single commands and the demos.

#include "advspec/cli.hpp"

namespace advspec::cli::detail {

ClassificationMetrics train_and_save_classifier(const PipelineConfig& cfg, const PipelineData& d,
                                                const Layout& l);

struct WeightedTarget {
  SpectraDataset samples;
  PredictionScores scores;
  SampleWeights weights;
};

WeightedTarget weigh_target(const BlackBoxClassifier& clf, const PipelineData& d, int target,
                            const WeightingScheme& scheme);

void write_weights(const WeightedTarget& t, const WeightingScheme& scheme,
                   const std::optional<Line>& line, const std::filesystem::path& csv,
                   const std::filesystem::path& json, const std::filesystem::path& svg);

// Trains (or resumes) into dir: generator.bin, critic.bin, trace.csv and
// checkpoint/.
LossTrace train_and_save_gan(const PipelineConfig& cfg, const Matrix& data,
                             const SampleWeights& weights, const std::filesystem::path& dir,
                             bool resume);

// attack.json, spectra.svg, spectral_stats.csv and substitution.csv under out.
AttackReport attack_and_report(const PipelineConfig& cfg, const PipelineData& d,
                               const Model& classifier_model, const Model& generator, int target,
                               const Layout& out);

}  // namespace advspec::cli::detail

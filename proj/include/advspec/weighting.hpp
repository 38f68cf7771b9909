#pragma once

// Reweighted empirical distribution over dataset samples, derived from a
// black-box classifier's predicted probability of each sample's true class.

#include <filesystem>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "advspec/classifier.hpp"
#include "advspec/common.hpp"

namespace advspec {

struct WeightingScheme {
  enum class Kind { uniform, hard, soft };
  Kind kind = Kind::soft;
  double temperature = 20.0;  // soft only

  static WeightingScheme uniform() { return {Kind::uniform, 0.0}; }
  static WeightingScheme hard() { return {Kind::hard, 0.0}; }
  static WeightingScheme soft(double w);

  // "uniform", "hard" or "soft"; temperature applies to soft.
  static WeightingScheme parse(const std::string& name, double temperature);
  std::string name() const;
  // Short label for file names, e.g. "soft_w15".
  std::string label() const;

  bool operator==(const WeightingScheme&) const = default;
};

// c[i]: probability the classifier assigns to sample i's true class.
struct PredictionScores {
  std::vector<double> c;

  std::size_t size() const { return c.size(); }
  // s[i] = 1 - c[i]
  std::vector<double> s() const;
};

class no_misclassified_data : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Queries the classifier once on all samples. Rows of the prediction must
// sum to 1 within 1e-6.
PredictionScores collect_scores(const BlackBoxClassifier& classifier, const Matrix& samples,
                                std::span<const int> labels);

template <PredictOnlyClassifier C>
PredictionScores collect_scores(const C& classifier, const Matrix& samples,
                                std::span<const int> labels) {
  return collect_scores(static_cast<const BlackBoxClassifier&>(PredictAdapter<C>(classifier)),
                        samples, labels);
}

struct SampleWeights {
  std::vector<double> p;

  std::size_t size() const { return p.size(); }
  // Nonnegative, finite, sums to 1 within 1e-9.
  void validate() const;
  double entropy() const;
  double max() const;
};

// Uniform: 1/N. Hard: round-half-up(1 - c), renormalized; throws
// no_misclassified_data when every weight is 0. Soft: softmax of w * s over
// samples, shifted by max s.
SampleWeights compute_weights(const WeightingScheme& scheme, const PredictionScores& scores);

// I.i.d. categorical draws with replacement.
class WeightedSampler {
 public:
  explicit WeightedSampler(const SampleWeights& weights);
  std::vector<std::size_t> sample(std::size_t batch, Rng& rng) const;

 private:
  mutable std::discrete_distribution<std::size_t> dist_;
};

std::vector<std::size_t> weighted_sample(const SampleWeights& weights, std::size_t batch,
                                         Rng& rng);

// index,score,weight with score = 1 - c.
void write_weights_csv(const std::filesystem::path& path, const PredictionScores& scores,
                       const SampleWeights& weights);

struct WeightsTable {
  PredictionScores scores;
  SampleWeights weights;
};

// Inverse of write_weights_csv. Errors name the 1-based line.
WeightsTable read_weights_csv(const std::filesystem::path& path);

}  // namespace advspec

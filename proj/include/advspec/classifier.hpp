#pragma once

// Black-box classifier boundary, classifier training and evaluation metrics.

#include <concepts>
#include <cstdint>
#include <memory>
#include <vector>

#include "advspec/common.hpp"
#include "advspec/datasets.hpp"
#include "advspec/nn.hpp"

namespace advspec {

// All attack and weighting code sees a classifier through this interface.
// predict maps N samples (one per row) to an N x K matrix of class
// probabilities; nothing else is exposed.
class BlackBoxClassifier {
 public:
  virtual ~BlackBoxClassifier() = default;
  virtual Matrix predict(const Matrix& samples) const = 0;
};

template <class C>
concept PredictOnlyClassifier = requires(const C& c, const Matrix& m) {
  { c.predict(m) } -> std::same_as<Matrix>;
};

static_assert(PredictOnlyClassifier<BlackBoxClassifier>);

// Wraps a trained model. Inference runs with gradient recording disabled
// and returns plain values.
class ModelClassifier final : public BlackBoxClassifier {
 public:
  explicit ModelClassifier(Model model);
  Matrix predict(const Matrix& samples) const override;
  std::size_t num_classes() const;

 private:
  Model model_;
};

// Adapts any predict-only object to the virtual interface.
template <PredictOnlyClassifier C>
class PredictAdapter final : public BlackBoxClassifier {
 public:
  explicit PredictAdapter(const C& inner) : inner_(&inner) {}
  Matrix predict(const Matrix& samples) const override { return inner_->predict(samples); }

 private:
  const C* inner_;
};

struct ClassifierTraining {
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  AdamOptions adam = AdamOptions::classifier();
  std::uint64_t seed = 7;
};

// Minibatch Adam on cross entropy. Returns the mean training loss of each
// epoch.
std::vector<double> train_classifier(Model& model, const SpectraDataset& train,
                                     const ClassifierTraining& options);

std::vector<int> predict_labels(const BlackBoxClassifier& classifier, const Matrix& samples);

struct ClassificationMetrics {
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  double overall_accuracy = 0.0;
  std::vector<double> per_class_accuracy;  // recall; NaN for absent classes
  double kappa = 0.0;
};

ClassificationMetrics confusion_metrics(std::vector<std::vector<std::size_t>> confusion);
ClassificationMetrics evaluate(const BlackBoxClassifier& classifier, const SpectraDataset& data);

}  // namespace advspec

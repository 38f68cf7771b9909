#include "advspec/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace advspec {

ModelClassifier::ModelClassifier(Model model) : model_(std::move(model)) {}

Matrix ModelClassifier::predict(const Matrix& samples) const {
  NoGradGuard no_grad;
  return as_matrix(model_.forward(as_batch(samples, model_.input_shape())));
}

std::size_t ModelClassifier::num_classes() const { return shape_numel(model_.output_shape()); }

std::vector<double> train_classifier(Model& model, const SpectraDataset& train,
                                     const ClassifierTraining& options) {
  train.validate(false);
  if (options.batch_size == 0) throw std::invalid_argument("batch size must be positive");
  Rng rng(options.seed);
  AdamState state(options.adam);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> losses;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      std::vector<int> labels;
      for (auto i : idx) labels.push_back(train.y[i]);
      Tensor x = as_batch(train.X.select_rows(idx), model.input_shape());
      Tensor loss = cross_entropy(model.forward(x), labels);
      auto g = grad(loss, model.parameters());
      adam_step(model.parameters(), g, state);
      total += loss.item();
      ++batches;
    }
    losses.push_back(total / static_cast<double>(batches));
  }
  return losses;
}

std::vector<int> predict_labels(const BlackBoxClassifier& classifier, const Matrix& samples) {
  const Matrix p = classifier.predict(samples);
  std::vector<int> out(p.rows);
  for (std::size_t r = 0; r < p.rows; ++r) out[r] = static_cast<int>(p.argmax(r));
  return out;
}

ClassificationMetrics confusion_metrics(std::vector<std::vector<std::size_t>> confusion) {
  const std::size_t k = confusion.size();
  ClassificationMetrics m;
  double total = 0.0;
  double agree = 0.0;
  std::vector<double> row(k, 0.0);
  std::vector<double> col(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    if (confusion[i].size() != k) throw std::invalid_argument("confusion matrix must be square");
    for (std::size_t j = 0; j < k; ++j) {
      const auto c = static_cast<double>(confusion[i][j]);
      total += c;
      row[i] += c;
      col[j] += c;
      if (i == j) agree += c;
    }
  }
  if (total == 0.0) throw std::invalid_argument("empty confusion matrix");
  m.overall_accuracy = agree / total;
  for (std::size_t i = 0; i < k; ++i) {
    m.per_class_accuracy.push_back(row[i] > 0.0 ? static_cast<double>(confusion[i][i]) / row[i]
                                                : std::numeric_limits<double>::quiet_NaN());
  }
  double chance = 0.0;
  for (std::size_t i = 0; i < k; ++i) chance += row[i] * col[i];
  chance /= total * total;
  m.kappa = chance < 1.0 ? (m.overall_accuracy - chance) / (1.0 - chance) : 1.0;
  m.confusion = std::move(confusion);
  return m;
}

ClassificationMetrics evaluate(const BlackBoxClassifier& classifier, const SpectraDataset& data) {
  const auto pred = predict_labels(classifier, data.X);
  const std::size_t k = data.num_classes();
  std::vector<std::vector<std::size_t>> confusion(k, std::vector<std::size_t>(k, 0));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < 0 || static_cast<std::size_t>(pred[i]) >= k) {
      throw std::out_of_range("classifier predicted class " + std::to_string(pred[i]) +
                              " outside the dataset's " + std::to_string(k) + " classes");
    }
    confusion[static_cast<std::size_t>(data.y[i])][static_cast<std::size_t>(pred[i])] += 1;
  }
  return confusion_metrics(std::move(confusion));
}

}  // namespace advspec

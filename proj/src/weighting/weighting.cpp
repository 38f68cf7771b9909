#include "advspec/weighting.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace advspec {

WeightingScheme WeightingScheme::soft(double w) {
  if (!(w >= 0.0) || !std::isfinite(w)) {
    throw std::invalid_argument("soft temperature must be a finite value >= 0, got " +
                                std::to_string(w));
  }
  return {Kind::soft, w};
}

WeightingScheme WeightingScheme::parse(const std::string& name, double temperature) {
  if (name == "uniform") return uniform();
  if (name == "hard") return hard();
  if (name == "soft") return soft(temperature);
  throw std::invalid_argument("unknown weighting scheme '" + name +
                              "' (expected uniform, hard or soft)");
}

std::string WeightingScheme::name() const {
  switch (kind) {
    case Kind::uniform: return "uniform";
    case Kind::hard: return "hard";
    case Kind::soft: return "soft";
  }
  return "?";
}

std::string WeightingScheme::label() const {
  if (kind != Kind::soft) return name();
  std::ostringstream out;
  out << "soft_w" << temperature;
  return out.str();
}

std::vector<double> PredictionScores::s() const {
  std::vector<double> out(c.size());
  std::transform(c.begin(), c.end(), out.begin(), [](double v) { return 1.0 - v; });
  return out;
}

PredictionScores collect_scores(const BlackBoxClassifier& classifier, const Matrix& samples,
                                std::span<const int> labels) {
  if (labels.size() != samples.rows) {
    throw std::invalid_argument("collect_scores: " + std::to_string(samples.rows) +
                                " samples but " + std::to_string(labels.size()) + " labels");
  }
  const Matrix p = classifier.predict(samples);
  if (p.rows != samples.rows) {
    throw std::runtime_error("classifier returned " + std::to_string(p.rows) + " rows for " +
                             std::to_string(samples.rows) + " samples");
  }
  PredictionScores scores;
  scores.c.resize(p.rows);
  for (std::size_t r = 0; r < p.rows; ++r) {
    double total = 0.0;
    for (std::size_t k = 0; k < p.cols; ++k) {
      const double v = p(r, k);
      if (!(v >= 0.0)) {
        throw std::runtime_error("prediction row " + std::to_string(r) +
                                 " has a negative or NaN entry");
      }
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-6) {
      throw std::runtime_error("prediction row " + std::to_string(r) + " sums to " +
                               std::to_string(total) + ", not a distribution");
    }
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= p.cols) {
      throw std::out_of_range("label " + std::to_string(labels[r]) + " at row " +
                              std::to_string(r) + " outside the classifier's " +
                              std::to_string(p.cols) + " classes");
    }
    scores.c[r] = std::clamp(p(r, static_cast<std::size_t>(labels[r])), 0.0, 1.0);
  }
  return scores;
}

void SampleWeights::validate() const {
  if (p.empty()) throw std::invalid_argument("weights are empty");
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!std::isfinite(p[i]) || p[i] < 0.0) {
      throw std::invalid_argument("weight " + std::to_string(i) + " is " + std::to_string(p[i]));
    }
    total += p[i];
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("weights sum to " + std::to_string(total));
  }
}

double SampleWeights::entropy() const {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

double SampleWeights::max() const { return *std::max_element(p.begin(), p.end()); }

SampleWeights compute_weights(const WeightingScheme& scheme, const PredictionScores& scores) {
  const std::size_t n = scores.size();
  if (n == 0) throw std::invalid_argument("compute_weights needs at least one sample");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(scores.c[i] >= 0.0 && scores.c[i] <= 1.0)) {
      throw std::invalid_argument("score c[" + std::to_string(i) + "] = " +
                                  std::to_string(scores.c[i]) + " outside [0, 1]");
    }
  }
  SampleWeights w;
  w.p.assign(n, 0.0);
  switch (scheme.kind) {
    case WeightingScheme::Kind::uniform:
      std::fill(w.p.begin(), w.p.end(), 1.0 / static_cast<double>(n));
      break;
    case WeightingScheme::Kind::hard: {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        w.p[i] = std::floor(1.0 - scores.c[i] + 0.5);
        total += w.p[i];
      }
      if (total == 0.0) {
        throw no_misclassified_data(
            "hard weighting: no misclassified data (every sample has c > 0.5)");
      }
      for (double& v : w.p) v /= total;
      break;
    }
    case WeightingScheme::Kind::soft: {
      if (!(scheme.temperature >= 0.0)) {
        throw std::invalid_argument("soft temperature must be >= 0");
      }
      const auto s = scores.s();
      const double s_max = *std::max_element(s.begin(), s.end());
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        w.p[i] = std::exp(scheme.temperature * (s[i] - s_max));
        total += w.p[i];
      }
      for (double& v : w.p) v /= total;
      break;
    }
  }
  return w;
}

WeightedSampler::WeightedSampler(const SampleWeights& weights) {
  for (std::size_t i = 0; i < weights.p.size(); ++i) {
    if (std::isnan(weights.p[i])) {
      throw std::invalid_argument("weight " + std::to_string(i) + " is NaN");
    }
  }
  weights.validate();
  dist_ = std::discrete_distribution<std::size_t>(weights.p.begin(), weights.p.end());
}

std::vector<std::size_t> WeightedSampler::sample(std::size_t batch, Rng& rng) const {
  if (batch == 0) throw std::invalid_argument("batch size must be >= 1");
  std::vector<std::size_t> out(batch);
  for (auto& i : out) i = dist_(rng.engine());
  return out;
}

std::vector<std::size_t> weighted_sample(const SampleWeights& weights, std::size_t batch,
                                         Rng& rng) {
  return WeightedSampler(weights).sample(batch, rng);
}

void write_weights_csv(const std::filesystem::path& path, const PredictionScores& scores,
                       const SampleWeights& weights) {
  if (scores.size() != weights.size()) {
    throw std::invalid_argument("scores and weights differ in length");
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "index,score,weight\n" << std::setprecision(17);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    out << i << ',' << 1.0 - scores.c[i] << ',' << weights.p[i] << '\n';
  }
}

WeightsTable read_weights_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "index,score,weight") {
    throw std::runtime_error(path.string() + ":1: unexpected header '" + line + "'");
  }
  WeightsTable t;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::size_t index = 0;
    double score = 0.0, weight = 0.0;
    char c1 = 0, c2 = 0;
    if (!(row >> index >> c1 >> score >> c2 >> weight) || c1 != ',' || c2 != ',' ||
        index != t.weights.size()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": malformed row");
    }
    t.scores.c.push_back(1.0 - score);
    t.weights.p.push_back(weight);
  }
  t.weights.validate();
  return t;
}

}  // namespace advspec

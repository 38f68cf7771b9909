#include <cmath>
#include <fstream>
#include <limits>
#include <type_traits>

#include "advspec/weighting.hpp"
#include "doctest.h"
#include "support/tempdir.hpp"

using namespace advspec;

namespace {

PredictionScores from_s(std::vector<double> s) {
  PredictionScores p;
  for (double v : s) p.c.push_back(1.0 - v);
  return p;
}

// Not derived from BlackBoxClassifier: only predict is available.
struct FixedRows {
  std::vector<double> row;
  Matrix predict(const Matrix& x) const {
    Matrix out(x.rows, row.size());
    for (std::size_t r = 0; r < x.rows; ++r) {
      for (std::size_t k = 0; k < row.size(); ++k) out(r, k) = row[k];
    }
    return out;
  }
};
static_assert(PredictOnlyClassifier<FixedRows>);
static_assert(!std::is_base_of_v<BlackBoxClassifier, FixedRows>);

// Predicts the class given by the sign of the first feature, with certainty.
struct SignOracle {
  Matrix predict(const Matrix& x) const {
    Matrix out(x.rows, 2);
    for (std::size_t r = 0; r < x.rows; ++r) out(r, x(r, 0) >= 0.0 ? 1 : 0) = 1.0;
    return out;
  }
};

}  // namespace

TEST_CASE("soft weights at w = 8 match direct evaluation") {
  auto w = compute_weights(WeightingScheme::soft(8.0), from_s({0.9, 0.1}));
  const double a = std::exp(8.0 * 0.9);
  const double b = std::exp(8.0 * 0.1);
  CHECK(std::abs(w.p[0] - a / (a + b)) < 1e-12);
  CHECK(std::abs(w.p[1] - b / (a + b)) < 1e-12);
  CHECK(std::abs(w.p[0] - 1.0 / (1.0 + std::exp(-6.4))) < 1e-12);
}

TEST_CASE("soft at w = 0 equals uniform exactly") {
  auto scores = from_s({0.0, 0.3, 0.99, 0.5, 0.5, 0.1, 1.0});
  auto soft = compute_weights(WeightingScheme::soft(0.0), scores);
  auto uni = compute_weights(WeightingScheme::uniform(), scores);
  CHECK(soft.p == uni.p);
  for (double v : uni.p) CHECK(v == 1.0 / 7.0);
  auto four = compute_weights(WeightingScheme::uniform(), from_s({0.1, 0.2, 0.3, 0.4}));
  CHECK(four.p == std::vector<double>{0.25, 0.25, 0.25, 0.25});
}

TEST_CASE("hard weights keep misclassified samples") {
  PredictionScores sc{{0.3, 0.6, 0.8}};
  CHECK(compute_weights(WeightingScheme::hard(), sc).p == std::vector<double>{1.0, 0.0, 0.0});

  // c = 0.5 rounds 1 - c = 0.5 up
  PredictionScores tie{{0.5, 0.9}};
  CHECK(compute_weights(WeightingScheme::hard(), tie).p == std::vector<double>{1.0, 0.0});

  PredictionScores two{{0.1, 0.2, 0.9, 0.95}};
  CHECK(compute_weights(WeightingScheme::hard(), two).p == std::vector<double>{0.5, 0.5, 0.0, 0.0});

  PredictionScores perfect{{0.9, 1.0, 0.51}};
  CHECK_THROWS_AS(compute_weights(WeightingScheme::hard(), perfect), no_misclassified_data);
}

TEST_CASE("soft weights are monotone in s and sharpen with w") {
  auto scores = from_s({0.05, 0.2, 0.4, 0.41, 0.7, 0.95});
  for (double w : {1.0, 5.0, 15.0, 40.0}) {
    auto p = compute_weights(WeightingScheme::soft(w), scores);
    CHECK_NOTHROW(p.validate());
    for (std::size_t i = 1; i < p.size(); ++i) CHECK(p.p[i] > p.p[i - 1]);
  }
  auto w5 = compute_weights(WeightingScheme::soft(5.0), scores);
  auto w15 = compute_weights(WeightingScheme::soft(15.0), scores);
  CHECK(w15.entropy() < w5.entropy());
  CHECK(w15.max() > w5.max());
}

TEST_CASE("soft weights are invariant to shifting all scores") {
  Rng rng(4);
  std::vector<double> s(50);
  for (auto& v : s) v = rng.uniform(0.0, 0.6);
  auto base = compute_weights(WeightingScheme::soft(12.0), from_s(s));
  for (double shift : {0.1, 0.25, 0.4}) {
    std::vector<double> moved = s;
    for (auto& v : moved) v += shift;
    auto p = compute_weights(WeightingScheme::soft(12.0), from_s(moved));
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(std::abs(p.p[i] - base.p[i]) < 1e-12);
  }
}

TEST_CASE("large temperatures stay finite") {
  auto p = compute_weights(WeightingScheme::soft(1e6), from_s({0.0, 1.0, 0.999}));
  CHECK_NOTHROW(p.validate());
  CHECK(p.p[1] == 1.0);
}

TEST_CASE("invalid scores and temperatures are rejected") {
  CHECK_THROWS(compute_weights(WeightingScheme::soft(1.0), PredictionScores{{0.5, 1.5}}));
  CHECK_THROWS(compute_weights(WeightingScheme::soft(1.0),
                               PredictionScores{{std::numeric_limits<double>::quiet_NaN()}}));
  CHECK_THROWS(compute_weights(WeightingScheme::uniform(), PredictionScores{}));
  CHECK_THROWS(WeightingScheme::soft(-1.0));
  CHECK_THROWS(WeightingScheme::parse("sharp", 1.0));
  CHECK(WeightingScheme::parse("soft", 15.0).label() == "soft_w15");
  CHECK(WeightingScheme::parse("hard", 15.0) == WeightingScheme::hard());
}

TEST_CASE("sampler frequencies agree with the weights") {
  SampleWeights w{{0.1, 0.2, 0.3, 0.4}};
  WeightedSampler sampler(w);
  Rng rng(9);
  const std::size_t n = 100000;
  std::vector<std::size_t> counts(4, 0);
  for (std::size_t i : sampler.sample(n, rng)) ++counts[i];
  for (std::size_t k = 0; k < 4; ++k) {
    const double sigma = std::sqrt(n * w.p[k] * (1.0 - w.p[k]));
    CHECK(std::abs(static_cast<double>(counts[k]) - n * w.p[k]) < 3.0 * sigma);
  }
}

TEST_CASE("sampler point mass, determinism and invalid weights") {
  SampleWeights point{{0.0, 0.0, 1.0}};
  Rng rng(1);
  for (std::size_t i : weighted_sample(point, 500, rng)) CHECK(i == 2);

  SampleWeights w{{0.5, 0.25, 0.25}};
  Rng a(77), b(77);
  CHECK(weighted_sample(w, 64, a) == weighted_sample(w, 64, b));

  CHECK_THROWS(WeightedSampler(SampleWeights{{0.5, std::numeric_limits<double>::quiet_NaN()}}));
  CHECK_THROWS(WeightedSampler(SampleWeights{{0.5, 0.4}}));
  CHECK_THROWS(WeightedSampler(SampleWeights{{1.5, -0.5}}));
  CHECK_THROWS(WeightedSampler(SampleWeights{}));
  WeightedSampler s(w);
  CHECK_THROWS(s.sample(0, rng));
}

TEST_CASE("scores from a predict-only classifier") {
  Matrix x(4, 1);
  x.values = {-1.0, 2.0, -3.0, 0.5};
  const std::vector<int> labels = {0, 1, 1, 0};

  SignOracle oracle;
  auto sc = collect_scores(oracle, x, labels);
  CHECK(sc.c == std::vector<double>{1.0, 1.0, 0.0, 0.0});
  auto hard = compute_weights(WeightingScheme::hard(), sc);
  CHECK(hard.p == std::vector<double>{0.0, 0.0, 0.5, 0.5});

  FixedRows flat{{0.5, 0.5}};
  auto u = collect_scores(flat, x, labels);
  auto soft = compute_weights(WeightingScheme::soft(20.0), u);
  for (double v : soft.p) CHECK(v == 0.25);

  FixedRows all_right{{0.0, 1.0}};
  auto perfect = collect_scores(all_right, x, std::vector<int>{1, 1, 1, 1});
  CHECK_THROWS_AS(compute_weights(WeightingScheme::hard(), perfect), no_misclassified_data);

  FixedRows broken{{0.5, 0.4}};
  CHECK_THROWS(collect_scores(broken, x, labels));
  CHECK_THROWS(collect_scores(flat, x, std::vector<int>{0, 1}));
  CHECK_THROWS(collect_scores(flat, x, std::vector<int>{0, 1, 2, 0}));
}

TEST_CASE("weights csv lists index, score and weight") {
  advspec::testing::TempDir dir("w");
  PredictionScores sc{{0.25, 0.75}};
  auto w = compute_weights(WeightingScheme::hard(), sc);
  write_weights_csv(dir / "w.csv", sc, w);
  std::ifstream in(dir / "w.csv");
  std::string header, l0, l1;
  std::getline(in, header);
  std::getline(in, l0);
  std::getline(in, l1);
  CHECK(header == "index,score,weight");
  CHECK(l0 == "0,0.75,1");
  CHECK(l1 == "1,0.25,0");
}

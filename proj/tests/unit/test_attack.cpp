#include <cmath>
#include <limits>
#include <type_traits>

#include "advspec/attack.hpp"
#include "doctest.h"

using namespace advspec;

namespace {

// Always assigns all mass to one class. Only predict is exposed.
struct ConstantClassifier {
  std::size_t classes = 3;
  std::size_t answer = 0;
  Matrix predict(const Matrix& x) const {
    Matrix out(x.rows, classes);
    for (std::size_t r = 0; r < x.rows; ++r) out(r, answer) = 1.0;
    return out;
  }
};
static_assert(PredictOnlyClassifier<ConstantClassifier>);
static_assert(!std::is_base_of_v<BlackBoxClassifier, ConstantClassifier>);

// Class 1 when the first feature exceeds a threshold.
struct ThresholdClassifier {
  double threshold = 0.5;
  Matrix predict(const Matrix& x) const {
    Matrix out(x.rows, 2);
    for (std::size_t r = 0; r < x.rows; ++r) {
      const double p = 1.0 / (1.0 + std::exp(-20.0 * (x(r, 0) - threshold)));
      out(r, 0) = 1.0 - p;
      out(r, 1) = p;
    }
    return out;
  }
};

Model small_generator() { return build_generator(default_generator_config(8, 4)); }

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (auto& v : m.values) v = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("success rate is 0 or 1 for constant predictions") {
  Model g = small_generator();
  auto never = success_rate(g, ConstantClassifier{3, 1}, 1, 4, 16, 5);
  CHECK(never.mean == 0.0);
  CHECK(never.std == 0.0);
  auto always = success_rate(g, ConstantClassifier{3, 2}, 1, 4, 16, 5);
  CHECK(always.mean == 1.0);
  CHECK(always.runs == std::vector<double>(4, 1.0));
  CHECK(always.n_samples_per_run == 16);
  CHECK_THROWS(success_rate(g, ConstantClassifier{}, 0, 0, 16, 5));
}

TEST_CASE("success rate statistics agree with the runs") {
  Model g = small_generator();
  ThresholdClassifier clf{0.5};
  auto rep = success_rate(g, clf, 1, 7, 32, 11);
  REQUIRE(rep.runs.size() == 7);
  double mean = 0.0;
  for (double r : rep.runs) {
    CHECK(r >= 0.0);
    CHECK(r <= 1.0);
    mean += r / 7.0;
  }
  double var = 0.0;
  for (double r : rep.runs) var += (r - mean) * (r - mean) / 7.0;
  CHECK(std::abs(rep.mean - mean) < 1e-12);
  CHECK(std::abs(rep.std - std::sqrt(var)) < 1e-12);

  // run r only depends on seed + r
  auto shifted = success_rate(g, clf, 1, 6, 32, 12);
  for (std::size_t r = 0; r < 6; ++r) CHECK(shifted.runs[r] == rep.runs[r + 1]);
}

TEST_CASE("misclassified fraction counts argmax disagreements") {
  Matrix p(4, 3);
  p.values = {0.7, 0.2, 0.1, 0.1, 0.8, 0.1, 0.3, 0.3, 0.4, 0.5, 0.4, 0.1};
  CHECK(misclassified_fraction(p, 0) == 0.5);
  CHECK(misclassified_fraction(p, 1) == 0.75);
  CHECK(misclassified_fraction(Matrix(0, 3), 0) == 0.0);
}

TEST_CASE("nearest match agrees with exhaustive pairwise distances") {
  Rng rng(31);
  for (auto [ng, nr, b] : {std::tuple{20, 20, 48}, std::tuple{1, 5, 3}, std::tuple{300, 200, 48},
                          std::tuple{1000, 1000, 8}}) {
    Matrix gen = random_matrix(ng, b, rng);
    Matrix real = random_matrix(nr, b, rng);
    auto t = nearest_real_match(gen, real);
    for (std::size_t i = 0; i < real.rows; ++i) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t j = 0; j < gen.rows; ++j) {
        double d = 0.0;
        for (std::size_t k = 0; k < gen.cols; ++k) d += std::pow(real(i, k) - gen(j, k), 2);
        if (d < best) {
          best = d;
          arg = j;
        }
      }
      CHECK(t.index[i] == arg);
      CHECK(std::abs(t.distance[i] - std::sqrt(best)) < 1e-12);
    }
  }
}

TEST_CASE("nearest match edge cases") {
  Rng rng(2);
  Matrix gen = random_matrix(10, 4, rng);
  Matrix real = random_matrix(3, 4, rng);
  for (std::size_t k = 0; k < 4; ++k) real(1, k) = gen(6, k);
  auto t = nearest_real_match(gen, real);
  CHECK(t.index[1] == 6);
  CHECK(t.distance[1] == 0.0);

  Matrix one = gen.select_rows(std::vector<std::size_t>{2});
  auto all = nearest_real_match(one, real);
  CHECK(all.index == std::vector<std::size_t>{0, 0, 0});

  Matrix dup(2, 4, 1.0);
  Matrix q(1, 4, 0.0);
  CHECK(nearest_real_match(dup, q).index[0] == 0);

  CHECK_THROWS(nearest_real_match(gen, random_matrix(2, 5, rng)));
  CHECK_THROWS(nearest_real_match(Matrix(0, 4), real));
}

TEST_CASE("spectral statistics match the two-pass formula") {
  Rng rng(9);
  Matrix x = random_matrix(500, 48, rng);
  for (auto& v : x.values) v = 3.0 + 0.01 * v;
  auto s = spectral_stats(x);
  for (std::size_t b = 0; b < 48; ++b) {
    double mean = 0.0;
    for (std::size_t r = 0; r < 500; ++r) mean += x(r, b);
    mean /= 500.0;
    double var = 0.0;
    for (std::size_t r = 0; r < 500; ++r) var += (x(r, b) - mean) * (x(r, b) - mean);
    var /= 500.0;
    CHECK(std::abs(s.mean[b] - mean) < 1e-12);
    CHECK(std::abs(s.std[b] - std::sqrt(var)) < 1e-12);
    CHECK(s.std[b] >= 0.0);
  }

  Matrix single = x.select_rows(std::vector<std::size_t>{4});
  for (double v : spectral_stats(single).std) CHECK(v == 0.0);
  auto c = spectral_stats(Matrix(6, 3, 0.25));
  CHECK(c.mean == std::vector<double>(3, 0.25));
  CHECK(c.std == std::vector<double>(3, 0.0));
  CHECK_THROWS(spectral_stats(Matrix(0, 3)));
}

TEST_CASE("baseline with zero budget returns the initial sample") {
  Model g = small_generator();
  ThresholdClassifier clf{0.5};
  PredictAdapter<ThresholdClassifier> box(clf);
  Rng a(4), b(4);
  auto res = latent_search_baseline(g, box, 1, 0, 0.5, a);
  CHECK(res.iterations == 0);
  CHECK(res.queries == 1);
  Matrix first = generate(g, 1, LatentPrior::normal, b);
  CHECK(res.sample.values == first.values);
  CHECK(res.success == (static_cast<int>(clf.predict(first).argmax(0)) != 1));
}

TEST_CASE("baseline against input-independent classifiers") {
  Model g = small_generator();
  ConstantClassifier other{3, 2};
  PredictAdapter<ConstantClassifier> wrong(other);
  Rng rng(1);
  auto hit = latent_search_baseline(g, wrong, 0, 50, 0.5, rng);
  CHECK(hit.success);
  CHECK(hit.iterations == 0);
  CHECK(hit.queries == 1);

  ConstantClassifier same{3, 0};
  PredictAdapter<ConstantClassifier> right(same);
  auto miss = latent_search_baseline(g, right, 0, 50, 0.5, rng);
  CHECK(!miss.success);
  CHECK(miss.iterations == 50);
  CHECK(miss.queries == 51);

  auto rep = run_baseline(g, right, 0, 5, 10, 0.5, 3);
  CHECK(rep.successes == 0);
  CHECK(rep.no_adversarial_found == 5);
  CHECK(rep.queries == 55);
  CHECK(rep.success_rate == 0.0);
  CHECK(rep.iterations_histogram.empty());
}

TEST_CASE("baseline report accounting") {
  Model g = small_generator();
  ThresholdClassifier clf{0.45};
  PredictAdapter<ThresholdClassifier> box(clf);
  auto rep = run_baseline(g, box, 1, 12, 15, 0.8, 7);
  std::size_t hist = 0;
  for (auto [iters, count] : rep.iterations_histogram) {
    CHECK(iters <= 15);
    hist += count;
  }
  CHECK(hist == rep.successes);
  CHECK(rep.successes + rep.no_adversarial_found == 12);
  CHECK(rep.success_rate == static_cast<double>(rep.successes) / 12.0);
  CHECK(rep.adversarial_per_query ==
        static_cast<double>(rep.successes) / static_cast<double>(rep.queries));
  CHECK(rep.queries >= 12);
  CHECK(rep.queries <= 12 * 16);

  auto again = run_baseline(g, box, 1, 12, 15, 0.8, 7);
  CHECK(again.queries == rep.queries);
  CHECK(again.iterations_histogram == rep.iterations_histogram);
}

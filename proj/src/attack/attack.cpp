#include "advspec/attack.hpp"

#include <cmath>
#include <limits>

namespace advspec {

double misclassified_fraction(const Matrix& predictions, int target_class) {
  if (predictions.rows == 0) return 0.0;
  std::size_t wrong = 0;
  for (std::size_t r = 0; r < predictions.rows; ++r) {
    wrong += static_cast<int>(predictions.argmax(r)) != target_class;
  }
  return static_cast<double>(wrong) / static_cast<double>(predictions.rows);
}

AttackReport success_rate(const Model& generator, const BlackBoxClassifier& classifier,
                          int target_class, std::size_t n_runs, std::size_t n_per_run,
                          std::uint64_t seed, LatentPrior prior) {
  if (n_runs == 0 || n_per_run == 0) {
    throw std::invalid_argument("success_rate needs at least one run and one sample per run");
  }
  AttackReport report;
  report.target_class = target_class;
  report.n_samples_per_run = n_per_run;
  report.runs.assign(n_runs, 0.0);
  parallel_for(n_runs, [&](std::size_t r) {
    Rng rng(seed + r);
    const Matrix samples = generate(generator, n_per_run, prior, rng);
    report.runs[r] = misclassified_fraction(classifier.predict(samples), target_class);
  });
  double total = 0.0;
  for (double v : report.runs) total += v;
  report.mean = total / static_cast<double>(n_runs);
  double var = 0.0;
  for (double v : report.runs) var += (v - report.mean) * (v - report.mean);
  report.std = std::sqrt(var / static_cast<double>(n_runs));
  return report;
}

MatchTable nearest_real_match(const Matrix& generated, const Matrix& real) {
  if (generated.rows == 0 || real.rows == 0) {
    throw std::invalid_argument("nearest_real_match needs nonempty sets");
  }
  if (generated.cols != real.cols) {
    throw std::invalid_argument("band mismatch: generated has " + std::to_string(generated.cols) +
                                ", real has " + std::to_string(real.cols));
  }
  MatchTable t;
  t.index.resize(real.rows);
  t.distance.resize(real.rows);
  const std::size_t bands = real.cols;
  for (std::size_t i = 0; i < real.rows; ++i) {
    const auto x = real.row(i);
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_j = 0;
    for (std::size_t j = 0; j < generated.rows; ++j) {
      const auto g = generated.row(j);
      double d = 0.0;
      // early abort on the partial distance
      for (std::size_t b = 0; b < bands && d < best; ++b) {
        const double diff = x[b] - g[b];
        d += diff * diff;
      }
      if (d < best) {
        best = d;
        best_j = j;
      }
    }
    t.index[i] = best_j;
    t.distance[i] = std::sqrt(best);
  }
  return t;
}

SpectralStats spectral_stats(const Matrix& samples) {
  if (samples.rows == 0) throw std::invalid_argument("spectral_stats needs at least one sample");
  SpectralStats s;
  s.mean.assign(samples.cols, 0.0);
  std::vector<double> m2(samples.cols, 0.0);
  for (std::size_t r = 0; r < samples.rows; ++r) {
    const double n = static_cast<double>(r + 1);
    for (std::size_t b = 0; b < samples.cols; ++b) {
      const double x = samples(r, b);
      const double delta = x - s.mean[b];
      s.mean[b] += delta / n;
      m2[b] += delta * (x - s.mean[b]);
    }
  }
  s.std.resize(samples.cols);
  for (std::size_t b = 0; b < samples.cols; ++b) {
    s.std[b] = std::sqrt(std::max(0.0, m2[b] / static_cast<double>(samples.rows)));
  }
  return s;
}

namespace {

Matrix decode(const Model& generator, const std::vector<double>& z) {
  NoGradGuard no_grad;
  return as_matrix(generator.forward(Tensor::from({1, z.size()}, z)));
}

}  // namespace

BaselineResult latent_search_baseline(const Model& generator,
                                      const BlackBoxClassifier& classifier, int target_class,
                                      std::size_t iters, double step, Rng& rng,
                                      LatentPrior prior) {
  const std::size_t d = generator.input_shape().at(0);
  const auto t = static_cast<std::size_t>(target_class);
  Tensor z0 = sample_latent(1, d, prior, rng);
  std::vector<double> z(z0.data().begin(), z0.data().end());

  BaselineResult res;
  res.sample = decode(generator, z);
  Matrix p = classifier.predict(res.sample);
  res.queries = 1;
  res.success = static_cast<int>(p.argmax(0)) != target_class;
  double confidence = p(0, t);
  for (std::size_t i = 1; i <= iters && !res.success; ++i) {
    std::vector<double> candidate = z;
    for (auto& v : candidate) v += step * rng.normal();
    Matrix x = decode(generator, candidate);
    Matrix q = classifier.predict(x);
    res.queries += 1;
    res.iterations = i;
    if (q(0, t) < confidence) {
      z = std::move(candidate);
      confidence = q(0, t);
      res.sample = std::move(x);
      res.success = static_cast<int>(q.argmax(0)) != target_class;
    }
  }
  return res;
}

BaselineReport run_baseline(const Model& generator, const BlackBoxClassifier& classifier,
                            int target_class, std::size_t restarts, std::size_t iters,
                            double step, std::uint64_t seed, LatentPrior prior) {
  if (restarts == 0) throw std::invalid_argument("baseline needs at least one restart");
  std::vector<BaselineResult> results(restarts);
  parallel_for(restarts, [&](std::size_t r) {
    Rng rng(seed + r);
    results[r] = latent_search_baseline(generator, classifier, target_class, iters, step, rng, prior);
  });
  BaselineReport rep;
  rep.target_class = target_class;
  rep.restarts = restarts;
  rep.iters = iters;
  rep.step = step;
  for (const auto& r : results) {
    rep.queries += r.queries;
    if (r.success) {
      rep.successes += 1;
      rep.iterations_histogram[r.iterations] += 1;
    }
  }
  rep.no_adversarial_found = restarts - rep.successes;
  rep.success_rate = static_cast<double>(rep.successes) / static_cast<double>(restarts);
  rep.adversarial_per_query = static_cast<double>(rep.successes) / static_cast<double>(rep.queries);
  return rep;
}

}  // namespace advspec

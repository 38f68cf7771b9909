#pragma once

// Black-box evaluation of trained generators: success rates, spectral
// statistics, nearest-real substitution and a latent hill-climb baseline.

#include <cstdint>
#include <map>
#include <vector>

#include "advspec/classifier.hpp"
#include "advspec/common.hpp"
#include "advspec/gan.hpp"
#include "advspec/nn.hpp"

namespace advspec {

struct AttackReport {
  int target_class = 0;
  std::vector<double> runs;
  double mean = 0.0;
  double std = 0.0;  // population
  double classifier_accuracy_on_class = 0.0;
  std::size_t n_samples_per_run = 0;
};

// Fraction of rows whose argmax differs from target_class.
double misclassified_fraction(const Matrix& predictions, int target_class);

// Run r draws n_per_run samples with its own stream seeded seed + r; runs may
// execute on several threads with identical results.
AttackReport success_rate(const Model& generator, const BlackBoxClassifier& classifier,
                          int target_class, std::size_t n_runs, std::size_t n_per_run,
                          std::uint64_t seed, LatentPrior prior = LatentPrior::normal);

template <PredictOnlyClassifier C>
AttackReport success_rate(const Model& generator, const C& classifier, int target_class,
                          std::size_t n_runs, std::size_t n_per_run, std::uint64_t seed,
                          LatentPrior prior = LatentPrior::normal) {
  return success_rate(generator, static_cast<const BlackBoxClassifier&>(PredictAdapter<C>(classifier)),
                      target_class, n_runs, n_per_run, seed, prior);
}

struct MatchTable {
  std::vector<std::size_t> index;  // per real sample, nearest generated row
  std::vector<double> distance;    // Euclidean
};

// Exhaustive nearest neighbour; ties go to the lowest generated index.
MatchTable nearest_real_match(const Matrix& generated, const Matrix& real);

struct SpectralStats {
  std::vector<double> mean;
  std::vector<double> std;  // population
};

SpectralStats spectral_stats(const Matrix& samples);

struct BaselineResult {
  Matrix sample;  // one row: the final G(z)
  bool success = false;
  std::size_t iterations = 0;  // accepted-or-rejected perturbations used
  std::size_t queries = 0;     // classifier calls
};

// Greedy hill-climb in latent space: z' = z + step * N(0, I) is kept when
// it lowers the predicted probability of target_class; stops once the
// prediction leaves target_class or after `iters` perturbations.
BaselineResult latent_search_baseline(const Model& generator,
                                      const BlackBoxClassifier& classifier, int target_class,
                                      std::size_t iters, double step, Rng& rng,
                                      LatentPrior prior = LatentPrior::normal);

struct BaselineReport {
  int target_class = 0;
  std::size_t restarts = 0;
  std::size_t iters = 0;
  double step = 0.0;
  std::size_t successes = 0;
  std::size_t no_adversarial_found = 0;
  double success_rate = 0.0;          // successes / restarts
  std::size_t queries = 0;            // total classifier queries
  double adversarial_per_query = 0.0; // successes / queries
  std::map<std::size_t, std::size_t> iterations_histogram;  // successful restarts only
};

// Restart r uses its own stream seeded seed + r.
BaselineReport run_baseline(const Model& generator, const BlackBoxClassifier& classifier,
                            int target_class, std::size_t restarts, std::size_t iters,
                            double step, std::uint64_t seed,
                            LatentPrior prior = LatentPrior::normal);

}  // namespace advspec

#pragma once

// Band-spectra datasets: CSV ingestion with per-band min-max normalization,
// the 2-D toy set, and the synthetic spectra family.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "advspec/common.hpp"

namespace advspec {

struct SpectraDataset {
  Matrix X;                              // N x B
  std::vector<int> y;                    // N labels in [0, K)
  std::vector<std::string> class_names;  // K names

  std::size_t size() const { return X.rows; }
  std::size_t bands() const { return X.cols; }
  std::size_t num_classes() const { return class_names.size(); }

  // Throws std::invalid_argument when sizes disagree, N is zero or a label is
  // out of range. With unit_range, also requires every entry in [0, 1].
  void validate(bool unit_range = true) const;

  std::vector<std::size_t> class_counts() const;
  std::vector<std::size_t> indices_of(int label) const;
  SpectraDataset subset(std::span<const std::size_t> indices) const;
  SpectraDataset only_class(int label) const;
};

struct Normalization {
  std::vector<double> band_min;
  std::vector<double> band_max;

  static Normalization fit(const Matrix& raw);
  // Constant bands map to 0. Results are clipped to [0, 1].
  Matrix normalize(const Matrix& raw) const;
  Matrix denormalize(const Matrix& normalized) const;

  bool operator==(const Normalization&) const = default;
};

void write_normalization(const std::filesystem::path& path, const Normalization& n);
Normalization read_normalization(const std::filesystem::path& path);

// Sidecar location for a CSV: same stem, ".norm.json".
std::filesystem::path normalization_sidecar(const std::filesystem::path& csv);

struct CsvSchema {
  std::size_t bands = 48;
  // Labels may be written as names from this list or as integer ids. When
  // empty, labels must be integers and names default to "class_<id>".
  std::vector<std::string> class_names;
  // Use the sidecar next to the file when present instead of refitting.
  bool use_sidecar = true;
};

struct LoadedSpectra {
  SpectraDataset data;
  Normalization normalization;
};

// Rows: label,b0,...,b{B-1}. A header line is detected when its band cells
// are not numeric. Errors name the 1-based line.
LoadedSpectra load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});

// Writes denormalized values with full precision and the normalization
// sidecar, so load_csv restores the normalized matrix.
void write_csv(const std::filesystem::path& path, const SpectraDataset& data,
               const Normalization& normalization);

// Oriented line a*x + b*y + c = 0 with (a, b) of unit length.
struct Line {
  double a = 0.6;
  double b = 0.8;
  double c = 0.0;

  double signed_distance(double x, double y) const { return a * x + b * y + c; }
  // Points on the line belong to class 1.
  int side(double x, double y) const { return signed_distance(x, y) >= 0.0 ? 1 : 0; }
};

struct Toy2D {
  Matrix points;  // N x 2
  std::vector<int> labels;
  std::vector<int> clean_labels;  // side of the boundary before flips
  Line boundary;

  SpectraDataset as_dataset() const;
};

// Peak flip probability at the boundary.
inline constexpr double kToyPeakFlip = 0.45;

// Standard-normal cloud split by `boundary`. Each label flips with
// probability kToyPeakFlip * exp(-d^2 / 2h^2), d the distance to the line,
// with h chosen so the expected flip fraction equals flip_rate.
Toy2D make_toy2d(std::size_t n, double flip_rate, std::uint64_t seed, Line boundary = {});

// Width h of the flip band for a given expected flip fraction.
double toy_flip_width(double flip_rate);

struct Bump {
  double center = 0.0;  // band index
  double width = 1.0;
  double amplitude = 0.0;
};

struct ClassSpec {
  std::string name;
  std::vector<Bump> bumps;
  double baseline = 0.0;
  double noise = 0.0;      // iid Gaussian per band
  double gain_std = 0.0;   // per-sample multiplicative brightness
  double count_scale = 1.0;
  // Optional confuser: with probability mix_fraction a sample moves a
  // fraction t ~ N(mix_mean, mix_std), clipped to [0, 1], toward the profile
  // of class `mix_with`.
  int mix_with = -1;
  double mix_mean = 0.0;
  double mix_std = 0.0;
  double mix_fraction = 1.0;
};

// Noise-free profile of a class over `bands` bands.
std::vector<double> class_profile(const ClassSpec& spec, std::size_t bands);

// round(n_per_class * count_scale) samples per class, clipped to [0, 1].
SpectraDataset make_synthetic_spectra(const std::vector<ClassSpec>& classes,
                                      std::size_t n_per_class, std::size_t bands,
                                      std::uint64_t seed);

// Six classes: three attack targets with graded confusability followed by
// their confusers.
//   0 healthy_grass  (18% of samples copy stressed_grass)
//   1 car            (66% copy road)
//   2 crosswalk      (94% copy sidewalk)
//   3 stressed_grass, 4 road, 5 sidewalk  (2.5x as many samples)
// Trained-classifier accuracies on the targets come out near 0.84 / 0.42 / 0.07.
std::vector<ClassSpec> default_spectra_recipe();
inline constexpr int kRecipeHighClass = 0;
inline constexpr int kRecipeMidClass = 1;
inline constexpr int kRecipeLowClass = 2;

struct Split {
  SpectraDataset train;
  SpectraDataset test;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
};

// Stratified and disjoint. Each class contributes round(fraction * n_k)
// samples to train, kept within [1, n_k - 1].
Split split(const SpectraDataset& data, double train_fraction, std::uint64_t seed);

}  // namespace advspec

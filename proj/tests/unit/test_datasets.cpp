#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "advspec/classifier.hpp"
#include "advspec/datasets.hpp"
#include "doctest.h"
#include "support/tempdir.hpp"

using namespace advspec;
using advspec::testing::TempDir;

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

bool contains(const std::string& s, const std::string& part) {
  return s.find(part) != std::string::npos;
}

SpectraDataset small_synthetic(std::uint64_t seed) {
  std::vector<ClassSpec> classes(2);
  classes[0] = {"low", {{5, 2, 0.3}}, 0.1, 0.02};
  classes[1] = {"high", {{15, 3, 0.4}}, 0.2, 0.02};
  return make_synthetic_spectra(classes, 30, 20, seed);
}

}  // namespace

TEST_CASE("csv round trip restores normalized values") {
  TempDir dir("csv");
  SpectraDataset d = small_synthetic(3);
  Normalization n;
  n.band_min.assign(d.bands(), -0.5);
  n.band_max.assign(d.bands(), 2.0);
  const auto path = dir / "data.csv";
  write_csv(path, d, n);
  CHECK(std::filesystem::exists(normalization_sidecar(path)));

  CsvSchema schema;
  schema.bands = d.bands();
  auto loaded = load_csv(path, schema);
  CHECK(loaded.normalization == n);
  CHECK(loaded.data.y == d.y);
  REQUIRE(loaded.data.X.values.size() == d.X.values.size());
  for (std::size_t i = 0; i < d.X.values.size(); ++i) {
    CHECK(std::abs(loaded.data.X.values[i] - d.X.values[i]) < 1e-12);
  }
  CHECK(loaded.data.class_names == std::vector<std::string>{"class_0", "class_1"});
}

TEST_CASE("three-row fixture with names, header and a constant band") {
  TempDir dir("fixture");
  const auto path = dir / "tiny.csv";
  write_text(path, "label,b0,b1,b2\na,1,2,5\nb,3,2,7\n1,2,2,6\n");
  CsvSchema schema;
  schema.bands = 3;
  schema.class_names = {"a", "b"};
  auto loaded = load_csv(path, schema);
  const auto& X = loaded.data.X;
  REQUIRE(X.rows == 3);
  CHECK(loaded.data.y == std::vector<int>{0, 1, 1});
  CHECK(X(0, 0) == 0.0);
  CHECK(X(1, 0) == 1.0);
  CHECK(X(2, 0) == 0.5);
  for (std::size_t r = 0; r < 3; ++r) CHECK(X(r, 1) == 0.0);
  CHECK(X(2, 2) == 0.5);
  CHECK(loaded.normalization.band_min == std::vector<double>{1, 2, 5});
  CHECK(loaded.normalization.band_max == std::vector<double>{3, 2, 7});
}

TEST_CASE("csv errors name the file and line") {
  TempDir dir("bad");
  CsvSchema schema;
  schema.bands = 2;
  schema.class_names = {"x", "y"};

  const auto empty = dir / "empty.csv";
  write_text(empty, "");
  CHECK(contains(error_of([&] { load_csv(empty, schema); }), "no data rows"));

  const auto ragged = dir / "ragged.csv";
  write_text(ragged, "x,0.1,0.2\ny,0.3\n");
  auto msg = error_of([&] { load_csv(ragged, schema); });
  CHECK(contains(msg, "ragged.csv:2:"));
  CHECK(contains(msg, "expected 3"));

  const auto text = dir / "text.csv";
  write_text(text, "x,0.1,0.2\nx,0.3,0.4\ny,abc,0.2\n");
  msg = error_of([&] { load_csv(text, schema); });
  CHECK(contains(msg, "text.csv:3:"));
  CHECK(contains(msg, "abc"));

  const auto unknown = dir / "unknown.csv";
  write_text(unknown, "x,0.1,0.2\nzebra,0.3,0.4\n");
  msg = error_of([&] { load_csv(unknown, schema); });
  CHECK(contains(msg, "unknown.csv:2:"));
  CHECK(contains(msg, "zebra"));

  CHECK_THROWS(load_csv(dir / "absent.csv", schema));
}

TEST_CASE("normalization clips, zeroes constant bands and inverts") {
  Matrix raw(4, 3);
  raw.values = {0.0, 7.0, -1.0, 2.0, 7.0, 1.0, 1.0, 7.0, 0.0, 4.0, 7.0, 3.0};
  auto n = Normalization::fit(raw);
  Matrix x = n.normalize(raw);
  for (double v : x.values) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  for (std::size_t r = 0; r < 4; ++r) CHECK(x(r, 1) == 0.0);
  Matrix back = n.denormalize(x);
  for (std::size_t r = 0; r < 4; ++r) {
    CHECK(std::abs(back(r, 0) - raw(r, 0)) < 1e-12);
    CHECK(std::abs(back(r, 2) - raw(r, 2)) < 1e-12);
  }

  Matrix outside(1, 3);
  outside.values = {8.0, 7.0, -5.0};
  Matrix clipped = n.normalize(outside);
  CHECK(clipped(0, 0) == 1.0);
  CHECK(clipped(0, 2) == 0.0);

  TempDir dir("norm");
  write_normalization(dir / "n.json", n);
  CHECK(read_normalization(dir / "n.json") == n);
}

TEST_CASE("toy points on the boundary belong to class 1") {
  Line l;
  CHECK(l.side(0.0, 0.0) == 1);
  CHECK(l.side(0.8, -0.6) == 1);
  CHECK(l.side(-0.6, -0.8) == 0);
  CHECK(l.side(0.6, 0.8) == 1);
}

TEST_CASE("toy flip width matches a numerically integrated flip mass") {
  for (double r : {0.05, 0.1, 0.2, 0.3}) {
    const double h = toy_flip_width(r);
    // expected flip probability of a standard-normal distance
    double mass = 0.0;
    const double step = 1e-4;
    for (double d = -12.0; d <= 12.0; d += step) {
      const double phi = std::exp(-0.5 * d * d) / std::sqrt(2.0 * M_PI);
      mass += kToyPeakFlip * std::exp(-d * d / (2.0 * h * h)) * phi * step;
    }
    CHECK(std::abs(mass - r) < 1e-8);
  }
  CHECK(toy_flip_width(0.0) == 0.0);
  CHECK_THROWS(toy_flip_width(0.45));
  CHECK_THROWS(toy_flip_width(-0.1));
}

TEST_CASE("toy flip fraction lies within 3 sigma") {
  const std::size_t n = 20000;
  const double r = 0.2;
  auto t = make_toy2d(n, r, 11);
  std::size_t flips = 0;
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(t.clean_labels[i] == t.boundary.side(t.points(i, 0), t.points(i, 1)));
    flips += t.labels[i] != t.clean_labels[i];
  }
  const double rate = static_cast<double>(flips) / n;
  CHECK(std::abs(rate - r) < 3.0 * std::sqrt(r * (1.0 - r) / n));

  auto none = make_toy2d(500, 0.0, 11);
  CHECK(none.labels == none.clean_labels);
}

TEST_CASE("toy boundary is normalized and the set is seed-determined") {
  auto a = make_toy2d(200, 0.1, 5);
  auto b = make_toy2d(200, 0.1, 5, Line{3.0, 4.0, 0.0});
  CHECK(a.points.values == b.points.values);
  CHECK(a.labels == b.labels);
  CHECK(b.boundary.a == doctest::Approx(0.6));
  auto c = make_toy2d(200, 0.1, 6);
  CHECK(a.points.values != c.points.values);
  auto ds = a.as_dataset();
  CHECK(ds.num_classes() == 2);
  CHECK_NOTHROW(ds.validate(false));
}

TEST_CASE("noise-free synthetic samples equal the class profile") {
  std::vector<ClassSpec> classes(2);
  classes[0] = {"a", {{10, 3, 0.4}}, 0.1};
  classes[1] = {"b", {{30, 5, 0.3}, {5, 2, 0.2}}, 0.2};
  auto d = make_synthetic_spectra(classes, 4, 48, 1);
  REQUIRE(d.size() == 8);
  for (std::size_t k = 0; k < 2; ++k) {
    const auto profile = class_profile(classes[k], 48);
    for (std::size_t i : d.indices_of(static_cast<int>(k))) {
      for (std::size_t b = 0; b < 48; ++b) CHECK(d.X(i, b) == profile[b]);
    }
  }
  // direct evaluation of one band
  const double u = (30.0 - 30.0) / 5.0;
  const double expect = 0.2 + 0.3 * std::exp(-0.5 * u * u) +
                        0.2 * std::exp(-0.5 * ((30.0 - 5.0) / 2.0) * ((30.0 - 5.0) / 2.0));
  CHECK(class_profile(classes[1], 48)[30] == doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("synthetic counts, ranges and parameter errors") {
  auto recipe = default_spectra_recipe();
  auto d = make_synthetic_spectra(recipe, 40, 48, 2);
  CHECK_NOTHROW(d.validate(true));
  const auto counts = d.class_counts();
  REQUIRE(counts.size() == 6);
  CHECK(counts[0] == 40);
  CHECK(counts[3] == 100);

  std::vector<ClassSpec> bad(1);
  bad[0] = {"w", {{3, 0.0, 0.1}}, 0.1};
  auto msg = error_of([&] { make_synthetic_spectra(bad, 5, 10, 1); });
  CHECK(contains(msg, "width"));
  bad[0] = {"w", {{3, -1.0, 0.1}}, 0.1};
  CHECK_THROWS(make_synthetic_spectra(bad, 5, 10, 1));
  bad[0] = {"w", {}, 0.1, 0.0, 0.0, 1.0, 0, 0.5, 0.1, 1.5};
  CHECK_THROWS(make_synthetic_spectra(bad, 5, 10, 1));
}

TEST_CASE("well separated synthetic classes are learned") {
  std::vector<ClassSpec> classes(2);
  classes[0] = {"a", {{10, 3, 0.5}}, 0.1, 0.02};
  classes[1] = {"b", {{36, 3, 0.5}}, 0.1, 0.02};
  auto d = make_synthetic_spectra(classes, 60, 48, 4);
  auto s = split(d, 0.5, 4);
  Model m = build_classifier(default_classifier_config(48, 2, 4));
  ClassifierTraining opt;
  opt.epochs = 15;
  train_classifier(m, s.train, opt);
  ModelClassifier clf(m);
  CHECK(evaluate(clf, s.test).overall_accuracy > 0.95);
}

TEST_CASE("default recipe puts target accuracies in their bands") {
  auto d = make_synthetic_spectra(default_spectra_recipe(), 400, 48, 1);
  auto s = split(d, 0.5, 1);
  Model m = build_classifier(default_classifier_config(48, 6, 1));
  ClassifierTraining opt;
  opt.seed = 1;
  train_classifier(m, s.train, opt);
  ModelClassifier clf(m);
  const auto acc = evaluate(clf, s.test).per_class_accuracy;
  CHECK(acc[kRecipeHighClass] >= 0.75);
  CHECK(acc[kRecipeHighClass] <= 0.9);
  CHECK(acc[kRecipeMidClass] >= 0.3);
  CHECK(acc[kRecipeMidClass] <= 0.5);
  CHECK(acc[kRecipeLowClass] >= 0.02);
  CHECK(acc[kRecipeLowClass] <= 0.15);
}

TEST_CASE("split is stratified, disjoint and reproducible") {
  auto d = make_synthetic_spectra(default_spectra_recipe(), 21, 48, 8);
  auto s = split(d, 0.5, 3);
  std::set<std::size_t> seen(s.train_indices.begin(), s.train_indices.end());
  for (std::size_t i : s.test_indices) CHECK(seen.insert(i).second);
  CHECK(seen.size() == d.size());

  const auto all = d.class_counts();
  const auto tr = s.train.class_counts();
  for (std::size_t k = 0; k < all.size(); ++k) {
    CHECK(tr[k] == static_cast<std::size_t>(std::llround(0.5 * all[k])));
  }
  auto again = split(d, 0.5, 3);
  CHECK(again.train_indices == s.train_indices);
  CHECK(split(d, 0.5, 4).train_indices != s.train_indices);

  auto tiny = split(d, 0.01, 3);
  for (std::size_t c : tiny.train.class_counts()) CHECK(c >= 1);
  CHECK_THROWS(split(d, 0.0, 1));
  CHECK_THROWS(split(d, 1.0, 1));
}

TEST_CASE("kappa and per-class accuracy from a hand-computed confusion") {
  // OA = 0.7, chance agreement (25*30 + 25*20) / 50^2 = 0.5
  auto m = confusion_metrics({{20, 5}, {10, 15}});
  CHECK(m.overall_accuracy == doctest::Approx(0.7));
  CHECK(m.kappa == doctest::Approx(0.4));
  CHECK(m.per_class_accuracy[0] == doctest::Approx(0.8));
  CHECK(m.per_class_accuracy[1] == doctest::Approx(0.6));

  auto perfect = confusion_metrics({{7, 0, 0}, {0, 3, 0}, {0, 0, 0}});
  CHECK(perfect.overall_accuracy == 1.0);
  CHECK(perfect.kappa == 1.0);
  CHECK(std::isnan(perfect.per_class_accuracy[2]));

  CHECK_THROWS(confusion_metrics({{1, 0}, {0}}));
}

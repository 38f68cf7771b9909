#include "advspec/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace advspec {

void SpectraDataset::validate(bool unit_range) const {
  if (X.rows == 0) throw std::invalid_argument("dataset is empty");
  if (X.values.size() != X.rows * X.cols) throw std::invalid_argument("matrix storage size mismatch");
  if (y.size() != X.rows) {
    throw std::invalid_argument("dataset has " + std::to_string(X.rows) + " samples but " +
                                std::to_string(y.size()) + " labels");
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] < 0 || static_cast<std::size_t>(y[i]) >= class_names.size()) {
      throw std::invalid_argument("sample " + std::to_string(i) + " has label " +
                                  std::to_string(y[i]) + " outside [0, " +
                                  std::to_string(class_names.size()) + ")");
    }
  }
  if (unit_range) {
    for (std::size_t k = 0; k < X.values.size(); ++k) {
      const double v = X.values[k];
      if (!(v >= 0.0 && v <= 1.0)) {
        throw std::invalid_argument("sample " + std::to_string(k / X.cols) + " band " +
                                    std::to_string(k % X.cols) + " = " + std::to_string(v) +
                                    " outside [0, 1]");
      }
    }
  }
}

std::vector<std::size_t> SpectraDataset::class_counts() const {
  std::vector<std::size_t> counts(class_names.size(), 0);
  for (int label : y) counts.at(static_cast<std::size_t>(label)) += 1;
  return counts;
}

std::vector<std::size_t> SpectraDataset::indices_of(int label) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == label) out.push_back(i);
  }
  return out;
}

SpectraDataset SpectraDataset::subset(std::span<const std::size_t> indices) const {
  SpectraDataset out;
  out.X = X.select_rows(indices);
  out.class_names = class_names;
  out.y.reserve(indices.size());
  for (auto i : indices) out.y.push_back(y.at(i));
  return out;
}

SpectraDataset SpectraDataset::only_class(int label) const {
  const auto idx = indices_of(label);
  return subset(idx);
}

Normalization Normalization::fit(const Matrix& raw) {
  if (raw.rows == 0) throw std::invalid_argument("cannot fit normalization on zero rows");
  Normalization n;
  n.band_min.assign(raw.cols, 0.0);
  n.band_max.assign(raw.cols, 0.0);
  for (std::size_t b = 0; b < raw.cols; ++b) {
    double lo = raw(0, b);
    double hi = raw(0, b);
    for (std::size_t r = 1; r < raw.rows; ++r) {
      lo = std::min(lo, raw(r, b));
      hi = std::max(hi, raw(r, b));
    }
    n.band_min[b] = lo;
    n.band_max[b] = hi;
  }
  return n;
}

Matrix Normalization::normalize(const Matrix& raw) const {
  if (raw.cols != band_min.size()) {
    throw std::invalid_argument("normalization has " + std::to_string(band_min.size()) +
                                " bands, data has " + std::to_string(raw.cols));
  }
  Matrix out(raw.rows, raw.cols);
  for (std::size_t r = 0; r < raw.rows; ++r) {
    for (std::size_t b = 0; b < raw.cols; ++b) {
      const double span = band_max[b] - band_min[b];
      const double v = span > 0.0 ? (raw(r, b) - band_min[b]) / span : 0.0;
      out(r, b) = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

Matrix Normalization::denormalize(const Matrix& normalized) const {
  if (normalized.cols != band_min.size()) {
    throw std::invalid_argument("normalization has " + std::to_string(band_min.size()) +
                                " bands, data has " + std::to_string(normalized.cols));
  }
  Matrix out(normalized.rows, normalized.cols);
  for (std::size_t r = 0; r < normalized.rows; ++r) {
    for (std::size_t b = 0; b < normalized.cols; ++b) {
      out(r, b) = band_min[b] + normalized(r, b) * (band_max[b] - band_min[b]);
    }
  }
  return out;
}

void write_normalization(const std::filesystem::path& path, const Normalization& n) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << nlohmann::json{{"band_min", n.band_min}, {"band_max", n.band_max}}.dump(2) << '\n';
}

Normalization read_normalization(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing normalization file " + path.string());
  const auto j = nlohmann::json::parse(in);
  Normalization n;
  n.band_min = j.at("band_min").get<std::vector<double>>();
  n.band_max = j.at("band_max").get<std::vector<double>>();
  if (n.band_min.size() != n.band_max.size()) {
    throw std::invalid_argument(path.string() + ": band_min and band_max lengths differ");
  }
  return n;
}

std::filesystem::path normalization_sidecar(const std::filesystem::path& csv) {
  auto p = csv;
  p.replace_extension(".norm.json");
  return p;
}

namespace {

std::vector<std::string> split_cells(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::optional<double> parse_number(const std::string& s) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || s.empty()) return std::nullopt;
  return v;
}

std::optional<int> parse_int(const std::string& s) {
  int v = 0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || s.empty()) return std::nullopt;
  return v;
}

}  // namespace

LoadedSpectra load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());

  std::vector<double> values;
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  bool saw_content = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_cells(line);
    for (auto& c : cells) c = trim(c);
    const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
    if (!saw_content) {
      saw_content = true;
      if (cells.size() > 1 && !parse_number(cells[1])) continue;  // header
    }
    if (cells.size() != schema.bands + 1) {
      throw std::invalid_argument(where + "expected " + std::to_string(schema.bands + 1) +
                                  " cells (label + bands), got " + std::to_string(cells.size()));
    }
    int label = -1;
    if (auto it = std::find(schema.class_names.begin(), schema.class_names.end(), cells[0]);
        it != schema.class_names.end()) {
      label = static_cast<int>(it - schema.class_names.begin());
    } else if (auto id = parse_int(cells[0])) {
      label = *id;
    }
    if (label < 0 || (!schema.class_names.empty() &&
                      static_cast<std::size_t>(label) >= schema.class_names.size())) {
      throw std::invalid_argument(where + "unknown label '" + cells[0] + "'");
    }
    for (std::size_t b = 0; b < schema.bands; ++b) {
      auto v = parse_number(cells[b + 1]);
      if (!v || !std::isfinite(*v)) {
        throw std::invalid_argument(where + "band " + std::to_string(b) + " is not numeric: '" +
                                    cells[b + 1] + "'");
      }
      values.push_back(*v);
    }
    labels.push_back(label);
  }
  if (labels.empty()) throw std::invalid_argument(path.string() + ": no data rows");

  Matrix raw(labels.size(), schema.bands);
  raw.values = std::move(values);

  LoadedSpectra out;
  const auto sidecar = normalization_sidecar(path);
  if (schema.use_sidecar && std::filesystem::exists(sidecar)) {
    out.normalization = read_normalization(sidecar);
  } else {
    out.normalization = Normalization::fit(raw);
  }
  out.data.X = out.normalization.normalize(raw);
  out.data.y = std::move(labels);
  if (schema.class_names.empty()) {
    const int k = *std::max_element(out.data.y.begin(), out.data.y.end()) + 1;
    for (int c = 0; c < k; ++c) out.data.class_names.push_back("class_" + std::to_string(c));
  } else {
    out.data.class_names = schema.class_names;
  }
  return out;
}

void write_csv(const std::filesystem::path& path, const SpectraDataset& data,
               const Normalization& normalization) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const Matrix raw = normalization.denormalize(data.X);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "label";
  for (std::size_t b = 0; b < data.bands(); ++b) out << ",b" << b;
  out << '\n' << std::setprecision(17);
  for (std::size_t r = 0; r < raw.rows; ++r) {
    out << data.y[r];
    for (std::size_t b = 0; b < raw.cols; ++b) out << ',' << raw(r, b);
    out << '\n';
  }
  write_normalization(normalization_sidecar(path), normalization);
}

SpectraDataset Toy2D::as_dataset() const {
  SpectraDataset d;
  d.X = points;
  d.y = labels;
  d.class_names = {"negative", "positive"};
  return d;
}

double toy_flip_width(double flip_rate) {
  if (flip_rate < 0.0 || flip_rate >= kToyPeakFlip) {
    throw std::invalid_argument("toy flip rate must lie in [0, " + std::to_string(kToyPeakFlip) +
                                "), got " + std::to_string(flip_rate));
  }
  return flip_rate / std::sqrt(kToyPeakFlip * kToyPeakFlip - flip_rate * flip_rate);
}

Toy2D make_toy2d(std::size_t n, double flip_rate, std::uint64_t seed, Line boundary) {
  if (n < 10) throw std::invalid_argument("toy set needs at least 10 points");
  const double norm = std::hypot(boundary.a, boundary.b);
  if (norm == 0.0) throw std::invalid_argument("degenerate boundary");
  boundary = {boundary.a / norm, boundary.b / norm, boundary.c / norm};
  const double h = toy_flip_width(flip_rate);

  Rng rng(seed);
  Toy2D t;
  t.boundary = boundary;
  t.points = Matrix(n, 2);
  t.labels.resize(n);
  t.clean_labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.normal();
    const double y = rng.normal();
    t.points(i, 0) = x;
    t.points(i, 1) = y;
    const double d = boundary.signed_distance(x, y);
    const double p_flip = h > 0.0 ? kToyPeakFlip * std::exp(-d * d / (2.0 * h * h)) : 0.0;
    const int clean = boundary.side(x, y);
    t.clean_labels[i] = clean;
    t.labels[i] = rng.uniform() < p_flip ? 1 - clean : clean;
  }
  return t;
}

std::vector<double> class_profile(const ClassSpec& spec, std::size_t bands) {
  std::vector<double> p(bands, spec.baseline);
  for (const auto& bump : spec.bumps) {
    if (!(bump.width > 0.0)) {
      throw std::invalid_argument("class '" + spec.name + "' has a bump with width " +
                                  std::to_string(bump.width) + " (must be > 0)");
    }
    for (std::size_t b = 0; b < bands; ++b) {
      const double u = (static_cast<double>(b) - bump.center) / bump.width;
      p[b] += bump.amplitude * std::exp(-0.5 * u * u);
    }
  }
  return p;
}

SpectraDataset make_synthetic_spectra(const std::vector<ClassSpec>& classes,
                                      std::size_t n_per_class, std::size_t bands,
                                      std::uint64_t seed) {
  if (classes.empty()) throw std::invalid_argument("no class specs");
  if (bands == 0) throw std::invalid_argument("band count must be positive");
  std::vector<std::vector<double>> profiles;
  for (const auto& c : classes) {
    if (c.noise < 0.0 || c.gain_std < 0.0 || c.mix_std < 0.0 || c.count_scale < 0.0) {
      throw std::invalid_argument("class '" + c.name + "' has a negative noise parameter");
    }
    if (c.mix_fraction < 0.0 || c.mix_fraction > 1.0) {
      throw std::invalid_argument("class '" + c.name + "' mix fraction outside [0, 1]");
    }
    if (c.mix_with >= static_cast<int>(classes.size())) {
      throw std::invalid_argument("class '" + c.name + "' mixes with unknown class " +
                                  std::to_string(c.mix_with));
    }
    profiles.push_back(class_profile(c, bands));
  }

  Rng rng(seed);
  SpectraDataset d;
  for (const auto& c : classes) d.class_names.push_back(c.name);
  std::vector<double> values;
  for (std::size_t k = 0; k < classes.size(); ++k) {
    const auto& c = classes[k];
    const auto count = static_cast<std::size_t>(std::llround(n_per_class * c.count_scale));
    for (std::size_t i = 0; i < count; ++i) {
      double t = 0.0;
      if (c.mix_with >= 0 && rng.uniform() < c.mix_fraction) {
        t = std::clamp(rng.normal(c.mix_mean, c.mix_std), 0.0, 1.0);
      }
      const double gain = c.gain_std > 0.0 ? rng.normal(1.0, c.gain_std) : 1.0;
      for (std::size_t b = 0; b < bands; ++b) {
        double v = profiles[k][b];
        if (c.mix_with >= 0) v = (1.0 - t) * v + t * profiles[static_cast<std::size_t>(c.mix_with)][b];
        v *= gain;
        if (c.noise > 0.0) v += rng.normal(0.0, c.noise);
        values.push_back(std::clamp(v, 0.0, 1.0));
      }
      d.y.push_back(static_cast<int>(k));
    }
  }
  d.X = Matrix(d.y.size(), bands);
  d.X.values = std::move(values);
  return d;
}

std::vector<ClassSpec> default_spectra_recipe() {
  std::vector<ClassSpec> r(6);
  r[0] = {"healthy_grass", {{10, 3, 0.10}, {34, 7, 0.55}}, 0.08, 0.03, 0.05, 1.0, 3, 1.0, 0.1, 0.18};
  r[1] = {"car", {{6, 5, 0.35}, {24, 4, 0.20}}, 0.20, 0.03, 0.05, 1.0, 4, 1.0, 0.1, 0.66};
  r[2] = {"crosswalk", {{16, 10, 0.45}}, 0.35, 0.03, 0.05, 1.0, 5, 1.0, 0.1, 0.94};
  r[3] = {"stressed_grass", {{12, 4, 0.15}, {30, 6, 0.30}, {42, 4, 0.10}}, 0.10, 0.03, 0.05, 2.5};
  r[4] = {"road", {{20, 12, 0.15}}, 0.25, 0.03, 0.05, 2.5};
  r[5] = {"sidewalk", {{18, 10, 0.30}, {40, 5, 0.10}}, 0.30, 0.03, 0.05, 2.5};
  return r;
}

Split split(const SpectraDataset& data, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("train fraction must lie in (0, 1), got " +
                                std::to_string(train_fraction));
  }
  Rng rng(seed);
  Split s;
  for (std::size_t k = 0; k < data.num_classes(); ++k) {
    auto idx = data.indices_of(static_cast<int>(k));
    if (idx.empty()) continue;
    if (idx.size() < 2) {
      throw std::invalid_argument("class '" + data.class_names[k] + "' has " +
                                  std::to_string(idx.size()) + " sample(s); split needs 2");
    }
    std::shuffle(idx.begin(), idx.end(), rng.engine());
    auto n_train = static_cast<std::size_t>(std::llround(train_fraction * idx.size()));
    n_train = std::clamp<std::size_t>(n_train, 1, idx.size() - 1);
    s.train_indices.insert(s.train_indices.end(), idx.begin(), idx.begin() + n_train);
    s.test_indices.insert(s.test_indices.end(), idx.begin() + n_train, idx.end());
  }
  std::sort(s.train_indices.begin(), s.train_indices.end());
  std::sort(s.test_indices.begin(), s.test_indices.end());
  s.train = data.subset(s.train_indices);
  s.test = data.subset(s.test_indices);
  return s;
}

}  // namespace advspec

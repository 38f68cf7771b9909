#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "advspec/cli.hpp"
#include "detail.hpp"

namespace advspec::cli {

namespace {

const char* kColors[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"};

void require_file(const std::filesystem::path& p, const std::string& hint) {
  if (!std::filesystem::exists(p)) throw missing_artifact("missing " + p.string() + "; " + hint);
}

Model load_classifier_model(const Layout& l) {
  require_file(l.classifier(), "run train-classifier first");
  return load_model(l.classifier());
}

Model load_generator(const Layout& l) {
  require_file(l.generator(), "run train-gan first");
  return load_model(l.generator());
}

int checked_target(const PipelineConfig& cfg, const SpectraDataset& data) {
  if (static_cast<std::size_t>(cfg.attack.target_class) >= data.num_classes()) {
    throw config_error("attack.target_class: " + std::to_string(cfg.attack.target_class) +
                       " but the dataset has " + std::to_string(data.num_classes()) + " classes");
  }
  if (data.indices_of(cfg.attack.target_class).empty()) {
    throw config_error("attack.target_class: class " + std::to_string(cfg.attack.target_class) +
                       " has no samples");
  }
  return cfg.attack.target_class;
}

Json nan_to_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

PipelineData load_pipeline_data(const PipelineConfig& cfg) {
  cfg.validate();
  const Seeds seeds = derive_seeds(cfg.seed);
  PipelineData d;
  const auto& ds = cfg.dataset;
  if (ds.source == "toy2d") {
    Toy2D toy = make_toy2d(ds.toy_points, ds.toy_flip_rate, seeds.data);
    d.all = toy.as_dataset();
    d.toy_boundary = toy.boundary;
  } else if (ds.source == "synthetic") {
    d.all = make_synthetic_spectra(default_spectra_recipe(), ds.per_class, ds.bands, seeds.data);
  } else {
    require_file(ds.csv_path, "check dataset.csv_path");
    CsvSchema schema;
    schema.bands = ds.bands;
    schema.class_names = ds.class_names;
    d.all = load_csv(ds.csv_path, schema).data;
  }
  d.all.validate(ds.source != "toy2d");
  d.split = split(d.all, ds.train_fraction, seeds.split);
  return d;
}

ModelConfig classifier_model_config(const PipelineConfig& cfg, const SpectraDataset& data) {
  const auto seed = derive_seeds(cfg.seed).classifier_init;
  if (cfg.is_toy()) return toy_classifier_config(data.num_classes(), seed);
  return default_classifier_config(data.bands(), data.num_classes(), seed);
}

ModelConfig generator_model_config(const PipelineConfig& cfg, std::size_t bands) {
  const auto seed = derive_seeds(cfg.seed).generator_init;
  if (cfg.is_toy()) return toy_generator_config(cfg.gan.latent_dim, seed);
  if (bands != 48) throw config_error("dataset.bands: the default generator emits 48 bands");
  return default_generator_config(cfg.gan.latent_dim, seed);
}

ModelConfig critic_model_config(const PipelineConfig& cfg, std::size_t bands) {
  const auto seed = derive_seeds(cfg.seed).critic_init;
  if (cfg.is_toy()) return toy_critic_config(seed);
  return default_critic_config(bands, seed);
}

Json to_json(const ClassificationMetrics& m, const std::vector<std::string>& names) {
  Json per = Json::object();
  for (std::size_t k = 0; k < m.per_class_accuracy.size(); ++k) {
    per[k < names.size() ? names[k] : std::to_string(k)] = nan_to_null(m.per_class_accuracy[k]);
  }
  return Json{{"overall_accuracy", m.overall_accuracy},
              {"kappa", m.kappa},
              {"per_class_accuracy", per},
              {"confusion", m.confusion}};
}

Json to_json(const AttackReport& r) {
  return Json{{"target_class", r.target_class},
              {"runs", r.runs},
              {"mean", r.mean},
              {"std", r.std},
              {"classifier_accuracy_on_class", nan_to_null(r.classifier_accuracy_on_class)},
              {"n_samples_per_run", r.n_samples_per_run}};
}

Json to_json(const BaselineReport& r) {
  Json hist = Json::object();
  for (auto [iters, count] : r.iterations_histogram) hist[std::to_string(iters)] = count;
  return Json{{"method", "simplified baseline: greedy latent hill-climb"},
              {"target_class", r.target_class},
              {"restarts", r.restarts},
              {"iters", r.iters},
              {"step", r.step},
              {"successes", r.successes},
              {"no_adversarial_found", r.no_adversarial_found},
              {"success_rate", r.success_rate},
              {"queries", r.queries},
              {"adversarial_per_query", r.adversarial_per_query},
              {"iterations_histogram", hist}};
}

namespace detail {

ClassificationMetrics train_and_save_classifier(const PipelineConfig& cfg, const PipelineData& d,
                                                const Layout& l) {
  Model model = build_classifier(classifier_model_config(cfg, d.all));
  ClassifierTraining opt = cfg.classifier;
  opt.seed = derive_seeds(cfg.seed).classifier_shuffle;
  const auto losses = train_classifier(model, d.split.train, opt);
  save_model(model, l.classifier());
  ModelClassifier clf(model);
  auto metrics = evaluate(clf, d.split.test);
  Json j = to_json(metrics, d.all.class_names);
  j["class_names"] = d.all.class_names;
  j["n_train"] = d.split.train.size();
  j["n_test"] = d.split.test.size();
  j["train_loss"] = losses;
  write_json(l.metrics(), j);
  return metrics;
}

WeightedTarget weigh_target(const BlackBoxClassifier& clf, const PipelineData& d, int target,
                            const WeightingScheme& scheme) {
  WeightedTarget t;
  t.samples = d.all.only_class(target);
  t.scores = collect_scores(clf, t.samples.X, t.samples.y);
  t.weights = compute_weights(scheme, t.scores);
  return t;
}

void write_weights(const WeightedTarget& t, const WeightingScheme& scheme,
                   const std::optional<Line>& line, const std::filesystem::path& csv,
                   const std::filesystem::path& json, const std::filesystem::path& svg) {
  write_weights_csv(csv, t.scores, t.weights);
  double sum_sq = 0.0;
  for (double p : t.weights.p) sum_sq += p * p;
  write_json(json, Json{{"scheme", scheme.name()},
                        {"temperature", scheme.temperature},
                        {"label", scheme.label()},
                        {"n", t.weights.size()},
                        {"entropy", t.weights.entropy()},
                        {"max", t.weights.max()},
                        {"effective_sample_size", 1.0 / sum_sq}});
  if (t.samples.bands() == 2) {
    write_text(svg, weights_svg(t.samples.X, t.weights, line, "weights: " + scheme.label()));
  }
}

LossTrace train_and_save_gan(const PipelineConfig& cfg, const Matrix& data,
                             const SampleWeights& weights, const std::filesystem::path& dir,
                             bool resume) {
  TrainConfig g = cfg.gan;
  g.seed = derive_seeds(cfg.seed).gan;
  g.checkpoint_dir = dir / "checkpoint";
  auto trainer = [&] {
    if (resume) {
      require_file(g.checkpoint_dir / "state.json", "no checkpoint to resume from");
      return WganTrainer::resume(g.checkpoint_dir, data, weights, g);
    }
    return WganTrainer(build_generator(generator_model_config(cfg, data.cols)),
                       build_critic(critic_model_config(cfg, data.cols)), data, weights, g);
  }();
  trainer.run();
  save_model(trainer.generator(), dir / "generator.bin");
  save_model(trainer.critic(), dir / "critic.bin");
  trainer.save_checkpoint(g.checkpoint_dir);
  trainer.trace().write_csv(dir / "trace.csv");
  return trainer.trace();
}

AttackReport attack_and_report(const PipelineConfig& cfg, const PipelineData& d,
                               const Model& classifier_model, const Model& generator, int target,
                               const Layout& out) {
  const Seeds seeds = derive_seeds(cfg.seed);
  ModelClassifier clf(classifier_model);
  auto report = success_rate(generator, clf, target, cfg.attack.runs, cfg.attack.per_run,
                             seeds.attack, cfg.gan.prior);
  report.classifier_accuracy_on_class =
      evaluate(clf, d.split.test).per_class_accuracy[static_cast<std::size_t>(target)];

  // figures and tables from one extra batch
  Rng rng(seeds.figures);
  const Matrix generated = generate(generator, cfg.attack.per_run, cfg.gan.prior, rng);
  const Matrix probs = clf.predict(generated);
  const std::size_t k = d.all.num_classes();
  std::vector<std::size_t> counts(k, 0);
  std::vector<double> mass(k, 0.0);
  for (std::size_t r = 0; r < probs.rows; ++r) {
    ++counts[probs.argmax(r)];
    for (std::size_t c = 0; c < k; ++c) mass[c] += probs(r, c);
  }
  std::vector<std::size_t> others;
  for (std::size_t c = 0; c < k; ++c) {
    if (static_cast<int>(c) != target) others.push_back(c);
  }
  std::stable_sort(others.begin(), others.end(), [&](std::size_t a, std::size_t b) {
    if (counts[a] != counts[b]) return counts[a] > counts[b];
    return mass[a] > mass[b];
  });
  if (others.size() > 2) others.resize(2);

  const auto real = d.all.only_class(target);
  std::vector<CurveGroup> groups;
  std::vector<SpectralStats> stats;
  std::vector<std::string> labels;
  auto add = [&](const std::string& label, const Matrix& x) {
    stats.push_back(spectral_stats(x));
    labels.push_back(label);
    groups.push_back({label, stats.back().mean, stats.back().std,
                      kColors[groups.size() % std::size(kColors)]});
  };
  const std::string tname = d.all.class_names[static_cast<std::size_t>(target)];
  add("real " + tname, real.X);
  add("generated", generated);
  for (std::size_t c : others) {
    add("real " + d.all.class_names[c], d.all.only_class(static_cast<int>(c)).X);
  }
  write_text(out.spectra_svg(), spectra_svg(groups, "target " + tname));

  std::ostringstream csv;
  csv << "band";
  for (const auto& label : labels) {
    std::string col = label;
    std::replace(col.begin(), col.end(), ' ', '_');
    csv << ',' << col << "_mean," << col << "_std";
  }
  csv << '\n' << std::setprecision(17);
  for (std::size_t b = 0; b < generated.cols; ++b) {
    csv << b;
    for (const auto& s : stats) csv << ',' << s.mean[b] << ',' << s.std[b];
    csv << '\n';
  }
  write_text(out.spectral_stats(), csv.str());

  const auto match = nearest_real_match(generated, real.X);
  std::ostringstream sub;
  sub << "real_index,generated_index,distance\n" << std::setprecision(17);
  for (std::size_t i = 0; i < match.index.size(); ++i) {
    sub << i << ',' << match.index[i] << ',' << match.distance[i] << '\n';
  }
  write_text(out.substitution(), sub.str());

  Json j = to_json(report);
  j["target_name"] = tname;
  Json compared = Json::array();
  for (std::size_t c : others) compared.push_back(d.all.class_names[c]);
  j["comparison_classes"] = compared;
  write_json(out.attack(), j);
  return report;
}

}  // namespace detail

ClassificationMetrics cmd_train_classifier(const PipelineConfig& cfg) {
  const auto d = load_pipeline_data(cfg);
  const Layout l{cfg.output_dir};
  save_config(l.config(), cfg);
  return detail::train_and_save_classifier(cfg, d, l);
}

SampleWeights cmd_weights(const PipelineConfig& cfg) {
  const auto d = load_pipeline_data(cfg);
  const Layout l{cfg.output_dir};
  const int target = checked_target(cfg, d.all);
  const Model model = load_classifier_model(l);
  ModelClassifier clf(model);
  auto t = detail::weigh_target(clf, d, target, cfg.weighting);
  detail::write_weights(t, cfg.weighting, linear_decision_line(model), l.weights_csv(),
                        l.weights_json(), l.weights_svg());
  return t.weights;
}

LossTrace cmd_train_gan(const PipelineConfig& cfg, bool resume) {
  const auto d = load_pipeline_data(cfg);
  const Layout l{cfg.output_dir};
  const int target = checked_target(cfg, d.all);
  require_file(l.weights_csv(), "run weights first");
  const auto table = read_weights_csv(l.weights_csv());
  const auto samples = d.all.only_class(target);
  if (table.weights.size() != samples.size()) {
    throw std::runtime_error(l.weights_csv().string() + " has " +
                             std::to_string(table.weights.size()) + " rows but the target class has " +
                             std::to_string(samples.size()) + " samples; re-run weights");
  }
  return detail::train_and_save_gan(cfg, samples.X, table.weights, l.gan_dir(), resume);
}

AttackReport cmd_attack(const PipelineConfig& cfg) {
  const auto d = load_pipeline_data(cfg);
  const Layout l{cfg.output_dir};
  const int target = checked_target(cfg, d.all);
  const Model model = load_classifier_model(l);
  const Model generator = load_generator(l);
  return detail::attack_and_report(cfg, d, model, generator, target, l);
}

BaselineReport cmd_baseline(const PipelineConfig& cfg) {
  const auto d = load_pipeline_data(cfg);
  const Layout l{cfg.output_dir};
  const int target = checked_target(cfg, d.all);
  const Model model = load_classifier_model(l);
  const Model generator = load_generator(l);
  ModelClassifier clf(model);
  const auto seeds = derive_seeds(cfg.seed);
  auto rep = run_baseline(generator, clf, target, cfg.attack.baseline_restarts,
                          cfg.attack.baseline_iters, cfg.attack.baseline_step, seeds.baseline,
                          cfg.gan.prior);
  Json j = to_json(rep);
  Rng rng(seeds.baseline + 1);
  j["generator_success_equal_budget"] =
      misclassified_fraction(clf.predict(generate(generator, rep.queries, cfg.gan.prior, rng)), target);
  write_json(l.baseline(), j);
  return rep;
}

}  // namespace advspec::cli

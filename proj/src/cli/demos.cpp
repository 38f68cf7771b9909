#include <chrono>
#include <iomanip>
#include <sstream>

#include "advspec/cli.hpp"
#include "detail.hpp"

namespace advspec::cli {

namespace {

class Stopwatch {
 public:
  void lap(const std::string& stage) {
    const auto now = std::chrono::steady_clock::now();
    timing_[stage] = std::chrono::duration<double>(now - last_).count();
    last_ = now;
  }
  Json json() const {
    double total = 0.0;
    for (const auto& [_, s] : timing_.items()) total += s.get<double>();
    Json j = timing_;
    j["total_seconds"] = total;
    return j;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
  Json timing_ = Json::object();
};

}  // namespace

ToyDemoReport cmd_demo_toy(const PipelineConfig& cfg) {
  if (!cfg.is_toy()) throw config_error("dataset.source: demo-toy needs toy2d");
  Stopwatch clock;
  const auto d = load_pipeline_data(cfg);
  const Layout root{cfg.output_dir};
  save_config(root.config(), cfg);
  const Seeds seeds = derive_seeds(cfg.seed);

  ToyDemoReport rep;
  const auto metrics = detail::train_and_save_classifier(cfg, d, root);
  const Model model = load_model(root.classifier());
  ModelClassifier clf(model);
  const auto line = linear_decision_line(model);
  const int target = cfg.attack.target_class;
  if (static_cast<std::size_t>(target) >= d.all.num_classes()) {
    throw config_error("attack.target_class: out of range for the toy set");
  }
  rep.classifier_accuracy = metrics.overall_accuracy;
  rep.target_error = 1.0 - metrics.per_class_accuracy[static_cast<std::size_t>(target)];
  clock.lap("classifier");

  const std::vector<WeightingScheme> panels = {
      WeightingScheme::uniform(), WeightingScheme::hard(),     WeightingScheme::soft(8.0),
      WeightingScheme::soft(5.0), WeightingScheme::soft(10.0), WeightingScheme::soft(15.0)};
  const auto fig = root.root / "weights";
  for (const auto& s : panels) {
    const auto t = detail::weigh_target(clf, d, target, s);
    detail::write_weights(t, s, line, fig / (s.label() + ".csv"), fig / (s.label() + ".json"),
                          fig / (s.label() + ".svg"));
  }
  clock.lap("weights");

  rep.soft_temperature =
      cfg.weighting.kind == WeightingScheme::Kind::soft ? cfg.weighting.temperature : 15.0;
  const WeightingScheme soft = WeightingScheme::soft(rep.soft_temperature);
  std::vector<Model> generators;
  for (const auto& s : {WeightingScheme::uniform(), soft}) {
    const Layout dir{root.root / ("gan_" + s.label())};
    const auto t = detail::weigh_target(clf, d, target, s);
    detail::train_and_save_gan(cfg, t.samples.X, t.weights, dir.root, false);
    generators.push_back(load_model(dir.root / "generator.bin"));
    auto a = detail::attack_and_report(cfg, d, model, generators.back(), target, dir);
    (s.kind == WeightingScheme::Kind::uniform ? rep.uniform : rep.soft) = a;
    clock.lap("gan_" + s.label());
  }

  rep.baseline = run_baseline(generators[0], clf, target, cfg.attack.baseline_restarts,
                              cfg.attack.baseline_iters, cfg.attack.baseline_step, seeds.baseline,
                              cfg.gan.prior);
  Rng rng(seeds.baseline + 1);
  rep.soft_equal_budget = misclassified_fraction(
      clf.predict(generate(generators[1], rep.baseline.queries, cfg.gan.prior, rng)), target);
  Json base = to_json(rep.baseline);
  base["generator"] = "uniform";
  base["soft_generator_success_equal_budget"] = rep.soft_equal_budget;
  write_json(root.baseline(), base);
  clock.lap("baseline");

  write_json(root.root / "report.json",
             Json{{"classifier_accuracy", rep.classifier_accuracy},
                  {"kappa", metrics.kappa},
                  {"target_class", target},
                  {"target_error", rep.target_error},
                  {"uniform", to_json(rep.uniform)},
                  {"soft", to_json(rep.soft)},
                  {"soft_temperature", rep.soft_temperature},
                  {"baseline", base}});
  write_json(root.root / "timing.json", clock.json());
  return rep;
}

std::vector<TrendRow> cmd_demo_spectra(const PipelineConfig& cfg) {
  if (cfg.dataset.source != "synthetic") {
    throw config_error("dataset.source: demo-spectra needs the synthetic recipe");
  }
  Stopwatch clock;
  const auto d = load_pipeline_data(cfg);
  const Layout root{cfg.output_dir};
  save_config(root.config(), cfg);
  const auto metrics = detail::train_and_save_classifier(cfg, d, root);
  const Model model = load_model(root.classifier());
  ModelClassifier clf(model);
  clock.lap("classifier");

  std::vector<TrendRow> rows;
  for (int target : {kRecipeHighClass, kRecipeMidClass, kRecipeLowClass}) {
    const std::string name = d.all.class_names[static_cast<std::size_t>(target)];
    const Layout dir{root.root / ("target_" + name)};
    const auto t = detail::weigh_target(clf, d, target, cfg.weighting);
    detail::write_weights(t, cfg.weighting, std::nullopt, dir.weights_csv(), dir.weights_json(),
                          dir.weights_svg());
    detail::train_and_save_gan(cfg, t.samples.X, t.weights, dir.gan_dir(), false);
    const Model generator = load_model(dir.generator());
    TrendRow row;
    row.target_class = target;
    row.name = name;
    row.attack = detail::attack_and_report(cfg, d, model, generator, target, dir);
    row.classifier_accuracy = row.attack.classifier_accuracy_on_class;
    rows.push_back(row);
    clock.lap("target_" + name);
  }

  std::ostringstream csv, md;
  csv << "class,name,classifier_accuracy,success_mean,success_std\n" << std::setprecision(17);
  md << "| class | classifier accuracy | success mean | success std |\n|---|---|---|---|\n"
     << std::fixed << std::setprecision(3);
  Json jrows = Json::array();
  for (const auto& r : rows) {
    csv << r.target_class << ',' << r.name << ',' << r.classifier_accuracy << ',' << r.attack.mean
        << ',' << r.attack.std << '\n';
    md << "| " << r.name << " | " << r.classifier_accuracy << " | " << r.attack.mean << " | "
       << r.attack.std << " |\n";
    Json j = to_json(r.attack);
    j["name"] = r.name;
    jrows.push_back(j);
  }
  write_text(root.root / "trend.csv", csv.str());
  write_text(root.root / "trend.md", md.str());
  const bool inverse = rows[0].attack.mean < rows[1].attack.mean &&
                       rows[1].attack.mean < rows[2].attack.mean;
  write_json(root.root / "report.json",
             Json{{"overall_accuracy", metrics.overall_accuracy},
                  {"kappa", metrics.kappa},
                  {"weighting", cfg.weighting.label()},
                  {"rows", jrows},
                  {"success_inversely_ordered", inverse}});
  write_json(root.root / "timing.json", clock.json());
  return rows;
}

}  // namespace advspec::cli

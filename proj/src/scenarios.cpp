#include "acqsim/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>

#include "acqsim/csv.hpp"
#include "acqsim/diversity.hpp"
#include "acqsim/errors.hpp"
#include "acqsim/seeding.hpp"
#include "acqsim/stats.hpp"

namespace acqsim {

namespace {

constexpr std::uint64_t kSplitStream = 0xF01D5;
constexpr std::uint64_t kSimulateStream = 0x5171;

constexpr std::pair<ScenarioKind, const char*> kScenarioNames[] = {
    {ScenarioKind::plain_cv, "plain_cv"},
    {ScenarioKind::self_supervised, "self_supervised"},
    {ScenarioKind::incremental, "incremental"},
    {ScenarioKind::threshold_sweep, "threshold_sweep"},
    {ScenarioKind::single_vs_multi, "single_vs_multi"},
    {ScenarioKind::diversity_grid, "diversity_grid"},
    {ScenarioKind::simulate, "simulate"},
};

Threshold threshold_from_json(const nlohmann::json& v) {
  if (v.is_string()) return Threshold::parse(v.get<std::string>());
  if (v.is_number()) {
    const double t = v.get<double>();
    if (!(t >= 0.0 && t <= 1.0)) throw config_error("ThresholdOutOfRange", fmt::format("threshold {} outside [0, 1]", t));
    return Threshold::from_double(t);
  }
  throw config_error("InvalidConfig", "thresholds must be numbers or decimal strings");
}

template <typename T>
std::vector<T> nonempty_list(const nlohmann::json& j, const char* key, std::vector<T> fallback) {
  if (!j.contains(key)) return fallback;
  auto v = j.at(key).get<std::vector<T>>();
  if (v.empty()) throw config_error("InvalidConfig", fmt::format("'{}' must not be empty", key));
  return v;
}

}  // namespace

std::string_view to_string(ScenarioKind k) {
  for (const auto& [kind, name] : kScenarioNames) {
    if (kind == k) return name;
  }
  return "unknown";
}

std::optional<ScenarioKind> parse_scenario_kind(std::string_view s) {
  for (const auto& [kind, name] : kScenarioNames) {
    if (s == name) return kind;
  }
  return std::nullopt;
}

std::vector<Threshold> default_sweep_thresholds() {
  return {Threshold::parse("0.10"), Threshold::parse("0.15"), Threshold::parse("0.20"), Threshold::parse("0.25")};
}

std::vector<Threshold> ScenarioConfig::effective_thresholds() const {
  if (!thresholds.empty()) return thresholds;
  if (scenario == ScenarioKind::threshold_sweep) return default_sweep_thresholds();
  return {Threshold::parse(kDefaultThreshold)};
}

ScenarioConfig parse_scenario_config(const nlohmann::json& j, ScenarioConfig c) {
  if (!j.is_object()) throw config_error("InvalidConfig", "scenario config must be a JSON object");
  try {
    if (j.contains("scenario")) {
      auto k = parse_scenario_kind(j.at("scenario").get<std::string>());
      if (!k) throw config_error("InvalidConfig", fmt::format("unknown scenario '{}'", j.at("scenario").get<std::string>()));
      c.scenario = *k;
    }
    if (j.contains("threshold")) c.thresholds = {threshold_from_json(j.at("threshold"))};
    if (j.contains("thresholds")) {
      c.thresholds.clear();
      for (const auto& v : j.at("thresholds")) c.thresholds.push_back(threshold_from_json(v));
      if (c.thresholds.empty()) throw config_error("InvalidConfig", "'thresholds' must not be empty");
    }
    c.train_fold_counts = nonempty_list(j, "train_fold_counts", c.train_fold_counts);
    if (j.contains("grid")) {
      const auto& g = j.at("grid");
      c.grid_texts = nonempty_list(g, "texts", c.grid_texts);
      c.grid_annotations = nonempty_list(g, "annotations", c.grid_annotations);
      c.grid_folds = g.value("folds", c.grid_folds);
      c.ridge_lambda = g.value("lambda", c.ridge_lambda);
    }
    c.n_folds = j.value("n_folds", c.n_folds);
    c.seed = j.value("seed", c.seed);
    c.jobs = j.value("jobs", c.jobs);
    if (j.contains("mode")) {
      auto m = parse_model_mode(j.at("mode").get<std::string>());
      if (!m) throw config_error("InvalidConfig", "mode must be single or multi");
      c.mode = *m;
    }
    if (j.contains("train")) c.train = parse_train_config(j.at("train"), c.train);
    c.alpha = j.value("alpha", c.alpha);
    if (j.contains("simulate")) {
      const auto& s = j.at("simulate");
      c.seed_fraction = s.value("seed_fraction", c.seed_fraction);
      c.validation_fraction = s.value("validation_fraction", c.validation_fraction);
    }
    if (j.contains("cost")) {
      const auto& s = j.at("cost");
      c.price = s.value("price", c.price);
      if (s.contains("annotators_per_text") && !s.at("annotators_per_text").is_null()) {
        c.annotators_per_text = s.at("annotators_per_text").get<double>();
      }
    }
    if (j.contains("synthetic") && !j.at("synthetic").is_null()) c.synthetic = parse_synthetic_spec(j.at("synthetic"));
  } catch (const nlohmann::json::exception& ex) {
    throw config_error("InvalidConfig", ex.what());
  }
  for (auto k : c.train_fold_counts) {
    if (k < 1 || k + 2 > c.n_folds) {
      throw config_error("InvalidConfig", fmt::format("train_fold_counts entries must lie in [1, {}]", c.n_folds - 2));
    }
  }
  if (c.n_folds < 3 || c.grid_folds < 2) throw config_error("InvalidConfig", "n_folds must be >= 3 and grid.folds >= 2");
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw config_error("InvalidAlpha", "alpha must lie in (0, 1)");
  if (!(c.validation_fraction >= 0.0 && c.validation_fraction < 1.0)) {
    throw config_error("InvalidConfig", "simulate.validation_fraction must lie in [0, 1)");
  }
  return c;
}

nlohmann::ordered_json to_json(const ScenarioConfig& c) {
  nlohmann::ordered_json j;
  j["scenario"] = to_string(c.scenario);
  auto ts = nlohmann::ordered_json::array();
  for (const auto& t : c.effective_thresholds()) ts.push_back(t.text());
  j["thresholds"] = std::move(ts);
  j["train_fold_counts"] = c.train_fold_counts;
  j["grid"] = {{"texts", c.grid_texts}, {"annotations", c.grid_annotations}, {"folds", c.grid_folds},
               {"lambda", c.ridge_lambda}};
  j["n_folds"] = c.n_folds;
  j["seed"] = c.seed;
  j["mode"] = to_string(c.mode);
  j["train"] = to_json(c.train);
  j["alpha"] = c.alpha;
  j["simulate"] = {{"seed_fraction", c.seed_fraction}, {"validation_fraction", c.validation_fraction}};
  j["cost"] = {{"price", c.price},
               {"annotators_per_text",
                c.annotators_per_text ? nlohmann::ordered_json(*c.annotators_per_text) : nlohmann::ordered_json(nullptr)}};
  j["synthetic"] = c.synthetic ? to_json(*c.synthetic) : nlohmann::ordered_json(nullptr);
  return j;
}

// ---------------------------------------------------------------------------
// Trainers

Trainer builtin_trainer(ModelMode mode, const TrainConfig& config) {
  return [mode, config](const FoldContext& ctx) -> Predictor {
    TrainingData data{ctx.features, ctx.labels, ctx.train_rows, ctx.val_rows};
    auto model = std::make_shared<const VtlModel>(train_vtl(data, mode, config, ctx.seed));
    return [model](const FeatureCache& f, std::span<const std::size_t> rows) { return predict_vtl(*model, f, rows); };
  };
}

namespace {

// Serves a fixed table keyed by text id, aligning tasks by id.
Predictor lookup_predictor(std::shared_ptr<const PredictionSet> table, std::shared_ptr<const VtlLabels> mask) {
  auto index = std::make_shared<std::unordered_map<std::string, std::size_t>>();
  for (std::size_t i = 0; i < table->n_texts(); ++i) index->emplace(table->text_ids[i], i);
  return [table, mask, index](const FeatureCache& f, std::span<const std::size_t> rows) {
    std::vector<std::string> ids;
    for (auto r : rows) ids.push_back(f.ids()[r]);
    PredictionSet out(std::move(ids), table->task_ids);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      auto it = index->find(out.text_ids[i]);
      if (it == index->end()) throw data_error("MissingCell", fmt::format("no prediction for text '{}'", out.text_ids[i]));
      for (std::size_t k = 0; k < out.n_tasks(); ++k) {
        const bool undefined = mask && !mask->defined(it->second, k);
        out.set_score(i, k, undefined ? 1.0 : table->score(it->second, k));
      }
    }
    return out;
  };
}

}  // namespace

Trainer oracle_trainer(const VtlLabels& truth) {
  auto table = std::make_shared<PredictionSet>(truth.text_ids(), truth.task_ids());
  for (std::size_t d = 0; d < truth.n_texts(); ++d) {
    for (std::size_t k = 0; k < truth.n_tasks(); ++k) table->set_score(d, k, truth.bit(d, k) ? 1.0 : 0.0);
  }
  auto mask = std::make_shared<const VtlLabels>(truth);
  auto predictor = lookup_predictor(table, mask);
  return [predictor](const FoldContext&) { return predictor; };
}

Trainer constant_trainer(std::uint8_t bit) {
  return [bit](const FoldContext& ctx) -> Predictor {
    const auto tasks = ctx.labels->task_ids();
    return [tasks, bit](const FeatureCache& f, std::span<const std::size_t> rows) {
      std::vector<std::string> ids;
      for (auto r : rows) ids.push_back(f.ids()[r]);
      PredictionSet out(std::move(ids), tasks);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t k = 0; k < tasks.size(); ++k) out.set_score(i, k, bit ? 1.0 : 0.0);
      }
      return out;
    };
  };
}

Trainer fixed_trainer(const PredictionSet& predictions) {
  auto predictor = lookup_predictor(std::make_shared<const PredictionSet>(predictions), nullptr);
  return [predictor](const FoldContext&) { return predictor; };
}

// ---------------------------------------------------------------------------
// Cross-validation

ScenarioData::ScenarioData(const Corpus& c) : corpus(&c), features(c), matrix(compute_fractions(c)) {}

FoldPlan cv_folds(const VtlLabels& truth, std::size_t n_folds, std::uint64_t seed) {
  std::vector<std::size_t> eligible;
  for (std::size_t d = 0; d < truth.n_texts(); ++d) {
    if (truth.row_has_defined(d)) eligible.push_back(d);
  }
  return FoldPlan(eligible, n_folds, derive_seed(seed, kSplitStream, 0));
}

CvResult cross_validate(const ScenarioData& data, const VtlLabels& truth, const VtlLabels& train_labels,
                        const Trainer& trainer, const CvOptions& o) {
  const FoldPlan folds = cv_folds(truth, o.n_folds, o.seed);
  const std::size_t K = folds.n_folds();
  std::vector<MetricReport> reports(K);
  std::vector<PredictionSet> preds(K);
  std::vector<std::vector<std::size_t>> tests(K);

  parallel_for(K, o.jobs, [&](std::size_t i) {
    auto roles = folds.roles(i, o.train_folds.value_or(std::numeric_limits<std::size_t>::max()));
    FoldContext ctx{&data.features, &train_labels, std::move(roles.train), std::move(roles.validation),
                    derive_seed(o.seed, i)};
    const Predictor predict = trainer(ctx);
    preds[i] = predict(data.features, roles.test);
    reports[i] = evaluate(truth.select_rows(roles.test), preds[i]);
    tests[i] = std::move(roles.test);
  });

  CvResult r;
  r.out_of_fold = PredictionSet(truth.text_ids(), truth.task_ids());
  for (std::size_t d = 0; d < truth.n_texts(); ++d) {
    for (std::size_t k = 0; k < truth.n_tasks(); ++k) r.out_of_fold.set_score(d, k, 1.0);
  }
  for (std::size_t i = 0; i < K; ++i) {
    for (std::size_t j = 0; j < tests[i].size(); ++j) {
      for (std::size_t k = 0; k < truth.n_tasks(); ++k) r.out_of_fold.set_score(tests[i][j], k, preds[i].score(j, k));
    }
  }
  r.report = aggregate(std::move(reports));
  return r;
}

// ---------------------------------------------------------------------------
// Scenarios

namespace {

CvOptions cv_options(const ScenarioConfig& cfg) { return {cfg.n_folds, cfg.seed, cfg.jobs, std::nullopt}; }

Trainer pick(const std::optional<Trainer>& specific, const ScenarioHooks& hooks, const ScenarioConfig& cfg) {
  if (specific) return *specific;
  if (hooks.trainer) return *hooks.trainer;
  return builtin_trainer(cfg.mode, cfg.train);
}

std::vector<double> fold_values(const AggregateReport& r, std::size_t task, bool lal) {
  std::vector<double> v;
  for (const auto& f : r.folds) {
    if (lal && f.lal_defined[task]) v.push_back(f.lal[task]);
    if (!lal && f.macro_f1[task]) v.push_back(*f.macro_f1[task]);
  }
  return v;
}

// Pairwise task comparisons of per-fold LAL and macro-F1.
nlohmann::ordered_json task_significance(const AggregateReport& r, double alpha) {
  nlohmann::ordered_json j;
  for (const bool lal : {true, false}) {
    std::vector<std::pair<std::string, std::vector<double>>> samples;
    for (std::size_t k = 0; k < r.task_ids.size(); ++k) samples.emplace_back(r.task_ids[k], fold_values(r, k, lal));
    j[lal ? "lal" : "macro_f1"] = stats::pairwise(samples, alpha);
  }
  return j;
}

// Pairwise comparison of scenario variants on a headline metric.
nlohmann::ordered_json variant_significance(const std::vector<std::pair<std::string, const AggregateReport*>>& variants,
                                            double alpha) {
  nlohmann::ordered_json j;
  for (const char* metric : {"aer", "aal", "mb"}) {
    std::vector<std::pair<std::string, std::vector<double>>> samples;
    for (const auto& [name, r] : variants) {
      std::vector<double> v;
      for (const auto& f : r->folds) v.push_back(metric[0] == 'm' ? f.mb : metric[1] == 'e' ? f.aer : f.aal);
      samples.emplace_back(name, std::move(v));
    }
    j[metric] = stats::pairwise(samples, alpha);
  }
  return j;
}

// plotdata: one long-form table of aggregate values per variant.
void add_summary_plot(std::ostringstream& out, const std::string& variant, const AggregateReport& r) {
  auto row = [&](const std::string& task, const char* metric, const Summary& s) {
    if (s.n == 0) return;
    csv::write_row(out, {variant, task, metric, format_number(s.mean), format_number(s.std)});
  };
  row("*", "aer", r.aer);
  row("*", "aal", r.aal);
  row("*", "mb", r.mb);
  row("*", "mlral", r.mlral);
  for (std::size_t k = 0; k < r.task_ids.size(); ++k) {
    row(r.task_ids[k], "lal", r.lal[k]);
    row(r.task_ids[k], "macro_f1", r.macro_f1[k]);
  }
}

std::string summary_plot(const std::vector<std::pair<std::string, const AggregateReport*>>& variants) {
  std::ostringstream out;
  csv::write_row(out, {"variant", "task", "metric", "mean", "std"});
  for (const auto& [name, r] : variants) add_summary_plot(out, name, *r);
  return out.str();
}

nlohmann::ordered_json header(const ScenarioData& data, ScenarioKind kind) {
  nlohmann::ordered_json j;
  j["scenario"] = to_string(kind);
  j["n_texts"] = data.corpus->n_texts();
  j["tasks"] = data.corpus->task_ids();
  j["undefined_cells"] = data.matrix.count_undefined();
  return j;
}

}  // namespace

ScenarioOutput run_plain_cv(const ScenarioData& data, const ScenarioConfig& cfg, const ScenarioHooks& hooks) {
  const Threshold t = cfg.effective_thresholds().front();
  const VtlLabels truth = binarize(data.matrix, t);
  const auto cv = cross_validate(data, truth, truth, pick(std::nullopt, hooks, cfg), cv_options(cfg));

  ScenarioOutput out;
  out.scenario = "plain_cv";
  const std::string variant = std::string(to_string(cfg.mode));
  out.report = header(data, ScenarioKind::plain_cv);
  out.report["threshold"] = t.text();
  out.report["result"] = to_json(cv.report);
  out.report["significance"] = task_significance(cv.report, cfg.alpha);
  append_rows(out.rows, out.scenario, variant, cv.report);
  out.files["plotdata/plain_cv.csv"] = summary_plot({{variant, &cv.report}});
  return out;
}

ScenarioOutput run_self_supervised(const ScenarioData& data, const ScenarioConfig& cfg, const ScenarioHooks& hooks) {
  const Threshold t = cfg.effective_thresholds().front();
  const VtlLabels truth = binarize(data.matrix, t);
  const auto opts = cv_options(cfg);

  // Stage 1: out-of-fold predictions for every text.
  const auto stage1 = cross_validate(data, truth, truth, pick(hooks.stage1_trainer, hooks, cfg), opts);
  VtlLabels predicted(truth.text_ids(), truth.task_ids(), t);
  for (std::size_t d = 0; d < truth.n_texts(); ++d) {
    for (std::size_t k = 0; k < truth.n_tasks(); ++k) {
      if (truth.defined(d, k)) predicted.set(d, k, stage1.out_of_fold.bit(d, k));
    }
  }
  // Stage 2: same folds and seeds, trained on stage-1 labels, scored on the originals.
  const auto stage2 = cross_validate(data, truth, predicted, pick(hooks.stage2_trainer, hooks, cfg), opts);

  ScenarioOutput out;
  out.scenario = "self_supervised";
  out.report = header(data, ScenarioKind::self_supervised);
  out.report["threshold"] = t.text();
  out.report["original"] = to_json(stage1.report);
  out.report["predicted"] = to_json(stage2.report);

  nlohmann::ordered_json diff;
  diff["aer"] = stage2.report.aer.mean - stage1.report.aer.mean;
  diff["aal"] = stage2.report.aal.mean - stage1.report.aal.mean;
  diff["mb"] = stage2.report.mb.mean - stage1.report.mb.mean;
  diff["mlral"] = stage2.report.mlral.mean - stage1.report.mlral.mean;
  auto per_task = nlohmann::ordered_json::object();
  std::vector<MetricRow> diff_rows;
  for (std::size_t k = 0; k < truth.n_tasks(); ++k) {
    const auto& a = stage1.report.macro_f1[k];
    const auto& b = stage2.report.macro_f1[k];
    if (a.n == 0 || b.n == 0) {
      per_task[truth.task_ids()[k]] = nullptr;
      continue;
    }
    per_task[truth.task_ids()[k]] = b.mean - a.mean;
    diff_rows.push_back({out.scenario, "difference", "mean", truth.task_ids()[k], "macro_f1", b.mean - a.mean});
  }
  diff["macro_f1"] = std::move(per_task);
  out.report["difference"] = std::move(diff);
  out.report["significance"] = variant_significance({{"original", &stage1.report}, {"predicted", &stage2.report}}, cfg.alpha);

  append_rows(out.rows, out.scenario, "original", stage1.report);
  append_rows(out.rows, out.scenario, "predicted", stage2.report);
  for (const char* m : {"aer", "aal", "mb", "mlral"}) {
    out.rows.push_back({out.scenario, "difference", "mean", "*", m, out.report["difference"][m].get<double>()});
  }
  out.rows.insert(out.rows.end(), diff_rows.begin(), diff_rows.end());
  out.files["plotdata/self_supervised.csv"] =
      summary_plot({{"original", &stage1.report}, {"predicted", &stage2.report}});
  return out;
}

ScenarioOutput run_incremental(const ScenarioData& data, const ScenarioConfig& cfg, const ScenarioHooks& hooks) {
  const Threshold t = cfg.effective_thresholds().front();
  const VtlLabels truth = binarize(data.matrix, t);
  const Trainer trainer = pick(std::nullopt, hooks, cfg);

  std::vector<std::pair<std::string, AggregateReport>> runs;
  for (auto k : cfg.train_fold_counts) {
    auto opts = cv_options(cfg);
    opts.train_folds = k;
    runs.emplace_back(fmt::format("folds={}", k), cross_validate(data, truth, truth, trainer, opts).report);
  }

  ScenarioOutput out;
  out.scenario = "incremental";
  out.report = header(data, ScenarioKind::incremental);
  out.report["threshold"] = t.text();
  auto by_size = nlohmann::ordered_json::object();
  std::vector<std::pair<std::string, const AggregateReport*>> views;
  for (const auto& [name, r] : runs) {
    by_size[name] = to_json(r);
    append_rows(out.rows, out.scenario, name, r);
    views.emplace_back(name, &r);
  }
  out.report["by_train_folds"] = std::move(by_size);
  out.report["significance"] = variant_significance(views, cfg.alpha);
  out.files["plotdata/incremental.csv"] = summary_plot(views);
  return out;
}

ScenarioOutput run_threshold_sweep(const ScenarioData& data, const ScenarioConfig& cfg, const ScenarioHooks& hooks) {
  const Trainer trainer = pick(std::nullopt, hooks, cfg);
  std::vector<std::pair<std::string, AggregateReport>> runs;
  std::vector<std::size_t> invaluable;
  for (const auto& t : cfg.effective_thresholds()) {
    const VtlLabels truth = binarize(data.matrix, t);
    invaluable.push_back(truth.count_defined() - truth.count_valuable());
    runs.emplace_back("t=" + t.text(), cross_validate(data, truth, truth, trainer, cv_options(cfg)).report);
  }

  ScenarioOutput out;
  out.scenario = "threshold_sweep";
  out.report = header(data, ScenarioKind::threshold_sweep);
  auto by_t = nlohmann::ordered_json::object();
  std::vector<std::pair<std::string, const AggregateReport*>> views;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    auto j = to_json(runs[i].second);
    j["ground_truth_invaluable_cells"] = invaluable[i];
    by_t[runs[i].first] = std::move(j);
    append_rows(out.rows, out.scenario, runs[i].first, runs[i].second);
    out.rows.push_back({out.scenario, runs[i].first, "all", "*", "n_invaluable_truth", static_cast<double>(invaluable[i])});
    views.emplace_back(runs[i].first, &runs[i].second);
  }
  out.report["by_threshold"] = std::move(by_t);
  out.report["significance"] = variant_significance(views, cfg.alpha);
  out.files["plotdata/threshold_sweep.csv"] = summary_plot(views);
  return out;
}

ScenarioOutput run_single_vs_multi(const ScenarioData& data, const ScenarioConfig& cfg, const ScenarioHooks&) {
  if (data.corpus->n_tasks() < 2) {
    throw data_error("TooFewTasks", fmt::format("single_vs_multi needs at least 2 tasks, corpus has {}", data.corpus->n_tasks()));
  }
  const Threshold t = cfg.effective_thresholds().front();
  const VtlLabels truth = binarize(data.matrix, t);
  const auto single = cross_validate(data, truth, truth, builtin_trainer(ModelMode::single_task, cfg.train), cv_options(cfg));
  const auto multi = cross_validate(data, truth, truth, builtin_trainer(ModelMode::multi_task, cfg.train), cv_options(cfg));

  ScenarioOutput out;
  out.scenario = "single_vs_multi";
  out.report = header(data, ScenarioKind::single_vs_multi);
  out.report["threshold"] = t.text();
  out.report["single_task"] = to_json(single.report);
  out.report["multi_task"] = to_json(multi.report);
  auto delta = nlohmann::ordered_json::object();
  auto sig = nlohmann::ordered_json::object();
  const std::size_t K = truth.n_tasks();
  for (std::size_t k = 0; k < K; ++k) {
    const auto& id = truth.task_ids()[k];
    const auto& s = single.report.macro_f1[k];
    const auto& m = multi.report.macro_f1[k];
    if (s.n && m.n) {
      delta[id] = m.mean - s.mean;
      out.rows.push_back({out.scenario, "delta", "mean", id, "macro_f1", m.mean - s.mean});
    } else {
      delta[id] = nullptr;
    }
    const auto a = fold_values(single.report, k, false), b = fold_values(multi.report, k, false);
    sig[id] = a.size() >= 3 && b.size() >= 3 ? stats::to_json(stats::compare(a, b, cfg.alpha, K))
                                             : nlohmann::ordered_json(nullptr);
  }
  out.report["macro_f1_delta"] = std::move(delta);
  out.report["significance"] = {{"macro_f1", std::move(sig)}};
  std::vector<MetricRow> rows;
  append_rows(rows, out.scenario, "single_task", single.report);
  append_rows(rows, out.scenario, "multi_task", multi.report);
  rows.insert(rows.end(), out.rows.begin(), out.rows.end());
  out.rows = std::move(rows);
  out.files["plotdata/single_vs_multi.csv"] =
      summary_plot({{"single_task", &single.report}, {"multi_task", &multi.report}});
  return out;
}

ScenarioOutput run_diversity_grid(const ScenarioData& data, const ScenarioConfig& cfg) {
  DiversityOptions o;
  o.texts = cfg.grid_texts;
  o.annotations = cfg.grid_annotations;
  o.folds = cfg.grid_folds;
  o.lambda = cfg.ridge_lambda;
  o.seed = cfg.seed;
  o.jobs = cfg.jobs;
  const auto grid = diversity_grid(*data.corpus, data.features, o);

  ScenarioOutput out;
  out.scenario = "diversity_grid";
  out.report = header(data, ScenarioKind::diversity_grid);
  auto cells = nlohmann::ordered_json::array();
  std::ostringstream plot;
  csv::write_row(plot, {"m_texts", "n_annotations", "feasible", "r2"});
  for (const auto& c : grid.cells) {
    nlohmann::ordered_json j;
    j["m_texts"] = c.m;
    j["n_annotations"] = c.n;
    j["feasible"] = c.feasible;
    j["r2"] = c.feasible && !std::isnan(c.r2) ? nlohmann::ordered_json(c.r2) : nlohmann::ordered_json(nullptr);
    cells.push_back(std::move(j));
    csv::write_row(plot, {std::to_string(c.m), std::to_string(c.n), c.feasible ? "1" : "0",
                          c.feasible ? format_number(c.r2) : ""});
    if (!c.feasible) continue;
    const std::string variant = fmt::format("M={};N={}", c.m, c.n);
    for (std::size_t f = 0; f < c.r2_per_fold.size(); ++f) {
      out.rows.push_back({out.scenario, variant, std::to_string(f), "*", "r2", c.r2_per_fold[f]});
    }
    out.rows.push_back({out.scenario, variant, "mean", "*", "r2", c.r2});
  }
  out.report["folds"] = cfg.grid_folds;
  out.report["cells"] = std::move(cells);
  out.files["grid.csv"] = grid_csv(grid);
  out.files["plotdata/diversity_grid.csv"] = plot.str();
  return out;
}

SimulationResult simulate_acquisition(const Corpus& seed_corpus, const Corpus& candidates, const Threshold& t,
                                      const Trainer& trainer, std::uint64_t seed, double validation_fraction,
                                      double price, std::optional<double> annotators_per_text) {
  check_same_schema(seed_corpus, candidates);
  const FeatureCache seed_features(seed_corpus);
  const VtlLabels seed_labels = binarize(compute_fractions(seed_corpus), t);

  std::vector<std::size_t> rows;
  for (std::size_t d = 0; d < seed_labels.n_texts(); ++d) {
    if (seed_labels.row_has_defined(d)) rows.push_back(d);
  }
  std::mt19937_64 rng(derive_seed(seed, kSimulateStream, 0));
  shuffle(std::span<std::size_t>(rows), rng);
  const auto n_val = static_cast<std::size_t>(std::floor(validation_fraction * static_cast<double>(rows.size())));
  FoldContext ctx;
  ctx.features = &seed_features;
  ctx.labels = &seed_labels;
  ctx.val_rows.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_val));
  ctx.train_rows.assign(rows.begin() + static_cast<std::ptrdiff_t>(n_val), rows.end());
  std::sort(ctx.val_rows.begin(), ctx.val_rows.end());
  std::sort(ctx.train_rows.begin(), ctx.train_rows.end());
  ctx.seed = derive_seed(seed, kSimulateStream, 1);
  const Predictor predict = trainer(ctx);

  const FeatureCache cand_features(candidates);
  std::vector<std::size_t> all(candidates.n_texts());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  SimulationResult r;
  r.predictions = predict(cand_features, all);
  r.plan = make_plan(r.predictions);
  r.report = evaluate(binarize(compute_fractions(candidates), t), r.predictions);
  const double apt = annotators_per_text ? *annotators_per_text : profile(candidates).avg_annotations_per_text;
  r.cost = estimate_cost(r.plan, price, apt);
  return r;
}

ScenarioOutput run_simulate(const Corpus& corpus, const ScenarioConfig& cfg, const ScenarioHooks& hooks) {
  std::optional<std::pair<Corpus, Corpus>> split;
  const Corpus* seed_corpus = &corpus;
  const Corpus* candidates = hooks.candidates;
  if (!candidates) {
    split = split_corpus(corpus, cfg.seed_fraction, derive_seed(cfg.seed, kSimulateStream, 2));
    seed_corpus = &split->first;
    candidates = &split->second;
  }
  const Threshold t = cfg.effective_thresholds().front();
  const auto sim = simulate_acquisition(*seed_corpus, *candidates, t, pick(std::nullopt, hooks, cfg), cfg.seed,
                                        cfg.validation_fraction, cfg.price, cfg.annotators_per_text);

  ScenarioOutput out;
  out.scenario = "simulate";
  out.report["scenario"] = "simulate";
  out.report["threshold"] = t.text();
  out.report["seed_texts"] = seed_corpus->n_texts();
  out.report["candidate_texts"] = candidates->n_texts();
  out.report["plan"] = {{"n_human_cells", sim.plan.n_human_cells}, {"n_auto_cells", sim.plan.n_auto_cells}};
  out.report["result"] = to_json(sim.report);
  out.report["cost"] = to_json(sim.cost);
  out.report["significance"] = nlohmann::ordered_json::object();  // a single run has no samples to compare
  append_rows(out.rows, out.scenario, "plan", aggregate({sim.report}));
  std::ostringstream plan;
  write_plan_csv(plan, sim.plan);
  out.files["plan.csv"] = plan.str();
  std::ostringstream plot;
  csv::write_row(plot, {"text_id", "human_cells"});
  for (std::size_t d = 0; d < sim.plan.text_ids.size(); ++d) {
    csv::write_row(plot, {sim.plan.text_ids[d], std::to_string(sim.plan.human_per_text[d])});
  }
  out.files["plotdata/simulate.csv"] = plot.str();
  return out;
}

ScenarioOutput run_scenario(const Corpus& corpus, const ScenarioConfig& cfg, const ScenarioHooks& hooks) {
  if (cfg.scenario == ScenarioKind::simulate) return run_simulate(corpus, cfg, hooks);
  const ScenarioData data(corpus);
  switch (cfg.scenario) {
    case ScenarioKind::plain_cv: return run_plain_cv(data, cfg, hooks);
    case ScenarioKind::self_supervised: return run_self_supervised(data, cfg, hooks);
    case ScenarioKind::incremental: return run_incremental(data, cfg, hooks);
    case ScenarioKind::threshold_sweep: return run_threshold_sweep(data, cfg, hooks);
    case ScenarioKind::single_vs_multi: return run_single_vs_multi(data, cfg, hooks);
    case ScenarioKind::diversity_grid: return run_diversity_grid(data, cfg);
    case ScenarioKind::simulate: break;
  }
  throw config_error("InvalidConfig", "unknown scenario");
}

}  // namespace acqsim

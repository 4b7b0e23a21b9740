#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "acqsim/acquisition.hpp"
#include "acqsim/corpus.hpp"
#include "acqsim/features.hpp"
#include "acqsim/folds.hpp"
#include "acqsim/metrics.hpp"
#include "acqsim/prediction_set.hpp"
#include "acqsim/predictor.hpp"
#include "acqsim/vtl.hpp"

namespace acqsim {

// ---------------------------------------------------------------------------
// Configuration

enum class ScenarioKind { plain_cv, self_supervised, incremental, threshold_sweep, single_vs_multi, diversity_grid, simulate };

std::string_view to_string(ScenarioKind k);
std::optional<ScenarioKind> parse_scenario_kind(std::string_view s);

inline constexpr const char* kDefaultThreshold = "0.25";
std::vector<Threshold> default_sweep_thresholds();

struct ScenarioConfig {
  ScenarioKind scenario = ScenarioKind::plain_cv;
  /// Empty = scenario default ({0.10, 0.15, 0.20, 0.25} for the sweep, 0.25 otherwise).
  std::vector<Threshold> thresholds;
  std::vector<std::size_t> train_fold_counts{1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<std::size_t> grid_texts{25, 50, 100, 150};
  std::vector<std::size_t> grid_annotations{100, 200, 400, 800, 1200};
  std::size_t n_folds = 10;
  std::size_t grid_folds = 5;
  double ridge_lambda = 10.0;
  std::uint64_t seed = 0;
  /// 0 = all cores. Never changes results.
  std::size_t jobs = 0;
  ModelMode mode = ModelMode::multi_task;
  TrainConfig train;
  double alpha = 0.05;
  /// simulate: share of texts kept as the seed corpus when no candidate
  /// corpus is given, and the validation share of the seed corpus.
  double seed_fraction = 0.2;
  double validation_fraction = 0.1;
  /// simulate / cost.
  double price = 0.012;
  std::optional<double> annotators_per_text;
  /// Generate the corpus instead of reading one.
  std::optional<SyntheticSpec> synthetic;

  /// Thresholds after applying the scenario default.
  std::vector<Threshold> effective_thresholds() const;
};

/// Throws ConfigError InvalidConfig / ThresholdOutOfRange.
ScenarioConfig parse_scenario_config(const nlohmann::json& j, ScenarioConfig base = {});
nlohmann::ordered_json to_json(const ScenarioConfig& c);

// ---------------------------------------------------------------------------
// Trainers: anything that turns a training split into a VTL predictor.

/// Predicts the given rows of a feature cache.
using Predictor = std::function<PredictionSet(const FeatureCache& features, std::span<const std::size_t> rows)>;

struct FoldContext {
  const FeatureCache* features = nullptr;
  const VtlLabels* labels = nullptr;  // training targets, rows aligned with features
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> val_rows;
  std::uint64_t seed = 0;
};

using Trainer = std::function<Predictor(const FoldContext&)>;

/// The built-in hashed-feature model.
Trainer builtin_trainer(ModelMode mode, const TrainConfig& config);
/// Looks the answer up in `truth` by text id; undefined cells predict 1.
Trainer oracle_trainer(const VtlLabels& truth);
/// Predicts `bit` everywhere.
Trainer constant_trainer(std::uint8_t bit);
/// Serves fixed (e.g. imported) predictions by text id.
Trainer fixed_trainer(const PredictionSet& predictions);

// ---------------------------------------------------------------------------
// Cross-validation core

/// Corpus plus everything derived from it once and shared read-only.
struct ScenarioData {
  const Corpus* corpus = nullptr;
  FeatureCache features;
  VtlMatrix matrix;

  explicit ScenarioData(const Corpus& c);
};

struct CvOptions {
  std::size_t n_folds = 10;
  std::uint64_t seed = 0;
  std::size_t jobs = 0;
  /// Keep only the first n training folds (incremental runs).
  std::optional<std::size_t> train_folds;
};

struct CvResult {
  AggregateReport report;
  /// Test-fold predictions for every corpus text with a defined cell; other
  /// rows carry bit 1.
  PredictionSet out_of_fold;
};

/// Folds are drawn over texts with a defined cell in `truth` using
/// derive_seed(seed, split stream); fold i trains with derive_seed(seed, i).
/// Models learn from `train_labels` and are scored against `truth`.
CvResult cross_validate(const ScenarioData& data, const VtlLabels& truth, const VtlLabels& train_labels,
                        const Trainer& trainer, const CvOptions& options);

/// The fold partition cross_validate uses for `truth`.
FoldPlan cv_folds(const VtlLabels& truth, std::size_t n_folds, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Scenario results

struct ScenarioOutput {
  std::string scenario;
  nlohmann::ordered_json report;
  std::vector<MetricRow> rows;
  /// Extra files relative to the output directory (grid.csv, plan.csv,
  /// plotdata/*.csv) and their contents.
  std::map<std::string, std::string> files;
};

/// Optional replacements for the built-in model.
struct ScenarioHooks {
  std::optional<Trainer> trainer;        // every stage unless overridden below
  std::optional<Trainer> stage1_trainer;  // self_supervised stage 1
  std::optional<Trainer> stage2_trainer;  // self_supervised stage 2
  const Corpus* candidates = nullptr;    // simulate: held-out pool with ground truth
};

ScenarioOutput run_plain_cv(const ScenarioData& data, const ScenarioConfig& cfg, const ScenarioHooks& hooks = {});
ScenarioOutput run_self_supervised(const ScenarioData& data, const ScenarioConfig& cfg, const ScenarioHooks& hooks = {});
ScenarioOutput run_incremental(const ScenarioData& data, const ScenarioConfig& cfg, const ScenarioHooks& hooks = {});
ScenarioOutput run_threshold_sweep(const ScenarioData& data, const ScenarioConfig& cfg, const ScenarioHooks& hooks = {});
/// Throws DataError TooFewTasks when the corpus has fewer than 2 tasks.
ScenarioOutput run_single_vs_multi(const ScenarioData& data, const ScenarioConfig& cfg, const ScenarioHooks& hooks = {});
ScenarioOutput run_diversity_grid(const ScenarioData& data, const ScenarioConfig& cfg);
ScenarioOutput run_simulate(const Corpus& corpus, const ScenarioConfig& cfg, const ScenarioHooks& hooks = {});

struct SimulationResult {
  PredictionSet predictions;
  AcquisitionPlan plan;
  MetricReport report;
  CostReport cost;
};

/// Trains on `seed_corpus` (a `validation_fraction` share held out for early
/// stopping), routes every candidate cell and scores the plan against the
/// candidates' own VTL labels at `t`. Throws DataError SchemaMismatch.
SimulationResult simulate_acquisition(const Corpus& seed_corpus, const Corpus& candidates, const Threshold& t,
                                      const Trainer& trainer, std::uint64_t seed, double validation_fraction,
                                      double price, std::optional<double> annotators_per_text);

/// Dispatches on cfg.scenario.
ScenarioOutput run_scenario(const Corpus& corpus, const ScenarioConfig& cfg, const ScenarioHooks& hooks = {});

/// Writes report.json, metrics.csv and the extra files into `dir`.
void write_scenario_output(const std::filesystem::path& dir, const ScenarioOutput& out);
std::string metrics_csv(const ScenarioOutput& out);

}  // namespace acqsim

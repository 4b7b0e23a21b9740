#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "acqsim/features.hpp"
#include "acqsim/prediction_set.hpp"
#include "acqsim/vtl.hpp"

namespace acqsim {

enum class ModelMode { single_task, multi_task };

std::string_view to_string(ModelMode m);
/// Accepts "single", "single_task", "multi", "multi_task".
std::optional<ModelMode> parse_model_mode(std::string_view s);

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  double learning_rate = 5.0;
  double weight_decay = 1e-4;
  /// Epochs without validation macro-F1 improvement before stopping; 0 disables.
  std::size_t patience = 10;
  /// Inverse-frequency class weights in the loss.
  bool class_weighting = false;
  /// Width of the shared linear layer in multi-task mode.
  std::size_t bottleneck = 64;
  /// Initial head weights in multi-task mode are N(0, std^2). W starts at zero,
  /// so small heads stall the first epochs.
  double head_init_std = 1.0;
};

TrainConfig parse_train_config(const nlohmann::json& j, TrainConfig base = {});
nlohmann::ordered_json to_json(const TrainConfig& c);

/// Sparse rows of `width` doubles keyed by hashed feature index. Missing rows
/// read as zero.
class WeightRows {
 public:
  explicit WeightRows(std::size_t width = 1) : width_(width) {}

  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return keys_.size(); }
  const std::vector<std::uint32_t>& keys() const noexcept { return keys_; }

  /// Slot of `feature`, or -1.
  std::ptrdiff_t slot(std::uint32_t feature) const;
  std::size_t ensure(std::uint32_t feature);

  double* row(std::size_t slot) { return data_.data() + slot * width_; }
  const double* row(std::size_t slot) const { return data_.data() + slot * width_; }
  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  /// Same keys and values, regardless of slot order.
  bool same_as(const WeightRows& other) const;

 private:
  std::size_t width_;
  std::unordered_map<std::uint32_t, std::uint32_t> slot_of_;
  std::vector<std::uint32_t> keys_;
  std::vector<double> data_;
};

/// Per-task class weights {w_negative, w_positive}.
using ClassWeights = std::vector<std::array<double, 2>>;

/// Predicts VTL bits per task from hashed text features.
///
/// single_task: one independent logistic regression per task.
/// multi_task:  a shared linear map (features -> bottleneck) feeding one
///              logistic head per task.
class VtlModel {
 public:
  VtlModel() = default;
  VtlModel(ModelMode mode, std::vector<std::string> task_ids, const TrainConfig& config, std::uint64_t seed);

  ModelMode mode() const noexcept { return mode_; }
  const std::vector<std::string>& task_ids() const noexcept { return task_ids_; }
  std::size_t n_heads() const noexcept { return task_ids_.size(); }
  std::size_t bottleneck() const noexcept { return bottleneck_; }
  std::uint64_t seed() const noexcept { return seed_; }

  /// Pre-sigmoid activations, one per head.
  void logits(const FeatureVector& x, std::span<double> out) const;
  std::vector<double> scores(const FeatureVector& x) const;

  /// Allocates weight rows for every feature of `x` (zero-initialized).
  void ensure_features(const FeatureVector& x);

  /// Same structure with every parameter zero.
  VtlModel zeros_like() const;

  /// Every scalar parameter in a fixed order (rows in slot order, then head
  /// weights, then biases). Two models from zeros_like() align element-wise.
  std::vector<double*> parameters();
  std::vector<const double*> parameters() const;

  bool all_finite() const;

  nlohmann::ordered_json to_json() const;
  static VtlModel from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static VtlModel load(const std::filesystem::path& path);

  bool operator==(const VtlModel& other) const;

  /// Replace head `h` with head 0 of a one-task single-mode model.
  void adopt_head(std::size_t h, VtlModel&& one_task);

 private:
  friend class GradientAccess;

  ModelMode mode_ = ModelMode::multi_task;
  std::vector<std::string> task_ids_;
  std::size_t bottleneck_ = 0;
  std::uint64_t seed_ = 0;

  std::vector<WeightRows> task_weights_;  // single_task: width-1 rows per task
  WeightRows shared_{1};                  // multi_task: width = bottleneck
  std::vector<double> head_weights_;      // multi_task: n_heads x bottleneck
  std::vector<double> biases_;
};

/// A batch for loss evaluation: row r of `labels` supervises features x[i]
/// for rows[i]; head h reads label column columns[h].
struct LabeledBatch {
  std::vector<const FeatureVector*> x;
  const VtlLabels* labels = nullptr;
  std::vector<std::size_t> rows;
  std::vector<std::size_t> columns;
};

/// Mean over batch examples of the (optionally class-weighted) binary
/// cross-entropy summed over heads with defined labels.
double vtl_loss(const VtlModel& model, const LabeledBatch& batch, const ClassWeights& weights = {});

/// Analytic gradient of vtl_loss, shaped like zeros_like(model). The model
/// must already hold rows for every batch feature (ensure_features).
VtlModel vtl_gradient(const VtlModel& model, const LabeledBatch& batch, const ClassWeights& weights = {});

/// Inverse-frequency weights {n / (2 n0), n / (2 n1)} per column over `rows`.
ClassWeights inverse_frequency_weights(const VtlLabels& labels, std::span<const std::size_t> rows,
                                       std::span<const std::size_t> columns);

struct TrainingData {
  const FeatureCache* features = nullptr;
  const VtlLabels* labels = nullptr;  // rows aligned with features
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> val_rows;
};

struct TrainTrace {
  /// Mean training loss after each epoch (multi_task), or per head
  /// (single_task: loss_per_head[h][epoch]).
  std::vector<std::vector<double>> loss_per_head;
  std::vector<std::size_t> best_epoch_per_head;
};

/// Mini-batch gradient descent with L2 weight decay and early stopping on
/// validation macro-F1. Deterministic in (data, mode, config, seed).
/// Throws DataError EmptyTrainingSet / NoDefinedLabels.
VtlModel train_vtl(const TrainingData& data, ModelMode mode, const TrainConfig& config, std::uint64_t seed,
                   TrainTrace* trace = nullptr);

PredictionSet predict_vtl(const VtlModel& model, const FeatureCache& features, std::span<const std::size_t> rows);
PredictionSet predict_vtl(const VtlModel& model, const FeatureCache& features);
PredictionSet predict_vtl(const VtlModel& model, std::span<const TextDoc> texts);
/// Row-by-row reference for the parallel predict kernel.
PredictionSet predict_vtl_serial(const VtlModel& model, const FeatureCache& features,
                                 std::span<const std::size_t> rows);

/// Reads `text_id,task,bit[,score]`; must cover the grid exactly. Missing
/// score defaults to the bit; a present score decides the bit (>= 0.5).
/// Throws DataError MissingCell / DuplicateCell / UnknownCell / MalformedRow.
PredictionSet import_predictions(std::istream& in, const std::vector<std::string>& text_ids,
                                 const std::vector<std::string>& task_ids);
PredictionSet import_predictions(const std::filesystem::path& path, const std::vector<std::string>& text_ids,
                                 const std::vector<std::string>& task_ids);

void write_predictions_csv(std::ostream& out, const PredictionSet& p);

}  // namespace acqsim

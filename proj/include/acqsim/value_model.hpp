#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "acqsim/corpus.hpp"
#include "acqsim/features.hpp"

namespace acqsim {

/// Feature index of an annotator's one-hot entry, placed after the text block.
std::uint32_t annotator_feature(std::string_view annotator_id);

/// One training example: a text's features, who labeled it, and the grade.
struct ValueExample {
  const FeatureVector* text = nullptr;
  std::uint32_t annotator_feature = 0;
  double value = 0.0;
};

/// Per-task ridge regression over text features plus a hashed annotator
/// one-hot block, a linear reading of a personalized per-user model.
/// Predictions are clipped to each task's value range.
class ValueModel {
 public:
  ValueModel() = default;

  /// examples[k] trains task k; the intercept is not penalized. Tasks with no
  /// examples predict the clipped 0.
  static ValueModel fit(std::span<const TaskSchema> tasks, const std::vector<std::vector<ValueExample>>& examples,
                        double lambda);

  std::size_t n_tasks() const noexcept { return tasks_.size(); }
  const std::vector<TaskSchema>& tasks() const noexcept { return tasks_; }

  double predict(const FeatureVector& text, std::uint32_t annotator_feature, std::size_t task) const;
  double predict(const FeatureVector& text, std::string_view annotator_id, std::size_t task) const;
  /// Throws DataError UnknownTask.
  double predict(const FeatureVector& text, std::string_view annotator_id, const std::string& task_id) const;

 private:
  struct Head {
    double intercept = 0.0;
    std::unordered_map<std::uint32_t, double> weights;
  };
  std::vector<TaskSchema> tasks_;
  std::vector<Head> heads_;
};

/// Trains on the records of `annotations` (indices into corpus.annotations()).
ValueModel train_value_model(const Corpus& corpus, const FeatureCache& features,
                             std::span<const std::uint32_t> annotations, double lambda = 10.0);

}  // namespace acqsim

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace acqsim {

inline constexpr double kDecisionThreshold = 0.5;

/// Predicted VTL bit and raw score per (text, task); bit = [score >= 0.5].
struct PredictionSet {
  std::vector<std::string> text_ids;
  std::vector<std::string> task_ids;
  std::vector<std::uint8_t> bits;
  std::vector<double> scores;

  PredictionSet() = default;
  PredictionSet(std::vector<std::string> texts, std::vector<std::string> tasks)
      : text_ids(std::move(texts)), task_ids(std::move(tasks)) {
    bits.assign(text_ids.size() * task_ids.size(), 0);
    scores.assign(bits.size(), 0.0);
  }

  std::size_t n_texts() const noexcept { return text_ids.size(); }
  std::size_t n_tasks() const noexcept { return task_ids.size(); }

  std::uint8_t bit(std::size_t text, std::size_t task) const { return bits[text * n_tasks() + task]; }
  double score(std::size_t text, std::size_t task) const { return scores[text * n_tasks() + task]; }

  void set_score(std::size_t text, std::size_t task, double s) {
    scores[text * n_tasks() + task] = s;
    bits[text * n_tasks() + task] = s >= kDecisionThreshold ? 1 : 0;
  }

  PredictionSet select_rows(std::span<const std::size_t> rows) const {
    std::vector<std::string> ids;
    for (auto r : rows) ids.push_back(text_ids[r]);
    PredictionSet out(std::move(ids), task_ids);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t k = 0; k < n_tasks(); ++k) {
        out.bits[i * n_tasks() + k] = bit(rows[i], k);
        out.scores[i * n_tasks() + k] = score(rows[i], k);
      }
    }
    return out;
  }

  bool operator==(const PredictionSet&) const = default;
};

}  // namespace acqsim

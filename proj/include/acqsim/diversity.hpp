#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "acqsim/corpus.hpp"
#include "acqsim/features.hpp"

namespace acqsim {

/// One annotator's labels on one text: the unit the undersampling budget counts.
struct AnnotationUnit {
  std::uint32_t text = 0;
  std::uint32_t annotator = 0;
  bool operator==(const AnnotationUnit&) const = default;
};

/// Units of `text` in ingestion order (order of each annotator's first record).
std::vector<AnnotationUnit> units_of_text(const Corpus& corpus, std::size_t text);

/// `pool` sorted by unit count descending, ties by ascending text_id.
std::vector<std::size_t> rank_by_annotations(const Corpus& corpus, std::span<const std::size_t> pool);

struct RoundRobinSample {
  bool feasible = false;
  std::vector<std::size_t> texts;  // the top-M texts in pass order
  std::vector<AnnotationUnit> units;
};

/// Top-M texts of `pool`, then one unit per text per pass until N are taken.
/// Infeasible when M exceeds the pool or N is not below the top-M unit total.
RoundRobinSample round_robin_sample(const Corpus& corpus, std::span<const std::size_t> pool, std::size_t m,
                                    std::size_t n);

struct GridCell {
  std::size_t m = 0;
  std::size_t n = 0;
  bool feasible = false;
  /// Mean over folds of the task-averaged R^2; NaN if no fold had a defined R^2.
  double r2 = 0.0;
  std::vector<double> r2_per_fold;
};

struct DiversityGrid {
  std::vector<std::size_t> texts;        // M values (columns)
  std::vector<std::size_t> annotations;  // N values (rows)
  std::vector<GridCell> cells;           // row-major: annotations x texts

  const GridCell& at(std::size_t n_index, std::size_t m_index) const { return cells[n_index * texts.size() + m_index]; }
};

struct DiversityOptions {
  std::vector<std::size_t> texts;
  std::vector<std::size_t> annotations;
  std::size_t folds = 5;
  double lambda = 10.0;
  std::uint64_t seed = 0;
  std::size_t jobs = 0;
};

/// Text-level folds; per fold and cell, undersample the training folds, fit a
/// ValueModel and score R^2 per task on every record of the test fold.
DiversityGrid diversity_grid(const Corpus& corpus, const FeatureCache& features, const DiversityOptions& options);

/// Table with one row per N and one column per M; infeasible cells are "--".
std::string grid_csv(const DiversityGrid& grid);

}  // namespace acqsim

#include "acqsim/diversity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "acqsim/csv.hpp"
#include "acqsim/errors.hpp"
#include "acqsim/folds.hpp"
#include "acqsim/metrics.hpp"
#include "acqsim/seeding.hpp"
#include "acqsim/value_model.hpp"

namespace acqsim {

std::vector<AnnotationUnit> units_of_text(const Corpus& corpus, std::size_t text) {
  std::vector<AnnotationUnit> units;
  for (auto i : corpus.annotations_of_text(text)) {
    const auto annotator = corpus.annotations()[i].annotator;
    const bool seen = std::any_of(units.begin(), units.end(), [&](const auto& u) { return u.annotator == annotator; });
    if (!seen) units.push_back({static_cast<std::uint32_t>(text), annotator});
  }
  return units;
}

namespace {

std::size_t unit_count(const Corpus& corpus, std::size_t text) { return units_of_text(corpus, text).size(); }

}  // namespace

std::vector<std::size_t> rank_by_annotations(const Corpus& corpus, std::span<const std::size_t> pool) {
  std::vector<std::pair<std::size_t, std::size_t>> keyed;  // (count, text)
  for (auto t : pool) keyed.emplace_back(unit_count(corpus, t), t);
  std::sort(keyed.begin(), keyed.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return corpus.texts()[a.second].text_id < corpus.texts()[b.second].text_id;
  });
  std::vector<std::size_t> out;
  for (const auto& [count, t] : keyed) out.push_back(t);
  return out;
}

RoundRobinSample round_robin_sample(const Corpus& corpus, std::span<const std::size_t> pool, std::size_t m,
                                    std::size_t n) {
  RoundRobinSample s;
  if (m == 0 || m > pool.size()) return s;
  auto ranked = rank_by_annotations(corpus, pool);
  ranked.resize(m);
  std::vector<std::vector<AnnotationUnit>> units;
  std::size_t total = 0;
  for (auto t : ranked) {
    units.push_back(units_of_text(corpus, t));
    total += units.back().size();
  }
  if (n >= total) return s;
  s.feasible = true;
  s.texts = ranked;
  for (std::size_t pass = 0; s.units.size() < n; ++pass) {
    for (std::size_t i = 0; i < units.size() && s.units.size() < n; ++i) {
      if (pass < units[i].size()) s.units.push_back(units[i][pass]);
    }
  }
  return s;
}

DiversityGrid diversity_grid(const Corpus& corpus, const FeatureCache& features, const DiversityOptions& o) {
  DiversityGrid grid;
  grid.texts = o.texts;
  grid.annotations = o.annotations;
  const std::size_t n_cells = o.texts.size() * o.annotations.size();
  grid.cells.resize(n_cells);

  std::vector<std::size_t> annotated;
  for (std::size_t t = 0; t < corpus.n_texts(); ++t) {
    if (!corpus.annotations_of_text(t).empty()) annotated.push_back(t);
  }
  const FoldPlan folds(annotated, o.folds, derive_seed(o.seed, 0xD1E5, 0));

  // Unit -> record indices, so a sampled unit expands to all of its labels.
  std::vector<std::vector<std::uint32_t>> records_of(corpus.n_texts());
  for (std::size_t t = 0; t < corpus.n_texts(); ++t) {
    for (auto i : corpus.annotations_of_text(t)) records_of[t].push_back(i);
  }

  // One job per (cell, fold); every job owns its slot.
  const std::size_t n_jobs = n_cells * o.folds;
  std::vector<double> r2(n_jobs, std::numeric_limits<double>::quiet_NaN());
  std::vector<std::uint8_t> feasible(n_jobs, 0);
  parallel_for(n_jobs, o.jobs, [&](std::size_t job) {
    const std::size_t cell = job / o.folds, f = job % o.folds;
    const std::size_t m = o.texts[cell % o.texts.size()];
    const std::size_t n = o.annotations[cell / o.texts.size()];
    std::vector<std::size_t> pool;
    for (std::size_t g = 0; g < o.folds; ++g) {
      if (g != f) pool.insert(pool.end(), folds.fold(g).begin(), folds.fold(g).end());
    }
    const auto sample = round_robin_sample(corpus, pool, m, n);
    if (!sample.feasible) return;
    feasible[job] = 1;

    std::vector<std::uint32_t> train;
    for (const auto& u : sample.units) {
      for (auto i : records_of[u.text]) {
        if (corpus.annotations()[i].annotator == u.annotator) train.push_back(i);
      }
    }
    const auto model = train_value_model(corpus, features, train, o.lambda);

    std::vector<std::vector<double>> truth(corpus.n_tasks()), pred(corpus.n_tasks());
    for (auto t : folds.fold(f)) {
      for (auto i : records_of[t]) {
        const auto& a = corpus.annotations()[i];
        truth[a.task].push_back(a.value);
        pred[a.task].push_back(model.predict(features[t], corpus.annotator_ids()[a.annotator], a.task));
      }
    }
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t k = 0; k < corpus.n_tasks(); ++k) {
      try {
        sum += acqsim::r2(truth[k], pred[k]);
        ++used;
      } catch (const Error&) {
        // Constant or empty targets: R^2 undefined for this task.
      }
    }
    if (used) r2[job] = sum / static_cast<double>(used);
  });

  for (std::size_t cell = 0; cell < n_cells; ++cell) {
    auto& c = grid.cells[cell];
    c.m = o.texts[cell % o.texts.size()];
    c.n = o.annotations[cell / o.texts.size()];
    c.feasible = true;
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t f = 0; f < o.folds; ++f) {
      const std::size_t job = cell * o.folds + f;
      c.feasible = c.feasible && feasible[job];
      c.r2_per_fold.push_back(r2[job]);
      if (!std::isnan(r2[job])) {
        sum += r2[job];
        ++used;
      }
    }
    c.r2 = used ? sum / static_cast<double>(used) : std::numeric_limits<double>::quiet_NaN();
    if (!c.feasible) {
      c.r2 = std::numeric_limits<double>::quiet_NaN();
      c.r2_per_fold.clear();
    }
  }
  return grid;
}

std::string grid_csv(const DiversityGrid& grid) {
  std::ostringstream out;
  std::vector<std::string> row{"n_annotations"};
  for (auto m : grid.texts) row.push_back("M=" + std::to_string(m));
  csv::write_row(out, row);
  for (std::size_t i = 0; i < grid.annotations.size(); ++i) {
    row.assign(1, std::to_string(grid.annotations[i]));
    for (std::size_t j = 0; j < grid.texts.size(); ++j) {
      const auto& c = grid.at(i, j);
      row.push_back(c.feasible ? format_number(c.r2) : "--");
    }
    csv::write_row(out, row);
  }
  return out.str();
}

}  // namespace acqsim

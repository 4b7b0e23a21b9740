#pragma once

// Fixtures and independent oracles shared by the unit tests and the
// acceptance binary. Nothing here calls into the code under test except to
// build inputs.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <boost/multiprecision/cpp_int.hpp>

#include "acqsim/corpus.hpp"
#include "acqsim/prediction_set.hpp"
#include "acqsim/vtl.hpp"

namespace testing {

using acqsim::AnnotationRecord;
using acqsim::Corpus;
using acqsim::TaskSchema;
using acqsim::TextDoc;
using Q = boost::multiprecision::cpp_rational;

inline std::vector<TaskSchema> ordinal_tasks(std::size_t n, int hi = 10) {
  std::vector<TaskSchema> t;
  for (std::size_t k = 0; k < n; ++k) {
    t.push_back({"task" + std::to_string(k), "task" + std::to_string(k), 0, hi, acqsim::MlKind::ordinal});
  }
  return t;
}

inline std::vector<TextDoc> numbered_texts(std::size_t n) {
  std::vector<TextDoc> t;
  for (std::size_t d = 0; d < n; ++d) t.push_back({"t" + std::to_string(d), "text number " + std::to_string(d)});
  return t;
}

/// One task, one text, the given grades from annotators a0, a1, ...
inline Corpus single_cell(const std::vector<int>& grades) {
  std::vector<AnnotationRecord> r;
  for (std::size_t i = 0; i < grades.size(); ++i) r.push_back({"t0", "a" + std::to_string(i), "task0", grades[i]});
  return Corpus::build(numbered_texts(1), ordinal_tasks(1), r);
}

/// Random corpus: every (text, annotator, task) triple is present with
/// probability `coverage`; some cells end up empty on purpose.
inline Corpus random_corpus(std::mt19937_64& rng, std::size_t max_texts = 8, std::size_t max_tasks = 4,
                            std::size_t max_annotators = 6, double coverage = 0.7) {
  std::uniform_int_distribution<std::size_t> nt(1, max_texts), nk(1, max_tasks), na(1, max_annotators);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t n_texts = nt(rng), n_tasks = nk(rng), n_ann = na(rng);
  std::uniform_int_distribution<int> grade(0, 3);
  std::vector<AnnotationRecord> r;
  for (std::size_t d = 0; d < n_texts; ++d) {
    for (std::size_t a = 0; a < n_ann; ++a) {
      for (std::size_t k = 0; k < n_tasks; ++k) {
        if (u(rng) < coverage) {
          r.push_back({"t" + std::to_string(d), "a" + std::to_string(a), "task" + std::to_string(k), grade(rng)});
        }
      }
    }
  }
  return Corpus::build(numbered_texts(n_texts), ordinal_tasks(n_tasks, 3), r);
}

// ---------------------------------------------------------------------------
// Brute-force metric oracle: straight double sums over the grid in exact
// rationals, following the metric definitions one cell at a time.

struct OracleMetrics {
  Q aer, aal, mlral, mb;
  std::vector<Q> lal;
  std::vector<bool> lal_defined;
};

/// truth[d][k] in {0, 1, -1 (undefined)}; pred[d][k] in {0, 1}.
inline OracleMetrics oracle_metrics(const std::vector<std::vector<int>>& truth,
                                    const std::vector<std::vector<int>>& pred) {
  OracleMetrics m;
  const std::size_t n_tasks = truth.empty() ? 0 : truth[0].size();
  Q cells = 0, saved = 0, valuable = 0, lost = 0;
  for (std::size_t d = 0; d < truth.size(); ++d) {
    for (std::size_t k = 0; k < n_tasks; ++k) {
      if (truth[d][k] < 0) continue;
      cells += 1;
      if (truth[d][k] == 0 && pred[d][k] == truth[d][k]) saved += 1;
      if (truth[d][k] == 1) {
        valuable += 1;
        if (pred[d][k] != truth[d][k]) lost += 1;
      }
    }
  }
  m.aer = cells == 0 ? Q(0) : saved / cells;
  m.aal = valuable == 0 ? Q(0) : lost / valuable;
  m.mb = m.aer - m.aal;
  Q sum = 0;
  int included = 0;
  for (std::size_t k = 0; k < n_tasks; ++k) {
    Q v = 0, l = 0;
    for (std::size_t d = 0; d < truth.size(); ++d) {
      if (truth[d][k] == 1) {
        v += 1;
        if (pred[d][k] != 1) l += 1;
      }
    }
    m.lal_defined.push_back(v != 0);
    m.lal.push_back(v == 0 ? Q(0) : l / v);
    if (v != 0) {
      sum += m.lal.back();
      ++included;
    }
  }
  m.mlral = included ? sum / included : Q(0);
  return m;
}

inline acqsim::VtlLabels labels_from(const std::vector<std::vector<int>>& truth) {
  const std::size_t n_tasks = truth.empty() ? 0 : truth[0].size();
  std::vector<std::string> texts, tasks;
  for (std::size_t d = 0; d < truth.size(); ++d) texts.push_back("t" + std::to_string(d));
  for (std::size_t k = 0; k < n_tasks; ++k) tasks.push_back("task" + std::to_string(k));
  acqsim::VtlLabels l(texts, tasks, acqsim::Threshold::parse("0.25"));
  for (std::size_t d = 0; d < truth.size(); ++d) {
    for (std::size_t k = 0; k < n_tasks; ++k) {
      if (truth[d][k] >= 0) l.set(d, k, static_cast<std::uint8_t>(truth[d][k]));
    }
  }
  return l;
}

inline acqsim::PredictionSet predictions_from(const std::vector<std::vector<int>>& pred) {
  const std::size_t n_tasks = pred.empty() ? 0 : pred[0].size();
  std::vector<std::string> texts, tasks;
  for (std::size_t d = 0; d < pred.size(); ++d) texts.push_back("t" + std::to_string(d));
  for (std::size_t k = 0; k < n_tasks; ++k) tasks.push_back("task" + std::to_string(k));
  acqsim::PredictionSet p(texts, tasks);
  for (std::size_t d = 0; d < pred.size(); ++d) {
    for (std::size_t k = 0; k < n_tasks; ++k) p.set_score(d, k, pred[d][k] ? 1.0 : 0.0);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Files

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("acqsim_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& contents) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  f << contents;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace testing

#include "acqsim/value_model.hpp"

#include <algorithm>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>
#include <fmt/format.h>

#include "acqsim/errors.hpp"

namespace acqsim {

std::uint32_t annotator_feature(std::string_view annotator_id) {
  const std::uint64_t mask = (std::uint64_t{1} << kAnnotatorHashBits) - 1;
  return (std::uint32_t{1} << kTextHashBits) + static_cast<std::uint32_t>(fnv1a64(annotator_id) & mask);
}

ValueModel ValueModel::fit(std::span<const TaskSchema> tasks, const std::vector<std::vector<ValueExample>>& examples,
                           double lambda) {
  if (!(lambda > 0.0)) throw config_error("InvalidConfig", "ridge lambda must be positive");
  ValueModel m;
  m.tasks_.assign(tasks.begin(), tasks.end());
  m.heads_.resize(tasks.size());

  for (std::size_t k = 0; k < tasks.size(); ++k) {
    const auto& ex = examples[k];
    if (ex.empty()) continue;

    // Compact column ids for the features that occur; the last column is the
    // intercept.
    std::vector<std::uint32_t> keys;
    for (const auto& e : ex) {
      keys.insert(keys.end(), e.text->index.begin(), e.text->index.end());
      keys.push_back(e.annotator_feature);
    }
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    std::unordered_map<std::uint32_t, int> col;
    for (std::size_t c = 0; c < keys.size(); ++c) col.emplace(keys[c], static_cast<int>(c));
    const int p = static_cast<int>(keys.size()) + 1;
    const int intercept = p - 1;

    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd y(static_cast<Eigen::Index>(ex.size()));
    for (std::size_t i = 0; i < ex.size(); ++i) {
      const int row = static_cast<int>(i);
      for (std::size_t j = 0; j < ex[i].text->size(); ++j) {
        trip.emplace_back(row, col.at(ex[i].text->index[j]), ex[i].text->value[j]);
      }
      trip.emplace_back(row, col.at(ex[i].annotator_feature), 1.0);
      trip.emplace_back(row, intercept, 1.0);
      y[row] = ex[i].value;
    }
    Eigen::SparseMatrix<double> X(static_cast<Eigen::Index>(ex.size()), p);
    X.setFromTriplets(trip.begin(), trip.end());

    Eigen::SparseMatrix<double> A = (X.transpose() * X).pruned();
    for (int c = 0; c < intercept; ++c) A.coeffRef(c, c) += lambda;
    const Eigen::VectorXd b = X.transpose() * y;

    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(1e-12);
    cg.setMaxIterations(10 * p);
    cg.compute(A);
    const Eigen::VectorXd w = cg.solve(b);

    auto& head = m.heads_[k];
    head.intercept = w[intercept];
    for (std::size_t c = 0; c < keys.size(); ++c) {
      if (w[static_cast<Eigen::Index>(c)] != 0.0) head.weights.emplace(keys[c], w[static_cast<Eigen::Index>(c)]);
    }
  }
  return m;
}

double ValueModel::predict(const FeatureVector& text, std::uint32_t annotator, std::size_t task) const {
  const auto& head = heads_[task];
  double s = head.intercept;
  for (std::size_t j = 0; j < text.size(); ++j) {
    auto it = head.weights.find(text.index[j]);
    if (it != head.weights.end()) s += it->second * text.value[j];
  }
  if (auto it = head.weights.find(annotator); it != head.weights.end()) s += it->second;
  return std::clamp(s, static_cast<double>(tasks_[task].lo), static_cast<double>(tasks_[task].hi));
}

double ValueModel::predict(const FeatureVector& text, std::string_view annotator_id, std::size_t task) const {
  return predict(text, annotator_feature(annotator_id), task);
}

double ValueModel::predict(const FeatureVector& text, std::string_view annotator_id, const std::string& task_id) const {
  for (std::size_t k = 0; k < tasks_.size(); ++k) {
    if (tasks_[k].task_id == task_id) return predict(text, annotator_id, k);
  }
  throw data_error("UnknownTask", fmt::format("value model has no task '{}'", task_id));
}

ValueModel train_value_model(const Corpus& corpus, const FeatureCache& features,
                             std::span<const std::uint32_t> annotations, double lambda) {
  std::vector<std::uint32_t> annotator_col(corpus.annotator_ids().size());
  for (std::size_t a = 0; a < annotator_col.size(); ++a) annotator_col[a] = annotator_feature(corpus.annotator_ids()[a]);
  std::vector<std::vector<ValueExample>> ex(corpus.n_tasks());
  for (auto i : annotations) {
    const auto& a = corpus.annotations()[i];
    ex[a.task].push_back({&features[a.text], annotator_col[a.annotator], static_cast<double>(a.value)});
  }
  return ValueModel::fit(corpus.tasks(), ex, lambda);
}

}  // namespace acqsim

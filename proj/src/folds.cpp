#include "acqsim/folds.hpp"

#include <algorithm>
#include <random>

#include <fmt/format.h>

#include "acqsim/errors.hpp"
#include "acqsim/seeding.hpp"

namespace acqsim {

FoldPlan::FoldPlan(std::span<const std::size_t> rows, std::size_t n_folds, std::uint64_t seed) {
  if (n_folds < 3) throw config_error("InvalidConfig", fmt::format("need at least 3 folds, got {}", n_folds));
  if (rows.size() < n_folds) {
    throw data_error("TooFewTexts", fmt::format("{} texts with defined labels cannot fill {} folds", rows.size(), n_folds));
  }
  std::vector<std::size_t> order(rows.begin(), rows.end());
  std::mt19937_64 rng(seed);
  shuffle(std::span<std::size_t>(order), rng);
  members_.resize(n_folds);
  for (std::size_t i = 0; i < order.size(); ++i) members_[i % n_folds].push_back(order[i]);
  for (auto& m : members_) std::sort(m.begin(), m.end());
}

FoldPlan::Roles FoldPlan::roles(std::size_t i, std::size_t train_folds) const {
  const std::size_t k = n_folds();
  Roles r;
  r.test = members_[i % k];
  r.validation = members_[(i + 1) % k];
  for (std::size_t f = 0; f < k && r.train_folds.size() < train_folds; ++f) {
    if (f == i % k || f == (i + 1) % k) continue;
    r.train_folds.push_back(f);
    r.train.insert(r.train.end(), members_[f].begin(), members_[f].end());
  }
  return r;
}

}  // namespace acqsim

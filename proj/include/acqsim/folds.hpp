#pragma once

#include <cstdint>
#include <exception>
#include <limits>
#include <span>
#include <vector>

namespace acqsim {

/// Text-level k-fold partition. Iteration i tests on fold i, validates on
/// fold (i + 1) mod k and trains on the remaining folds in ascending order.
class FoldPlan {
 public:
  struct Roles {
    std::vector<std::size_t> test;
    std::vector<std::size_t> validation;
    std::vector<std::size_t> train;
    std::vector<std::size_t> train_folds;
  };

  FoldPlan() = default;

  /// Shuffles `rows` with `seed` and deals them round-robin into `n_folds`
  /// folds. Throws DataError TooFewTexts when rows.size() < n_folds and
  /// ConfigError InvalidConfig when n_folds < 3.
  FoldPlan(std::span<const std::size_t> rows, std::size_t n_folds, std::uint64_t seed);

  std::size_t n_folds() const noexcept { return members_.size(); }
  /// Rows of fold f, ascending.
  const std::vector<std::size_t>& fold(std::size_t f) const { return members_[f]; }

  /// Roles for iteration i. `train_folds` keeps only the first n of the
  /// ascending training folds, so smaller sets nest inside larger ones.
  Roles roles(std::size_t i, std::size_t train_folds = std::numeric_limits<std::size_t>::max()) const;

 private:
  std::vector<std::vector<std::size_t>> members_;
};

/// Runs fn(0..n-1) on up to `jobs` threads (0 = all cores). Results must be
/// written by index. The first exception (lowest index) is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn);

}  // namespace acqsim

#include <omp.h>

namespace acqsim {

template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  const int threads = jobs == 0 ? omp_get_max_threads() : static_cast<int>(jobs);
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for num_threads(threads) schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace acqsim

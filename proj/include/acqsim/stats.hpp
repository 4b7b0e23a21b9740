#pragma once

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace acqsim::stats {

enum class TestUsed { t_test, mann_whitney_u };
std::string_view to_string(TestUsed t);

struct ShapiroResult {
  double w = 1.0;
  double p_value = 1.0;
};

/// Shapiro-Wilk W and its p-value (Royston's approximation), 3 <= n <= 5000.
/// A constant sample has no defined W and is reported with p = 0.
ShapiroResult shapiro_wilk(std::span<const double> x);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p_value = 1.0;
};

/// Two-sided Welch t-test (unequal variances).
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

enum class MwuMethod { automatic, exact, asymptotic };

struct MannWhitneyResult {
  /// U of sample a: pairs (x in a, y in b) with x > y, ties counting 1/2.
  double u = 0.0;
  double p_value = 1.0;
  bool exact = false;
};

/// Two-sided Mann-Whitney U. automatic = exact when |a|*|b| <= 400, else the
/// normal approximation with tie and continuity corrections. The exact branch
/// enumerates rank-sum subsets over the observed midranks, so ties are fine.
MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b,
                                 MwuMethod method = MwuMethod::automatic);

inline constexpr double kNormalityAlpha = 0.05;
inline constexpr std::size_t kMaxTTestSize = 50;
inline constexpr std::size_t kMaxExactProduct = 400;

struct TestResult {
  TestUsed test_used = TestUsed::t_test;
  /// Welch t, or U of sample a.
  double statistic = 0.0;
  double p_value = 1.0;
  double corrected_alpha = 0.0;
  bool significant = false;
  std::size_t n_comparisons = 1;
};

/// Welch when both samples pass Shapiro-Wilk at 0.05 and have n <= 50,
/// Mann-Whitney U otherwise; decision at alpha / n_comparisons.
/// Throws DataError TooFewSamples (n < 3) and ConfigError InvalidAlpha.
TestResult compare(std::span<const double> a, std::span<const double> b, double alpha, std::size_t n_comparisons);

double bonferroni_alpha(double alpha, std::size_t n_comparisons);

nlohmann::ordered_json to_json(const TestResult& r);

/// Pairwise comparison of named samples; n_comparisons = number of pairs.
/// Pairs where either sample is too small come out as null.
nlohmann::ordered_json pairwise(const std::vector<std::pair<std::string, std::vector<double>>>& samples,
                                double alpha);

}  // namespace acqsim::stats

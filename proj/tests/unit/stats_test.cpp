#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "acqsim/errors.hpp"
#include "acqsim/stats.hpp"

using namespace acqsim;
using namespace acqsim::stats;

namespace {

// Two-sided Student t tail by Simpson's rule on the density, independent of
// any distribution library: p = 1 - 2 * integral_0^|t| f(x) dx.
double t_two_sided_p(double t, double df) {
  const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * M_PI);
  auto f = [&](double x) { return c * std::pow(1 + x * x / df, -(df + 1) / 2); };
  const int n = 20000;
  const double b = std::abs(t), h = b / n;
  double s = f(0) + f(b);
  for (int i = 1; i < n; ++i) s += f(i * h) * (i % 2 ? 4 : 2);
  return 1.0 - 2.0 * s * h / 3.0;
}

double welch_t(const std::vector<double>& a, const std::vector<double>& b, double* df) {
  auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); };
  auto var = [&](const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return s / (v.size() - 1);
  };
  const double qa = var(a) / a.size(), qb = var(b) / b.size();
  *df = (qa + qb) * (qa + qb) / (qa * qa / (a.size() - 1) + qb * qb / (b.size() - 1));
  return (mean(a) - mean(b)) / std::sqrt(qa + qb);
}

}  // namespace

TEST_SUITE("stats") {

TEST_CASE("Welch example against an independent oracle") {
  const std::vector<double> a{1, 2, 3, 4, 5}, b{2, 3, 4, 5, 6};
  const auto r = welch_t_test(a, b);
  CHECK(r.t == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(r.df == doctest::Approx(8.0).epsilon(1e-12));
  const double oracle = t_two_sided_p(-1.0, 8.0);
  CHECK(oracle == doctest::Approx(0.3466).epsilon(1e-3));
  CHECK(std::abs(r.p_value - oracle) <= 1e-9);
  CHECK(std::abs(r.p_value - 0.3466) <= 1e-3);
}

TEST_CASE("Welch on random samples matches the oracle") {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> n(0, 1);
  for (int rep = 0; rep < 30; ++rep) {
    std::vector<double> a(3 + rep % 7), b(4 + rep % 5);
    for (auto& x : a) x = n(rng);
    for (auto& x : b) x = 0.5 + 2.0 * n(rng);
    double df = 0;
    const double t = welch_t(a, b, &df);
    const auto r = welch_t_test(a, b);
    CHECK(r.t == doctest::Approx(t).epsilon(1e-12));
    CHECK(r.df == doctest::Approx(df).epsilon(1e-12));
    CHECK(r.p_value == doctest::Approx(t_two_sided_p(t, df)).epsilon(1e-7));
  }
  // Frozen reference (scipy.stats.ttest_ind, equal_var=False).
  const auto r = welch_t_test(std::vector<double>{0.3, 0.35, 0.31, 0.4, 0.28}, std::vector<double>{0.2, 0.22, 0.25, 0.19, 0.3});
  CHECK(r.t == doctest::Approx(3.296653534768534).epsilon(1e-10));
  CHECK(r.p_value == doctest::Approx(0.01098953564066308).epsilon(1e-8));
}

TEST_CASE("Shapiro-Wilk frozen references") {
  const auto a = shapiro_wilk(std::vector<double>{2.1, 3.4, 1.9, 5.6, 4.4, 3.3, 2.8, 3.9, 4.1, 3.0});
  CHECK(a.w == doctest::Approx(0.9713906031045022).epsilon(1e-6));
  CHECK(a.p_value == doctest::Approx(0.9034305013349915).epsilon(1e-4));
  const auto b = shapiro_wilk(std::vector<double>{1, 1, 1, 1, 2, 2, 3, 10, 20, 50});
  CHECK(b.w == doctest::Approx(0.6087669654271683).epsilon(1e-6));
  CHECK(b.p_value == doctest::Approx(7.03636309059913e-05).epsilon(1e-3));
  const auto c = shapiro_wilk(std::vector<double>{0.5, 0.7, 0.9});
  CHECK(c.w == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(c.p_value > 0.99);
  CHECK(shapiro_wilk(std::vector<double>{4, 4, 4, 4}).p_value == 0.0);
}

TEST_CASE("Mann-Whitney frozen references") {
  const std::vector<double> a{1.1, 2.3, 3.8, 4.2, 5.9, 6.1}, b{3.5, 4.6, 7.2, 8.8, 9.1};
  const auto ex = mann_whitney_u(a, b, MwuMethod::exact);
  CHECK(ex.u == 6.0);
  CHECK(ex.exact);
  CHECK(ex.p_value == doctest::Approx(0.12554112554112554).epsilon(1e-12));
  const auto as = mann_whitney_u(a, b, MwuMethod::asymptotic);
  CHECK(as.p_value == doctest::Approx(0.12069080052744556).epsilon(1e-10));
  CHECK_FALSE(as.exact);

  const auto ties = mann_whitney_u(std::vector<double>{1, 2, 2, 3, 4, 5, 5}, std::vector<double>{2, 3, 3, 4, 6, 7},
                                   MwuMethod::asymptotic);
  CHECK(ties.u == 14.5);
  CHECK(ties.p_value == doctest::Approx(0.384756842628445).epsilon(1e-10));

  std::vector<double> x, y;
  for (int i = 0; i < 30; ++i) x.push_back(0.1 * i);
  for (int i = 0; i < 25; ++i) y.push_back(0.1 * i + 0.75);
  const auto big = mann_whitney_u(x, y);
  CHECK_FALSE(big.exact);
  CHECK(big.u == 253.0);
  CHECK(big.p_value == doctest::Approx(0.04000233106564058).epsilon(1e-8));
}

TEST_CASE("Mann-Whitney exact and asymptotic agree on small samples") {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> n(0, 1);
  double worst = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> a(8 + rep % 5), b(8 + rep % 4);
    for (auto& v : a) v = n(rng);
    for (auto& v : b) v = n(rng) + 0.4;
    const double pe = mann_whitney_u(a, b, MwuMethod::exact).p_value;
    const double pa = mann_whitney_u(a, b, MwuMethod::asymptotic).p_value;
    worst = std::max(worst, std::abs(pe - pa));
  }
  CHECK(worst <= 0.02);
}

TEST_CASE("exact branch handles ties and lopsided sizes") {
  const auto r = mann_whitney_u(std::vector<double>{1, 1, 2}, std::vector<double>{1, 2, 2, 3}, MwuMethod::exact);
  CHECK(r.u >= 0.0);
  CHECK(r.u <= 12.0);
  CHECK(r.p_value <= 1.0);
  std::vector<double> many(400);
  std::iota(many.begin(), many.end(), 0.0);
  const auto lop = mann_whitney_u(many, std::vector<double>{500.0}, MwuMethod::exact);
  CHECK(lop.u == 0.0);
  CHECK(lop.p_value == doctest::Approx(2.0 / 401.0));
}

TEST_CASE("compare: identical samples") {
  const std::vector<double> a{1, 2, 3};
  const auto r = compare(a, a, 0.05, 1);
  CHECK(r.statistic == 0.0);
  CHECK_FALSE(r.significant);
  CHECK(r.test_used == TestUsed::t_test);
}

TEST_CASE("compare: gate, symmetry and range") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0, 1);
  std::exponential_distribution<double> e(1.0);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> a(3 + rep % 20), b(3 + (rep * 7) % 25);
    for (auto& v : a) v = rep % 3 == 0 ? std::pow(e(rng), 3) : n(rng);
    for (auto& v : b) v = n(rng) + 0.3;
    const auto ab = compare(a, b, 0.05, 1), ba = compare(b, a, 0.05, 1);
    CHECK(ab.test_used == ba.test_used);
    CHECK(ab.p_value == doctest::Approx(ba.p_value).epsilon(1e-12));
    CHECK(ab.p_value >= 0.0);
    CHECK(ab.p_value <= 1.0);
    if (ab.test_used == TestUsed::t_test) {
      CHECK(ab.statistic == doctest::Approx(-ba.statistic).epsilon(1e-12));
    } else {
      // U of b is the reflection of U of a.
      const double nab = static_cast<double>(a.size() * b.size());
      CHECK(ab.statistic + ba.statistic == doctest::Approx(nab));
      CHECK(ab.statistic >= 0.0);
      CHECK(ab.statistic <= nab);
    }
  }
  std::vector<double> skewed{1, 1, 1, 1, 1, 1, 1, 50}, normalish{0.1, -0.4, 0.8, 0.3, -1.2, 0.5, 0.0, -0.2};
  CHECK(compare(skewed, normalish, 0.05, 1).test_used == TestUsed::mann_whitney_u);
  std::vector<double> long_a(60), long_b(60);
  for (auto& v : long_a) v = n(rng);
  for (auto& v : long_b) v = n(rng);
  CHECK(compare(long_a, long_b, 0.05, 1).test_used == TestUsed::mann_whitney_u);
}

TEST_CASE("Bonferroni") {
  CHECK(bonferroni_alpha(0.05, 23) == doctest::Approx(0.002174).epsilon(1e-3));
  const std::vector<double> a{1, 2, 3, 4, 5}, b{2, 3, 4, 5, 6};
  const auto r = compare(a, b, 0.05, 23);
  CHECK(r.corrected_alpha == 0.05 / 23);
  CHECK(r.n_comparisons == 23);

  std::mt19937_64 rng(21);
  std::normal_distribution<double> n(0, 1);
  std::uniform_int_distribution<std::size_t> k(1, 40);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> x(6), y(6);
    for (auto& v : x) v = n(rng);
    for (auto& v : y) v = n(rng) + 1.5;
    const std::size_t m1 = k(rng), m2 = m1 + k(rng);
    const auto lo = compare(x, y, 0.05, m1), hi = compare(x, y, 0.05, m2);
    CHECK(hi.corrected_alpha < lo.corrected_alpha);
    if (!lo.significant) CHECK_FALSE(hi.significant);
    CHECK(lo.significant == (lo.p_value < lo.corrected_alpha));
  }
}

TEST_CASE("errors") {
  const std::vector<double> two{1, 2}, three{1, 2, 3};
  try {
    compare(two, three, 0.05, 1);
    FAIL("accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == "TooFewSamples");
  }
  for (double alpha : {0.0, 1.0, -0.1}) {
    try {
      compare(three, three, alpha, 1);
      FAIL("accepted");
    } catch (const Error& e) {
      CHECK(e.kind() == "InvalidAlpha");
      CHECK(e.error_class() == ErrorClass::config);
    }
  }
}

TEST_CASE("pairwise json") {
  const auto j = pairwise({{"a", {1, 2, 3, 4}}, {"b", {2, 3, 4, 5}}, {"c", {1, 2}}}, 0.05);
  CHECK(j["n_comparisons"] == 3);
  REQUIRE(j["pairs"].size() == 3);
  CHECK(j["pairs"][0]["result"]["corrected_alpha"].get<double>() == doctest::Approx(0.05 / 3));
  CHECK(j["pairs"][1]["result"].is_null());
}

}  // TEST_SUITE

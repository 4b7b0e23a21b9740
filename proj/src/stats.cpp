#include "acqsim/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "acqsim/errors.hpp"

namespace acqsim::stats {

namespace {

const boost::math::normal kStdNormal(0.0, 1.0);

double normal_sf(double z) { return boost::math::cdf(boost::math::complement(kStdNormal, z)); }

// c[0] + c[1] x + ... + c[n-1] x^(n-1)
double poly(std::span<const double> c, double x) {
  double r = 0.0;
  for (std::size_t i = c.size(); i-- > 0;) r = r * x + c[i];
  return r;
}

double mean_of(std::span<const double> x) { return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size()); }

double var_of(std::span<const double> x, double m) {
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

}  // namespace

std::string_view to_string(TestUsed t) { return t == TestUsed::t_test ? "t_test" : "mann_whitney_u"; }

ShapiroResult shapiro_wilk(std::span<const double> sample) {
  const std::size_t n = sample.size();
  if (n < 3 || n > 5000) throw data_error("TooFewSamples", fmt::format("Shapiro-Wilk needs 3..5000 values, got {}", n));
  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());
  if (x.back() - x.front() <= 0.0) return {1.0, 0.0};

  const std::size_t half = n / 2;
  const double an = static_cast<double>(n);
  std::vector<double> a(half);
  if (n == 3) {
    a[0] = std::numbers::sqrt2 / 2.0;
  } else {
    static constexpr double c1[] = {0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056};
    static constexpr double c2[] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
    std::vector<double> m(half);
    double summ2 = 0.0;
    for (std::size_t i = 0; i < half; ++i) {
      m[i] = boost::math::quantile(kStdNormal, (static_cast<double>(i + 1) - 0.375) / (an + 0.25));
      summ2 += m[i] * m[i];
    }
    summ2 *= 2.0;
    const double ssumm2 = std::sqrt(summ2);
    const double rsn = 1.0 / std::sqrt(an);
    const double a1 = poly(c1, rsn) - m[0] / ssumm2;
    std::size_t first;
    double fac;
    if (n > 5) {
      const double a2 = -m[1] / ssumm2 + poly(c2, rsn);
      fac = std::sqrt((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
      a[1] = a2;
      first = 2;
    } else {
      fac = std::sqrt((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1));
      first = 1;
    }
    a[0] = a1;
    for (std::size_t i = first; i < half; ++i) a[i] = -m[i] / fac;
  }

  const double mean = mean_of(x);
  double ssq = 0.0;
  for (double v : x) ssq += (v - mean) * (v - mean);
  double num = 0.0;
  for (std::size_t i = 0; i < half; ++i) num += a[i] * (x[n - 1 - i] - x[i]);
  double w = std::min(1.0, num * num / ssq);

  ShapiroResult r;
  r.w = w;
  if (n == 3) {
    const double pi6 = 6.0 / std::numbers::pi;
    const double stqr = std::numbers::pi / 3.0;  // asin(sqrt(3/4))
    r.p_value = std::clamp(pi6 * (std::asin(std::sqrt(w)) - stqr), 0.0, 1.0);
    return r;
  }
  const double w1 = std::log(1.0 - w);
  double y, mu, sigma;
  if (n <= 11) {
    static constexpr double g[] = {-2.273, 0.459};
    static constexpr double c3[] = {0.5440, -0.39978, 0.025054, -6.714e-4};
    static constexpr double c4[] = {1.3822, -0.77857, 0.062767, -0.0020322};
    const double gamma = poly(g, an);
    if (w1 >= gamma) {
      r.p_value = 1e-99;
      return r;
    }
    y = -std::log(gamma - w1);
    mu = poly(c3, an);
    sigma = std::exp(poly(c4, an));
  } else {
    static constexpr double c5[] = {-1.5861, -0.31082, -0.083751, 0.0038915};
    static constexpr double c6[] = {-0.4803, -0.082676, 0.0030302};
    const double xx = std::log(an);
    y = w1;
    mu = poly(c5, xx);
    sigma = std::exp(poly(c6, xx));
  }
  r.p_value = std::clamp(normal_sf((y - mu) / sigma), 0.0, 1.0);
  return r;
}

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw data_error("TooFewSamples", "Welch t-test needs two values per sample");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double ma = mean_of(a), mb = mean_of(b);
  const double qa = var_of(a, ma) / na, qb = var_of(b, mb) / nb;
  WelchResult r;
  const double se2 = qa + qb;
  if (se2 == 0.0) {
    // Both samples constant: no spread to scale by.
    r.df = na + nb - 2.0;
    if (ma == mb) return r;
    r.t = ma < mb ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
    r.p_value = 0.0;
    return r;
  }
  r.t = (ma - mb) / std::sqrt(se2);
  r.df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
  const boost::math::students_t dist(r.df);
  r.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t))));
  return r;
}

MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b, MwuMethod method) {
  const std::size_t na = a.size(), nb = b.size(), n = na + nb;
  if (na == 0 || nb == 0) throw data_error("TooFewSamples", "Mann-Whitney U needs non-empty samples");

  // Doubled midranks keep everything integral.
  std::vector<std::pair<double, bool>> all;
  all.reserve(n);
  for (double v : a) all.emplace_back(v, true);
  for (double v : b) all.emplace_back(v, false);
  std::sort(all.begin(), all.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  std::vector<std::uint64_t> rank2(n);
  std::uint64_t rank_sum2_a = 0, rank_sum2_b = 0;
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && all[j].first == all[i].first) ++j;
    const std::uint64_t r2 = i + j + 1;  // 2 * average of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      rank2[k] = r2;
      (all[k].second ? rank_sum2_a : rank_sum2_b) += r2;
    }
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double dna = static_cast<double>(na), dnb = static_cast<double>(nb), dn = static_cast<double>(n);
  const std::uint64_t offset2 = na * (na + 1);  // 2 * na(na+1)/2
  MannWhitneyResult r;
  r.u = static_cast<double>(rank_sum2_a - offset2) / 2.0;

  const bool exact = method == MwuMethod::exact || (method == MwuMethod::automatic && na * nb <= kMaxExactProduct);
  r.exact = exact;
  if (exact) {
    // Enumerate the smaller sample's rank sum; the two-sided p is the same.
    const std::size_t ns = std::min(na, nb);
    const std::uint64_t observed = na <= nb ? rank_sum2_a : rank_sum2_b;
    // ways[j][s]: subsets of size j of the ranks seen so far with doubled sum s.
    const std::size_t max_sum = static_cast<std::size_t>(std::accumulate(rank2.begin(), rank2.end(), std::uint64_t{0}));
    std::vector<std::vector<double>> ways(ns + 1, std::vector<double>(max_sum + 1, 0.0));
    ways[0][0] = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t r2 = static_cast<std::size_t>(rank2[i]);
      for (std::size_t j = std::min(ns, i + 1); j >= 1; --j) {
        auto& dst = ways[j];
        const auto& src = ways[j - 1];
        for (std::size_t s = max_sum; s >= r2; --s) {
          dst[s] += src[s - r2];
          if (s == r2) break;
        }
      }
    }
    double total = 0.0, lower = 0.0, upper = 0.0;
    for (std::size_t s = 0; s <= max_sum; ++s) {
      const double c = ways[ns][s];
      if (c == 0.0) continue;
      total += c;
      if (s <= observed) lower += c;
      if (s >= observed) upper += c;
    }
    r.p_value = std::min(1.0, 2.0 * std::min(lower, upper) / total);
    return r;
  }

  const double mu = dna * dnb / 2.0;
  const double var = dna * dnb / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
  if (var <= 0.0) {
    r.p_value = 1.0;
    return r;
  }
  const double z = (std::abs(r.u - mu) - 0.5) / std::sqrt(var);
  r.p_value = std::clamp(2.0 * normal_sf(z), 0.0, 1.0);
  return r;
}

double bonferroni_alpha(double alpha, std::size_t n_comparisons) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw config_error("InvalidAlpha", fmt::format("alpha must lie in (0, 1), got {}", alpha));
  if (n_comparisons == 0) throw config_error("InvalidAlpha", "n_comparisons must be at least 1");
  return alpha / static_cast<double>(n_comparisons);
}

TestResult compare(std::span<const double> a, std::span<const double> b, double alpha, std::size_t n_comparisons) {
  if (a.size() < 3 || b.size() < 3) {
    throw data_error("TooFewSamples", fmt::format("need at least 3 values per sample, got {} and {}", a.size(), b.size()));
  }
  TestResult r;
  r.n_comparisons = n_comparisons;
  r.corrected_alpha = bonferroni_alpha(alpha, n_comparisons);

  const bool small = a.size() <= kMaxTTestSize && b.size() <= kMaxTTestSize;
  const bool normal =
      small && shapiro_wilk(a).p_value >= kNormalityAlpha && shapiro_wilk(b).p_value >= kNormalityAlpha;
  if (normal) {
    const auto w = welch_t_test(a, b);
    r.test_used = TestUsed::t_test;
    r.statistic = w.t;
    r.p_value = w.p_value;
  } else {
    const auto m = mann_whitney_u(a, b);
    r.test_used = TestUsed::mann_whitney_u;
    r.statistic = m.u;
    r.p_value = m.p_value;
  }
  r.significant = r.p_value < r.corrected_alpha;
  return r;
}

nlohmann::ordered_json to_json(const TestResult& r) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr); };
  return {{"test_used", to_string(r.test_used)},
          {"statistic", num(r.statistic)},
          {"p_value", r.p_value},
          {"corrected_alpha", r.corrected_alpha},
          {"significant", r.significant},
          {"n_comparisons", r.n_comparisons}};
}

nlohmann::ordered_json pairwise(const std::vector<std::pair<std::string, std::vector<double>>>& samples,
                                double alpha) {
  const std::size_t k = samples.size();
  const std::size_t pairs = k * (k - (k > 0 ? 1 : 0)) / 2;
  nlohmann::ordered_json out;
  out["alpha"] = alpha;
  out["n_comparisons"] = pairs;
  auto list = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      nlohmann::ordered_json e;
      e["a"] = samples[i].first;
      e["b"] = samples[j].first;
      if (samples[i].second.size() < 3 || samples[j].second.size() < 3) {
        e["result"] = nullptr;
      } else {
        e["result"] = to_json(compare(samples[i].second, samples[j].second, alpha, pairs));
      }
      list.push_back(std::move(e));
    }
  }
  out["pairs"] = std::move(list);
  return out;
}

}  // namespace acqsim::stats

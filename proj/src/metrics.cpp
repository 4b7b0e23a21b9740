#include "acqsim/metrics.hpp"

#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "acqsim/csv.hpp"
#include "acqsim/errors.hpp"

namespace acqsim {

TaskCounts& TaskCounts::operator+=(const TaskCounts& o) noexcept {
  t1p1 += o.t1p1;
  t1p0 += o.t1p0;
  t0p1 += o.t0p1;
  t0p0 += o.t0p0;
  return *this;
}

void check_same_grid(const VtlLabels& truth, const PredictionSet& pred) {
  if (truth.text_ids() != pred.text_ids || truth.task_ids() != pred.task_ids) {
    throw data_error("GridMismatch", fmt::format("truth grid {}x{} vs prediction grid {}x{}", truth.n_texts(),
                                                 truth.n_tasks(), pred.n_texts(), pred.n_tasks()));
  }
}

namespace {

void tally(const VtlLabels& truth, const PredictionSet& pred, std::size_t d, std::vector<TaskCounts>& out) {
  for (std::size_t k = 0; k < truth.n_tasks(); ++k) {
    if (!truth.defined(d, k)) continue;
    const bool t = truth.bit(d, k) != 0;
    const bool p = pred.bit(d, k) != 0;
    auto& c = out[k];
    if (t) {
      (p ? c.t1p1 : c.t1p0) += 1;
    } else {
      (p ? c.t0p1 : c.t0p0) += 1;
    }
  }
}

std::vector<std::optional<double>> per_task_f1(const VtlLabels& truth, const PredictionSet& pred) {
  std::vector<std::optional<double>> out(truth.n_tasks());
  std::vector<std::uint8_t> t, p;
  for (std::size_t k = 0; k < truth.n_tasks(); ++k) {
    t.clear();
    p.clear();
    for (std::size_t d = 0; d < truth.n_texts(); ++d) {
      if (!truth.defined(d, k)) continue;
      t.push_back(truth.bit(d, k));
      p.push_back(pred.bit(d, k));
    }
    if (!t.empty()) out[k] = macro_f1(t, p);
  }
  return out;
}

double to_double(const Rational& q) { return q.convert_to<double>(); }

}  // namespace

std::vector<TaskCounts> confusion(const VtlLabels& truth, const PredictionSet& pred) {
  check_same_grid(truth, pred);
  const std::size_t K = truth.n_tasks();
  std::vector<TaskCounts> total(K);
  const auto n = static_cast<std::ptrdiff_t>(truth.n_texts());
#pragma omp parallel
  {
    std::vector<TaskCounts> local(K);
#pragma omp for schedule(static) nowait
    for (std::ptrdiff_t d = 0; d < n; ++d) tally(truth, pred, static_cast<std::size_t>(d), local);
#pragma omp critical
    for (std::size_t k = 0; k < K; ++k) total[k] += local[k];
  }
  return total;
}

std::vector<TaskCounts> confusion_serial(const VtlLabels& truth, const PredictionSet& pred) {
  check_same_grid(truth, pred);
  std::vector<TaskCounts> total(truth.n_tasks());
  for (std::size_t d = 0; d < truth.n_texts(); ++d) tally(truth, pred, d, total);
  return total;
}

double mb(double aer, double aal) noexcept { return aer - aal; }

MetricReport evaluate_counts(std::vector<std::string> task_ids, std::vector<TaskCounts> counts,
                             std::vector<std::optional<double>> f1) {
  MetricReport r;
  r.task_ids = std::move(task_ids);
  r.counts = std::move(counts);
  r.macro_f1 = std::move(f1);

  TaskCounts all;
  for (const auto& c : r.counts) all += c;
  r.n_cells = all.total();
  r.n_valuable = all.valuable();
  r.n_invaluable = all.invaluable();

  r.aer_exact = r.n_cells ? Rational(all.t0p0, r.n_cells) : Rational(0);
  r.aal_undefined = r.n_valuable == 0;
  r.aal_exact = r.n_valuable ? Rational(all.t1p0, r.n_valuable) : Rational(0);
  r.mb_exact = r.aer_exact - r.aal_exact;

  Rational lal_sum = 0;
  double lal_sum_d = 0.0;
  std::size_t included = 0;
  for (std::size_t k = 0; k < r.counts.size(); ++k) {
    const auto& c = r.counts[k];
    const bool defined = c.valuable() > 0;
    r.lal_defined.push_back(defined ? 1 : 0);
    r.lal_exact.push_back(defined ? Rational(c.t1p0, c.valuable()) : Rational(0));
    r.lal.push_back(to_double(r.lal_exact.back()));
    if (defined) {
      lal_sum += r.lal_exact.back();
      lal_sum_d += r.lal.back();
      ++included;
    } else {
      r.mlral_excluded.push_back(r.task_ids[k]);
    }
  }
  r.mlral_exact = included ? lal_sum / included : Rational(0);
  r.mlral = included ? lal_sum_d / static_cast<double>(included) : 0.0;

  r.aer = to_double(r.aer_exact);
  r.aal = to_double(r.aal_exact);
  r.mb = mb(r.aer, r.aal);
  return r;
}

MetricReport evaluate(const VtlLabels& truth, const PredictionSet& pred) {
  return evaluate_counts(truth.task_ids(), confusion(truth, pred), per_task_f1(truth, pred));
}

double macro_f1(std::span<const std::uint8_t> truth, std::span<const std::uint8_t> pred) {
  if (truth.empty() || truth.size() != pred.size()) {
    throw data_error("EmptyInput", "macro-F1 needs non-empty aligned vectors");
  }
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool t = truth[i] != 0, p = pred[i] != 0;
    if (t && p) ++tp;
    else if (!t && p) ++fp;
    else if (t && !p) ++fn;
    else ++tn;
  }
  double sum = 0.0;
  int classes = 0;
  // Class 1: positives are 1s. Class 0: positives are 0s (fp and fn swap).
  if (tp + fn + fp > 0) {
    sum += 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    ++classes;
  }
  if (tn + fn + fp > 0) {
    sum += 2.0 * static_cast<double>(tn) / static_cast<double>(2 * tn + fp + fn);
    ++classes;
  }
  return sum / classes;
}

double r2(std::span<const double> truth, std::span<const double> pred) {
  if (truth.empty() || truth.size() != pred.size()) throw data_error("EmptyInput", "R2 needs non-empty aligned vectors");
  double mean = 0.0;
  for (double v : truth) mean += v;
  mean /= static_cast<double>(truth.size());
  double ss_tot = 0.0, ss_res = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ss_tot += (truth[i] - mean) * (truth[i] - mean);
    ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
  }
  if (ss_tot == 0.0) throw data_error("ZeroVariance", "R2 is undefined for constant targets");
  return 1.0 - ss_res / ss_tot;
}

Summary summarize(std::span<const double> values) {
  Summary s;
  s.n = values.size();
  if (s.n == 0) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

AggregateReport aggregate(std::vector<MetricReport> folds) {
  AggregateReport a;
  if (folds.empty()) return a;
  a.task_ids = folds.front().task_ids;
  const std::size_t K = a.task_ids.size();
  std::vector<double> aer, aal, mbv, mlral;
  std::vector<std::vector<double>> lal(K), f1(K);
  for (const auto& f : folds) {
    aer.push_back(f.aer);
    aal.push_back(f.aal);
    mbv.push_back(f.mb);
    mlral.push_back(f.mlral);
    for (std::size_t k = 0; k < K; ++k) {
      if (f.lal_defined[k]) lal[k].push_back(f.lal[k]);
      if (f.macro_f1[k]) f1[k].push_back(*f.macro_f1[k]);
    }
  }
  a.aer = summarize(aer);
  a.aal = summarize(aal);
  a.mb = summarize(mbv);
  a.mb.mean = mb(a.aer.mean, a.aal.mean);
  a.mlral = summarize(mlral);
  for (std::size_t k = 0; k < K; ++k) {
    a.lal.push_back(summarize(lal[k]));
    a.macro_f1.push_back(summarize(f1[k]));
  }
  a.folds = std::move(folds);
  return a;
}

nlohmann::ordered_json to_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["n_cells"] = r.n_cells;
  j["n_valuable"] = r.n_valuable;
  j["n_invaluable"] = r.n_invaluable;
  j["aer"] = r.aer;
  j["aal"] = r.aal;
  j["mb"] = r.mb;
  j["mlral"] = r.mlral;
  j["aal_undefined"] = r.aal_undefined;
  j["mlral_excluded"] = r.mlral_excluded;
  auto tasks = nlohmann::ordered_json::object();
  for (std::size_t k = 0; k < r.task_ids.size(); ++k) {
    nlohmann::ordered_json t;
    t["lal"] = r.lal_defined[k] ? nlohmann::ordered_json(r.lal[k]) : nlohmann::ordered_json(nullptr);
    t["macro_f1"] = r.macro_f1[k] ? nlohmann::ordered_json(*r.macro_f1[k]) : nlohmann::ordered_json(nullptr);
    const auto& c = r.counts[k];
    t["confusion"] = {{"t1p1", c.t1p1}, {"t1p0", c.t1p0}, {"t0p1", c.t0p1}, {"t0p0", c.t0p0}};
    tasks[r.task_ids[k]] = std::move(t);
  }
  j["tasks"] = std::move(tasks);
  return j;
}

nlohmann::ordered_json to_json(const Summary& s) { return {{"mean", s.mean}, {"std", s.std}, {"n", s.n}}; }

nlohmann::ordered_json to_json(const AggregateReport& r) {
  nlohmann::ordered_json j;
  j["aer"] = to_json(r.aer);
  j["aal"] = to_json(r.aal);
  j["mb"] = to_json(r.mb);
  j["mlral"] = to_json(r.mlral);
  auto tasks = nlohmann::ordered_json::object();
  for (std::size_t k = 0; k < r.task_ids.size(); ++k) {
    tasks[r.task_ids[k]] = {{"lal", to_json(r.lal[k])}, {"macro_f1", to_json(r.macro_f1[k])}};
  }
  j["tasks"] = std::move(tasks);
  auto folds = nlohmann::ordered_json::array();
  for (const auto& f : r.folds) folds.push_back(to_json(f));
  j["folds"] = std::move(folds);
  return j;
}

namespace {

void push_report(std::vector<MetricRow>& rows, const std::string& scenario, const std::string& variant,
                 const std::string& fold, const MetricReport& r) {
  auto add = [&](const std::string& task, const char* metric, double v) {
    rows.push_back({scenario, variant, fold, task, metric, v});
  };
  add("*", "aer", r.aer);
  add("*", "aal", r.aal);
  add("*", "mb", r.mb);
  add("*", "mlral", r.mlral);
  add("*", "n_cells", static_cast<double>(r.n_cells));
  add("*", "n_valuable", static_cast<double>(r.n_valuable));
  for (std::size_t k = 0; k < r.task_ids.size(); ++k) {
    if (r.lal_defined[k]) add(r.task_ids[k], "lal", r.lal[k]);
    if (r.macro_f1[k]) add(r.task_ids[k], "macro_f1", *r.macro_f1[k]);
  }
}

}  // namespace

void append_rows(std::vector<MetricRow>& rows, const std::string& scenario, const std::string& variant,
                 const AggregateReport& r) {
  for (std::size_t i = 0; i < r.folds.size(); ++i) push_report(rows, scenario, variant, std::to_string(i), r.folds[i]);
  auto add = [&](const std::string& task, const char* metric, const Summary& s) {
    if (s.n == 0) return;
    rows.push_back({scenario, variant, "mean", task, metric, s.mean});
    rows.push_back({scenario, variant, "std", task, metric, s.std});
  };
  add("*", "aer", r.aer);
  add("*", "aal", r.aal);
  add("*", "mb", r.mb);
  add("*", "mlral", r.mlral);
  for (std::size_t k = 0; k < r.task_ids.size(); ++k) {
    add(r.task_ids[k], "lal", r.lal[k]);
    add(r.task_ids[k], "macro_f1", r.macro_f1[k]);
  }
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (v == 0.0) return "0";  // folds -0 into 0
  return fmt::format("{}", v);
}

void write_metric_rows(std::ostream& out, std::span<const MetricRow> rows) {
  csv::write_row(out, {"scenario", "variant", "fold", "task", "metric", "value"});
  for (const auto& r : rows) {
    csv::write_row(out, {r.scenario, r.variant, r.fold, r.task, r.metric, format_number(r.value)});
  }
}

}  // namespace acqsim

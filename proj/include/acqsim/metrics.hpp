#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <nlohmann/json.hpp>

#include "acqsim/prediction_set.hpp"
#include "acqsim/vtl.hpp"

namespace acqsim {

using Rational = boost::multiprecision::cpp_rational;

/// Confusion counts of one task over defined cells. "Positive" is truth bit 1
/// (a valuable cell); pred 0 means the cell would be auto-zeroed.
struct TaskCounts {
  std::uint64_t t1p1 = 0;  // valuable, sent to humans
  std::uint64_t t1p0 = 0;  // valuable, wrongly skipped
  std::uint64_t t0p1 = 0;  // invaluable, needlessly annotated
  std::uint64_t t0p0 = 0;  // invaluable, correctly skipped

  std::uint64_t valuable() const noexcept { return t1p1 + t1p0; }
  std::uint64_t invaluable() const noexcept { return t0p1 + t0p0; }
  std::uint64_t total() const noexcept { return valuable() + invaluable(); }
  TaskCounts& operator+=(const TaskCounts& o) noexcept;
  bool operator==(const TaskCounts&) const = default;
};

/// Throws DataError GridMismatch unless ids match in order.
void check_same_grid(const VtlLabels& truth, const PredictionSet& pred);

/// Per-task counts; rows split across threads.
std::vector<TaskCounts> confusion(const VtlLabels& truth, const PredictionSet& pred);
std::vector<TaskCounts> confusion_serial(const VtlLabels& truth, const PredictionSet& pred);

struct MetricReport {
  std::vector<std::string> task_ids;

  std::uint64_t n_cells = 0;  // defined cells
  std::uint64_t n_valuable = 0;
  std::uint64_t n_invaluable = 0;

  double aer = 0.0;
  double aal = 0.0;
  double mb = 0.0;  // always aer - aal
  double mlral = 0.0;
  /// No valuable cell at all: aal reported as 0.
  bool aal_undefined = false;

  std::vector<double> lal;                    // per task; 0 when undefined
  std::vector<std::uint8_t> lal_defined;      // task has >= 1 valuable cell
  std::vector<std::string> mlral_excluded;    // tasks without valuable cells
  std::vector<std::optional<double>> macro_f1;  // per task; empty when no defined cells
  std::vector<TaskCounts> counts;

  // Exact values backing the doubles above.
  Rational aer_exact, aal_exact, mb_exact, mlral_exact;
  std::vector<Rational> lal_exact;
};

MetricReport evaluate(const VtlLabels& truth, const PredictionSet& pred);
MetricReport evaluate_counts(std::vector<std::string> task_ids, std::vector<TaskCounts> counts,
                             std::vector<std::optional<double>> macro_f1);

double mb(double aer, double aal) noexcept;

/// Unweighted mean of per-class F1 over the classes occurring in truth or
/// pred. Throws DataError EmptyInput.
double macro_f1(std::span<const std::uint8_t> truth, std::span<const std::uint8_t> pred);

/// 1 - SS_res / SS_tot. Throws DataError EmptyInput or ZeroVariance.
double r2(std::span<const double> truth, std::span<const double> pred);

/// Mean and sample standard deviation (n - 1); std is 0 for n = 1.
struct Summary {
  double mean = 0.0;
  double std = 0.0;
  std::size_t n = 0;
};
Summary summarize(std::span<const double> values);

/// Per-fold reports and their aggregate.
struct AggregateReport {
  std::vector<std::string> task_ids;
  std::vector<MetricReport> folds;
  Summary aer, aal, mb, mlral;
  std::vector<Summary> lal;       // over folds where the task had valuable cells
  std::vector<Summary> macro_f1;  // over folds where defined
};

/// mb.mean is set to aer.mean - aal.mean so the identity also holds for the
/// aggregate.
AggregateReport aggregate(std::vector<MetricReport> folds);

nlohmann::ordered_json to_json(const MetricReport& r);
nlohmann::ordered_json to_json(const Summary& s);
nlohmann::ordered_json to_json(const AggregateReport& r);

/// Long-form rows `scenario,variant,fold,task,metric,value`.
struct MetricRow {
  std::string scenario;
  std::string variant;
  std::string fold;  // index or "mean" / "std"
  std::string task;  // task id or "*"
  std::string metric;
  double value = 0.0;
};
void append_rows(std::vector<MetricRow>& rows, const std::string& scenario, const std::string& variant,
                 const AggregateReport& r);
void write_metric_rows(std::ostream& out, std::span<const MetricRow> rows);

/// Shortest round-trip text for a double; the single formatting rule used by
/// every CSV writer so reruns are byte-identical.
std::string format_number(double v);

}  // namespace acqsim

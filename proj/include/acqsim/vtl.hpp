#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "acqsim/corpus.hpp"

namespace acqsim {

/// Valuableness threshold held as an exact rational. Parsed from its decimal
/// text ("0.1" is exactly 1/10), so a fraction equal to the threshold compares
/// equal instead of falling on the wrong side of a binary rounding.
class Threshold {
 public:
  using uint128 = unsigned __int128;

  Threshold() = default;

  /// Decimal literal in [0, 1]: "0.25", ".1", "1", "2.5e-1".
  /// Throws ConfigError ThresholdOutOfRange.
  static Threshold parse(std::string_view text);
  /// Interprets `t` through its shortest round-trip decimal form.
  static Threshold from_double(double t);
  /// Exact num/den; requires den > 0 and num <= den.
  static Threshold ratio(std::uint64_t num, std::uint64_t den);

  double value() const noexcept { return value_; }
  const std::string& text() const noexcept { return text_; }

  /// nonzero / total >= t, evaluated exactly. Requires total > 0.
  bool admits(std::uint64_t nonzero, std::uint64_t total) const noexcept;

  friend bool operator==(const Threshold& a, const Threshold& b) noexcept;
  friend bool operator<(const Threshold& a, const Threshold& b) noexcept;
  friend bool operator<=(const Threshold& a, const Threshold& b) noexcept { return !(b < a); }

 private:
  uint128 num_ = 0;
  uint128 den_ = 1;
  double value_ = 0.0;
  std::string text_ = "0";
};

/// Sign of a/b - c/d for unsigned a, c and positive b, d, without overflow.
int compare_fractions(Threshold::uint128 a, Threshold::uint128 b, Threshold::uint128 c,
                      Threshold::uint128 d) noexcept;

struct VtlCell {
  std::uint32_t nonzero = 0;
  std::uint32_t total = 0;

  bool defined() const noexcept { return total > 0; }
  /// Only meaningful when defined().
  double fraction() const noexcept { return static_cast<double>(nonzero) / static_cast<double>(total); }
  bool operator==(const VtlCell&) const = default;
};

/// Per (text, task) non-zero counts; row-major, rows in text order, columns in
/// task order. Cells with no annotations are undefined.
struct VtlMatrix {
  std::vector<std::string> text_ids;
  std::vector<std::string> task_ids;
  std::vector<VtlCell> cells;

  std::size_t n_texts() const noexcept { return text_ids.size(); }
  std::size_t n_tasks() const noexcept { return task_ids.size(); }
  const VtlCell& at(std::size_t text, std::size_t task) const { return cells[text * n_tasks() + task]; }
  std::size_t count_undefined() const;
};

VtlMatrix compute_fractions(const Corpus& corpus);
/// Single pass over the annotation list; kept as the reference for the
/// parallel per-text kernel above.
VtlMatrix compute_fractions_serial(const Corpus& corpus);

/// Binary VTL targets with a coverage mask. Also used as a generic defined/bit
/// grid (e.g. model-predicted labels for retraining).
class VtlLabels {
 public:
  VtlLabels() = default;
  VtlLabels(std::vector<std::string> text_ids, std::vector<std::string> task_ids, Threshold t);

  std::size_t n_texts() const noexcept { return text_ids_.size(); }
  std::size_t n_tasks() const noexcept { return task_ids_.size(); }
  const std::vector<std::string>& text_ids() const noexcept { return text_ids_; }
  const std::vector<std::string>& task_ids() const noexcept { return task_ids_; }
  const Threshold& threshold() const noexcept { return threshold_; }

  bool defined(std::size_t text, std::size_t task) const { return defined_[idx(text, task)] != 0; }
  std::uint8_t bit(std::size_t text, std::size_t task) const { return bits_[idx(text, task)]; }
  void set(std::size_t text, std::size_t task, std::uint8_t bit);
  void clear(std::size_t text, std::size_t task);

  /// Row view (one entry per task).
  std::span<const std::uint8_t> bits_row(std::size_t text) const {
    return std::span<const std::uint8_t>(bits_).subspan(text * n_tasks(), n_tasks());
  }
  std::span<const std::uint8_t> defined_row(std::size_t text) const {
    return std::span<const std::uint8_t>(defined_).subspan(text * n_tasks(), n_tasks());
  }

  bool row_has_defined(std::size_t text) const;
  std::size_t count_defined() const;
  std::size_t count_valuable() const;

  VtlLabels select_rows(std::span<const std::size_t> rows) const;

  bool operator==(const VtlLabels&) const = default;

 private:
  std::size_t idx(std::size_t text, std::size_t task) const { return text * task_ids_.size() + task; }

  std::vector<std::string> text_ids_;
  std::vector<std::string> task_ids_;
  Threshold threshold_;
  std::vector<std::uint8_t> bits_;
  std::vector<std::uint8_t> defined_;
};

/// bit = 1 iff nonzero/total >= t; undefined cells stay undefined.
VtlLabels binarize(const VtlMatrix& matrix, const Threshold& t);
VtlLabels binarize(const VtlMatrix& matrix, double t);

/// `text_id,task,nonzero,total,fraction,bit`; undefined cells carry empty
/// fraction and bit fields.
void write_vtl_csv(std::ostream& out, const VtlMatrix& matrix, const VtlLabels& labels);

}  // namespace acqsim

#include "acqsim/vtl.hpp"

#include <charconv>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "acqsim/csv.hpp"
#include "acqsim/errors.hpp"

namespace acqsim {

using uint128 = Threshold::uint128;

namespace {

constexpr int kMaxDecimalExponent = 38;

uint128 pow10(int e) {
  uint128 p = 1;
  for (int i = 0; i < e; ++i) p *= 10;
  return p;
}

uint128 gcd128(uint128 a, uint128 b) {
  while (b != 0) {
    uint128 r = a % b;
    a = b;
    b = r;
  }
  return a;
}

[[noreturn]] void out_of_range(std::string_view text) {
  throw config_error("ThresholdOutOfRange", fmt::format("threshold '{}' must be a decimal in [0, 1]", text));
}

}  // namespace

int compare_fractions(uint128 a, uint128 b, uint128 c, uint128 d) noexcept {
  // Continued-fraction comparison: compare integer parts, then compare the
  // reciprocals of the remainders, which reverses the order.
  int sign = 1;
  for (;;) {
    const uint128 qa = a / b;
    const uint128 qc = c / d;
    if (qa != qc) return qa < qc ? -sign : sign;
    const uint128 ra = a % b;
    const uint128 rc = c % d;
    if (ra == 0 && rc == 0) return 0;
    if (ra == 0) return -sign;
    if (rc == 0) return sign;
    // ra/b < rc/d  <=>  b/ra > d/rc
    const uint128 na = b, nb = ra, nc = d, nd = rc;
    a = na;
    b = nb;
    c = nc;
    d = nd;
    sign = -sign;
  }
}

Threshold Threshold::parse(std::string_view text) {
  const std::string_view original = text;
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) out_of_range(original);

  uint128 digits = 0;
  int frac_digits = 0;
  int sig_digits = 0;
  bool any_digit = false;
  bool seen_point = false;
  std::size_t i = 0;
  for (; i < text.size(); ++i) {
    const char ch = text[i];
    if (ch == '.') {
      if (seen_point) out_of_range(original);
      seen_point = true;
    } else if (ch >= '0' && ch <= '9') {
      any_digit = true;
      if (digits == 0 && ch == '0') {
        if (seen_point) ++frac_digits;
        continue;
      }
      if (sig_digits >= 36) {
        // Beyond 36 significant digits only trailing zeros are accepted.
        if (ch != '0') out_of_range(original);
        if (!seen_point) out_of_range(original);
        continue;
      }
      digits = digits * 10 + static_cast<unsigned>(ch - '0');
      ++sig_digits;
      if (seen_point) ++frac_digits;
    } else {
      break;
    }
  }
  if (!any_digit) out_of_range(original);
  int exponent = 0;
  if (i < text.size()) {
    if (text[i] != 'e' && text[i] != 'E') out_of_range(original);
    ++i;
    auto rest = text.substr(i);
    if (!rest.empty() && rest.front() == '+') rest.remove_prefix(1);
    auto [p, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), exponent);
    if (ec != std::errc{} || p != rest.data() + rest.size()) out_of_range(original);
  }

  Threshold t;
  int scale = frac_digits - exponent;  // value = digits / 10^scale
  if (digits == 0) {
    scale = 0;
  }
  while (scale < 0) {
    if (digits > pow10(kMaxDecimalExponent)) out_of_range(original);
    digits *= 10;
    ++scale;
  }
  if (scale > kMaxDecimalExponent) {
    // Positive thresholds below 1e-38 all admit exactly the cells with at
    // least one non-zero annotation for any realistic total; snap to 1e-38.
    t.num_ = 1;
    t.den_ = pow10(kMaxDecimalExponent);
  } else {
    t.num_ = digits;
    t.den_ = pow10(scale);
  }
  if (t.num_ > t.den_) out_of_range(original);
  const uint128 g = gcd128(t.num_, t.den_);
  if (g > 1) {
    t.num_ /= g;
    t.den_ /= g;
  }
  if (t.num_ == 0) t.den_ = 1;
  t.value_ = static_cast<double>(t.num_) / static_cast<double>(t.den_);
  t.text_ = std::string(text);
  return t;
}

Threshold Threshold::from_double(double t) {
  if (!(t >= 0.0 && t <= 1.0)) out_of_range(fmt::format("{}", t));
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, t);
  return parse(std::string_view(buf, static_cast<std::size_t>(p - buf)));
}

Threshold Threshold::ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0 || num > den) out_of_range(fmt::format("{}/{}", num, den));
  Threshold t;
  const uint128 g = gcd128(num, den);
  t.num_ = num / (g ? g : 1);
  t.den_ = den / (g ? g : 1);
  if (t.num_ == 0) t.den_ = 1;
  t.value_ = static_cast<double>(t.num_) / static_cast<double>(t.den_);
  t.text_ = fmt::format("{}/{}", num, den);
  return t;
}

bool Threshold::admits(std::uint64_t nonzero, std::uint64_t total) const noexcept {
  return compare_fractions(nonzero, total, num_, den_) >= 0;
}

bool operator==(const Threshold& a, const Threshold& b) noexcept {
  return a.num_ == b.num_ && a.den_ == b.den_;
}

bool operator<(const Threshold& a, const Threshold& b) noexcept {
  return compare_fractions(a.num_, a.den_, b.num_, b.den_) < 0;
}

std::size_t VtlMatrix::count_undefined() const {
  std::size_t n = 0;
  for (const auto& c : cells) n += c.defined() ? 0 : 1;
  return n;
}

VtlMatrix compute_fractions(const Corpus& corpus) {
  VtlMatrix m{corpus.text_ids(), corpus.task_ids(), {}};
  const std::size_t n_tasks = corpus.n_tasks();
  m.cells.assign(corpus.n_texts() * n_tasks, VtlCell{});
  const auto& ann = corpus.annotations();
  const auto n_texts = static_cast<std::ptrdiff_t>(corpus.n_texts());

  // Each text owns its row, so rows can be filled independently.
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t d = 0; d < n_texts; ++d) {
    VtlCell* row = m.cells.data() + static_cast<std::size_t>(d) * n_tasks;
    for (auto i : corpus.annotations_of_text(static_cast<std::size_t>(d))) {
      const auto& a = ann[i];
      ++row[a.task].total;
      if (a.value != 0) ++row[a.task].nonzero;
    }
  }
  return m;
}

VtlMatrix compute_fractions_serial(const Corpus& corpus) {
  VtlMatrix m{corpus.text_ids(), corpus.task_ids(), {}};
  m.cells.assign(corpus.n_texts() * corpus.n_tasks(), VtlCell{});
  for (const auto& a : corpus.annotations()) {
    auto& cell = m.cells[a.text * corpus.n_tasks() + a.task];
    ++cell.total;
    if (a.value != 0) ++cell.nonzero;
  }
  return m;
}

VtlLabels::VtlLabels(std::vector<std::string> text_ids, std::vector<std::string> task_ids, Threshold t)
    : text_ids_(std::move(text_ids)), task_ids_(std::move(task_ids)), threshold_(std::move(t)) {
  bits_.assign(text_ids_.size() * task_ids_.size(), 0);
  defined_.assign(bits_.size(), 0);
}

void VtlLabels::set(std::size_t text, std::size_t task, std::uint8_t bit) {
  bits_[idx(text, task)] = bit ? 1 : 0;
  defined_[idx(text, task)] = 1;
}

void VtlLabels::clear(std::size_t text, std::size_t task) {
  bits_[idx(text, task)] = 0;
  defined_[idx(text, task)] = 0;
}

bool VtlLabels::row_has_defined(std::size_t text) const {
  for (auto d : defined_row(text)) {
    if (d) return true;
  }
  return false;
}

std::size_t VtlLabels::count_defined() const {
  std::size_t n = 0;
  for (auto d : defined_) n += d;
  return n;
}

std::size_t VtlLabels::count_valuable() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < bits_.size(); ++i) n += (defined_[i] && bits_[i]) ? 1 : 0;
  return n;
}

VtlLabels VtlLabels::select_rows(std::span<const std::size_t> rows) const {
  std::vector<std::string> ids;
  ids.reserve(rows.size());
  for (auto r : rows) ids.push_back(text_ids_[r]);
  VtlLabels out(std::move(ids), task_ids_, threshold_);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < n_tasks(); ++k) {
      if (defined(rows[i], k)) out.set(i, k, bit(rows[i], k));
    }
  }
  return out;
}

VtlLabels binarize(const VtlMatrix& matrix, const Threshold& t) {
  VtlLabels out(matrix.text_ids, matrix.task_ids, t);
  for (std::size_t d = 0; d < matrix.n_texts(); ++d) {
    for (std::size_t k = 0; k < matrix.n_tasks(); ++k) {
      const auto& c = matrix.at(d, k);
      if (c.defined()) out.set(d, k, t.admits(c.nonzero, c.total) ? 1 : 0);
    }
  }
  return out;
}

VtlLabels binarize(const VtlMatrix& matrix, double t) { return binarize(matrix, Threshold::from_double(t)); }

void write_vtl_csv(std::ostream& out, const VtlMatrix& matrix, const VtlLabels& labels) {
  csv::write_row(out, {"text_id", "task", "nonzero", "total", "fraction", "bit"});
  for (std::size_t d = 0; d < matrix.n_texts(); ++d) {
    for (std::size_t k = 0; k < matrix.n_tasks(); ++k) {
      const auto& c = matrix.at(d, k);
      const std::string fraction = c.defined() ? fmt::format("{}", c.fraction()) : "";
      const std::string bit = labels.defined(d, k) ? std::to_string(labels.bit(d, k)) : "";
      csv::write_row(out, {matrix.text_ids[d], matrix.task_ids[k], std::to_string(c.nonzero),
                           std::to_string(c.total), fraction, bit});
    }
  }
}

}  // namespace acqsim

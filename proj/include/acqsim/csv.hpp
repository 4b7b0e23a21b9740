#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace acqsim::csv {

/// RFC-4180 reader: comma delimiter, double-quote quoting with "" escapes,
/// quoted fields may span lines, CRLF or LF record terminators.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  /// Reads the next record into `fields`. Returns false at end of input.
  /// Throws MalformedRow on an unterminated quote or stray quote.
  bool next(std::vector<std::string>& fields);

  /// 1-based index of the record last returned (header = 1).
  std::size_t record() const noexcept { return record_; }

 private:
  std::istream& in_;
  std::size_t record_ = 0;
};

std::string escape(std::string_view field);

void write_row(std::ostream& out, std::span<const std::string> fields);
void write_row(std::ostream& out, std::initializer_list<std::string_view> fields);

}  // namespace acqsim::csv

#include "acqsim/csv.hpp"

#include <istream>
#include <ostream>

#include "acqsim/errors.hpp"

namespace acqsim {

std::string_view to_string(ErrorClass cls) {
  switch (cls) {
    case ErrorClass::usage: return "UsageError";
    case ErrorClass::data: return "DataError";
    case ErrorClass::config: return "ConfigError";
  }
  return "Error";
}

Error::Error(ErrorClass cls, std::string kind, const std::string& detail,
             std::optional<std::size_t> line)
    : std::runtime_error(kind + ": " + detail),
      cls_(cls),
      kind_(std::move(kind)),
      line_(line) {}

namespace csv {

bool Reader::next(std::vector<std::string>& fields) {
  fields.clear();
  int c = in_.get();
  if (c == std::char_traits<char>::eof()) return false;
  ++record_;

  std::string field;
  bool quoted = false;
  bool after_quote = false;  // closing quote seen; only , or EOL may follow
  for (;; c = in_.get()) {
    if (c == std::char_traits<char>::eof()) {
      if (quoted) throw malformed_row(record_, "unterminated quoted field");
      fields.push_back(std::move(field));
      return true;
    }
    const char ch = static_cast<char>(c);
    if (quoted) {
      if (ch == '"') {
        if (in_.peek() == '"') {
          in_.get();
          field.push_back('"');
        } else {
          quoted = false;
          after_quote = true;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
      after_quote = false;
    } else if (ch == '\n' || ch == '\r') {
      if (ch == '\r' && in_.peek() == '\n') in_.get();
      fields.push_back(std::move(field));
      return true;
    } else if (ch == '"') {
      if (!field.empty() || after_quote) {
        throw malformed_row(record_, "quote inside unquoted field");
      }
      quoted = true;
    } else {
      if (after_quote) throw malformed_row(record_, "text after closing quote");
      field.push_back(ch);
    }
  }
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) {
    return std::string(field);
  }
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& out, std::span<const std::string> fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << escape(fields[i]);
  }
  out << '\n';
}

void write_row(std::ostream& out, std::initializer_list<std::string_view> fields) {
  bool first = true;
  for (auto f : fields) {
    if (!first) out << ',';
    first = false;
    out << escape(f);
  }
  out << '\n';
}

}  // namespace csv
}  // namespace acqsim

#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace acqsim {

/// Coarse failure class; maps one-to-one onto CLI exit codes.
enum class ErrorClass { usage, data, config };

std::string_view to_string(ErrorClass cls);

/// Every failure raised by the library. `kind()` is a stable machine-readable
/// tag such as "MalformedRow" or "GridMismatch".
class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, std::string kind, const std::string& detail,
        std::optional<std::size_t> line = std::nullopt);

  ErrorClass error_class() const noexcept { return cls_; }
  const std::string& kind() const noexcept { return kind_; }
  /// Row number for parse errors (1-based data rows; 0 = empty input).
  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  ErrorClass cls_;
  std::string kind_;
  std::optional<std::size_t> line_;
};

inline Error data_error(std::string kind, const std::string& detail) {
  return Error(ErrorClass::data, std::move(kind), detail);
}

inline Error config_error(std::string kind, const std::string& detail) {
  return Error(ErrorClass::config, std::move(kind), detail);
}

inline Error malformed_row(std::size_t line, const std::string& detail) {
  return Error(ErrorClass::data, "MalformedRow", detail, line);
}

}  // namespace acqsim

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace vqg {

// Base for every data error raised by the library. Usage errors belong to the
// CLI layer and never derive from this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A file does not match its schema (missing header column, unknown delimiter).
class FormatError : public Error {
 public:
  using Error::Error;
};

// A single record failed to parse or validate. `line` is 1-based and counts
// the header line; `column` is empty when the whole record is at fault.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::string column, const std::string& what);

  std::size_t line() const noexcept { return line_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::string column_;
};

// A value violates a domain invariant outside of parsing.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A set of keys was expected but some were absent (missing predictions,
// missing fold entries, missing responses).
class MissingIdsError : public Error {
 public:
  MissingIdsError(const std::string& context, std::vector<std::string> ids);

  const std::vector<std::string>& ids() const noexcept { return ids_; }

 private:
  std::vector<std::string> ids_;
};

class FetchError : public Error {
 public:
  FetchError(std::string url, const std::string& what);

  const std::string& url() const noexcept { return url_; }

 private:
  std::string url_;
};

// An external process exited abnormally.
class ExternalCommandError : public Error {
 public:
  ExternalCommandError(int exit_status, std::string diagnostics,
                       const std::string& what);

  int exit_status() const noexcept { return exit_status_; }
  const std::string& diagnostics() const noexcept { return diagnostics_; }

 private:
  int exit_status_;
  std::string diagnostics_;
};

}  // namespace vqg

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "vqg/error.hpp"

namespace vqg {

ParseError::ParseError(std::size_t line, std::string column,
                       const std::string& what)
    : Error(column.empty()
                ? fmt::format("line {}: {}", line, what)
                : fmt::format("line {}, column '{}': {}", line, column, what)),
      line_(line),
      column_(std::move(column)) {}

MissingIdsError::MissingIdsError(const std::string& context,
                                 std::vector<std::string> ids)
    : Error(fmt::format("{}: {} missing id(s): {}", context, ids.size(),
                        fmt::join(ids, ", "))),
      ids_(std::move(ids)) {}

FetchError::FetchError(std::string url, const std::string& what)
    : Error(fmt::format("fetch {}: {}", url, what)), url_(std::move(url)) {}

ExternalCommandError::ExternalCommandError(int exit_status,
                                           std::string diagnostics,
                                           const std::string& what)
    : Error(what),
      exit_status_(exit_status),
      diagnostics_(std::move(diagnostics)) {}

}  // namespace vqg

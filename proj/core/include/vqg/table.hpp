#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vqg {

// Field separator of a delimited text table.
//
// Tab tables escape backslash, tab, CR and LF inside fields as \\ \t \r \n.
// Comma tables follow RFC 4180 quoting, including quoted line breaks.
enum class Delimiter : char { kTab = '\t', kComma = ',' };

struct TableRow {
  std::size_t line = 0;  // 1-based physical line where the record starts
  std::vector<std::string> fields;
};

// Streaming reader over a header-led delimited table. Blank lines are
// skipped. Header names are matched case-insensitively after trimming.
class TableReader {
 public:
  // Reads the header immediately; throws FormatError on an empty stream.
  // Without an explicit delimiter, a header containing a tab selects kTab,
  // otherwise a header containing a comma selects kComma, otherwise kTab.
  explicit TableReader(std::istream& in,
                       std::optional<Delimiter> delimiter = std::nullopt);

  Delimiter delimiter() const noexcept { return delimiter_; }
  const std::vector<std::string>& header() const noexcept { return header_; }

  std::optional<std::size_t> column(std::string_view name) const;
  // Throws FormatError naming the missing column.
  std::size_t require_column(std::string_view name) const;

  // Reads the next record. Returns false at end of stream.
  bool next(TableRow& row);

  // Throws ParseError unless the row has exactly header().size() fields.
  void expect_arity(const TableRow& row) const;

 private:
  bool read_physical_line(std::string& line);
  std::vector<std::string> split_tab(std::string_view line) const;
  bool split_comma(std::string line, std::vector<std::string>& out);

  std::istream& in_;
  Delimiter delimiter_ = Delimiter::kTab;
  std::vector<std::string> header_;
  std::size_t line_no_ = 0;
};

class TableWriter {
 public:
  TableWriter(std::ostream& out, Delimiter delimiter,
              std::span<const std::string> header);

  void write_row(std::span<const std::string> fields);
  void write_row(std::initializer_list<std::string> fields) {
    write_row(std::span<const std::string>(fields.begin(), fields.size()));
  }

 private:
  void write_fields(std::span<const std::string> fields);

  std::ostream& out_;
  Delimiter delimiter_;
  std::size_t arity_;
};

std::string escape_tsv_field(std::string_view s);
std::string unescape_tsv_field(std::string_view s);
std::string quote_csv_field(std::string_view s);

}  // namespace vqg

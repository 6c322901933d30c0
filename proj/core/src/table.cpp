#include "vqg/table.hpp"

#include <fmt/format.h>

#include "vqg/error.hpp"
#include "vqg/text.hpp"

namespace vqg {

std::string escape_tsv_field(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string unescape_tsv_field(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 == s.size()) {
      out.push_back(s[i]);
      continue;
    }
    switch (s[i + 1]) {
      case '\\': out.push_back('\\'); ++i; break;
      case 't': out.push_back('\t'); ++i; break;
      case 'n': out.push_back('\n'); ++i; break;
      case 'r': out.push_back('\r'); ++i; break;
      default: out.push_back('\\');  // unknown escape kept verbatim
    }
  }
  return out;
}

std::string quote_csv_field(std::string_view s) {
  const bool needs_quotes =
      s.find_first_of(",\"\r\n") != std::string_view::npos ||
      (!s.empty() && (s.front() == ' ' || s.back() == ' '));
  if (!needs_quotes) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

TableReader::TableReader(std::istream& in, std::optional<Delimiter> delimiter)
    : in_(in) {
  std::string line;
  do {
    if (!read_physical_line(line)) throw FormatError("table has no header row");
  } while (trim(line).empty());

  if (delimiter) {
    delimiter_ = *delimiter;
  } else if (line.find('\t') != std::string::npos) {
    delimiter_ = Delimiter::kTab;
  } else if (line.find(',') != std::string::npos) {
    delimiter_ = Delimiter::kComma;
  } else {
    delimiter_ = Delimiter::kTab;
  }

  std::vector<std::string> raw;
  if (delimiter_ == Delimiter::kTab) {
    raw = split_tab(line);
  } else if (!split_comma(line, raw)) {
    throw FormatError("unterminated quote in header row");
  }
  header_.reserve(raw.size());
  for (const auto& name : raw) header_.push_back(normalize_label(name));
}

bool TableReader::read_physical_line(std::string& line) {
  if (!std::getline(in_, line)) return false;
  ++line_no_;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

std::optional<std::size_t> TableReader::column(std::string_view name) const {
  const std::string key = normalize_label(name);
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (header_[i] == key) return i;
  }
  return std::nullopt;
}

std::size_t TableReader::require_column(std::string_view name) const {
  if (auto idx = column(name)) return *idx;
  throw FormatError(fmt::format("missing required column '{}'", name));
}

std::vector<std::string> TableReader::split_tab(std::string_view line) const {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    fields.push_back(unescape_tsv_field(line.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

// Splits one CSV record, pulling continuation lines while inside quotes.
bool TableReader::split_comma(std::string line, std::vector<std::string>& out) {
  out.clear();
  std::string field;
  bool in_quotes = false;
  std::size_t i = 0;
  while (true) {
    if (i == line.size()) {
      if (!in_quotes) break;
      std::string more;
      if (!read_physical_line(more)) return false;
      field.push_back('\n');
      line = std::move(more);
      i = 0;
      continue;
    }
    const char c = line[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
    ++i;
  }
  out.push_back(std::move(field));
  return true;
}

bool TableReader::next(TableRow& row) {
  std::string line;
  do {
    if (!read_physical_line(line)) return false;
  } while (line.empty());
  row.line = line_no_;
  if (delimiter_ == Delimiter::kTab) {
    row.fields = split_tab(line);
  } else if (!split_comma(std::move(line), row.fields)) {
    throw ParseError(row.line, "", "unterminated quoted field");
  }
  return true;
}

void TableReader::expect_arity(const TableRow& row) const {
  if (row.fields.size() != header_.size()) {
    throw ParseError(row.line, "",
                     fmt::format("expected {} fields, got {}", header_.size(),
                                 row.fields.size()));
  }
}

TableWriter::TableWriter(std::ostream& out, Delimiter delimiter,
                         std::span<const std::string> header)
    : out_(out), delimiter_(delimiter), arity_(header.size()) {
  write_fields(header);
}

void TableWriter::write_row(std::span<const std::string> fields) {
  if (fields.size() != arity_) {
    throw ValidationError(fmt::format("row has {} fields, table has {}",
                                      fields.size(), arity_));
  }
  write_fields(fields);
}

void TableWriter::write_fields(std::span<const std::string> fields) {
  const char sep = static_cast<char>(delimiter_);
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_.put(sep);
    out_ << (delimiter_ == Delimiter::kTab ? escape_tsv_field(fields[i])
                                            : quote_csv_field(fields[i]));
  }
  out_.put('\n');
}

}  // namespace vqg

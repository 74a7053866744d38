#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace stgm {

/// One CSV column. `numeric` holds parsed values when every cell is a
/// number; text is always kept so categorical use of numeric columns
/// (e.g. factor(year)) sees the original spelling.
struct Column {
  std::string name;
  std::vector<std::string> text;
  std::vector<double> numbers;
  bool numeric = false;
};

class DataTable {
 public:
  DataTable() = default;

  /// RFC 4180 CSV with a header row; UTF-8, LF or CRLF.
  static DataTable parse_csv(std::string_view text);
  static DataTable read_csv(const std::string& path);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return columns_.size(); }
  bool has(std::string_view name) const;
  const Column& column(std::string_view name) const;
  const std::vector<Column>& columns() const { return columns_; }

  /// Throws ModelError for missing, non-numeric or incomplete columns.
  const std::vector<double>& numeric(std::string_view name) const;
  const std::vector<std::string>& text(std::string_view name) const;

  void add_text_column(std::string name, std::vector<std::string> values);
  void add_numeric_column(std::string name, const std::vector<double>& values);
  /// Replaces or appends.
  void set_numeric_column(std::string name, const std::vector<double>& values);

  DataTable select_rows(const std::vector<std::size_t>& rows) const;

  void write_csv(std::ostream& out) const;
  void write_csv(const std::string& path) const;

 private:
  void push(Column c);
  std::size_t rows_ = 0;
  std::vector<Column> columns_;
};

/// Quotes a field when it contains a comma, quote or line break.
std::string csv_escape(std::string_view field);

}  // namespace stgm

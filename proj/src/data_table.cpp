#include "stgm/data_table.hpp"

#include <fstream>
#include <sstream>

#include "stgm/format.hpp"
#include "stgm/sparse_sym.hpp"

namespace stgm {

namespace {

std::vector<std::vector<std::string>> parse_records(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t i = 0;
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;
  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
  };
  for (; i < text.size(); ++i) {
    char ch = text[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (ch == ',') {
      end_field();
    } else if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      // CRLF: handled by the '\n'
    } else if (ch == '\n') {
      end_record();
    } else {
      field.push_back(ch);
      field_started = true;
    }
  }
  if (in_quotes) throw ModelError("CSV: unterminated quoted field");
  if (field_started || !record.empty()) end_record();
  return records;
}

void finalize(Column& c) {
  c.numbers.clear();
  c.numeric = !c.text.empty();
  for (const auto& s : c.text) {
    auto v = parse_double(trim(s));
    if (!v) {
      c.numeric = false;
      c.numbers.clear();
      return;
    }
    c.numbers.push_back(*v);
  }
}

}  // namespace

DataTable DataTable::parse_csv(std::string_view text) {
  auto records = parse_records(text);
  if (records.empty()) throw ModelError("CSV: missing header row");
  DataTable t;
  const auto& header = records[0];
  std::vector<Column> cols(header.size());
  for (std::size_t j = 0; j < header.size(); ++j) {
    cols[j].name = std::string(trim(header[j]));
    if (cols[j].name.empty()) throw ModelError("CSV: empty column name at position " + std::to_string(j + 1));
  }
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != header.size())
      throw ModelError("CSV: row " + std::to_string(r + 1) + " has " + std::to_string(records[r].size()) +
                       " fields, header has " + std::to_string(header.size()));
    for (std::size_t j = 0; j < header.size(); ++j) cols[j].text.push_back(std::move(records[r][j]));
  }
  t.rows_ = records.size() - 1;
  for (auto& c : cols) {
    finalize(c);
    t.push(std::move(c));
  }
  return t;
}

DataTable DataTable::read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot open CSV file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

void DataTable::push(Column c) {
  if (has(c.name)) throw ModelError("duplicate column name: " + c.name);
  if (!columns_.empty() && c.text.size() != rows_)
    throw ModelError("column " + c.name + " has " + std::to_string(c.text.size()) + " rows, expected " +
                     std::to_string(rows_));
  if (columns_.empty()) rows_ = c.text.size();
  columns_.push_back(std::move(c));
}

bool DataTable::has(std::string_view name) const {
  for (const auto& c : columns_)
    if (c.name == name) return true;
  return false;
}

const Column& DataTable::column(std::string_view name) const {
  for (const auto& c : columns_)
    if (c.name == name) return c;
  throw ModelError("unknown column: " + std::string(name));
}

const std::vector<double>& DataTable::numeric(std::string_view name) const {
  const Column& c = column(name);
  if (!c.numeric) {
    for (std::size_t i = 0; i < c.text.size(); ++i)
      if (trim(c.text[i]).empty())
        throw ModelError("column " + c.name + " has a missing value in row " + std::to_string(i + 1));
    throw ModelError("column " + c.name + " is not numeric");
  }
  return c.numbers;
}

const std::vector<std::string>& DataTable::text(std::string_view name) const {
  const Column& c = column(name);
  for (std::size_t i = 0; i < c.text.size(); ++i)
    if (trim(c.text[i]).empty())
      throw ModelError("column " + c.name + " has a missing value in row " + std::to_string(i + 1));
  return c.text;
}

void DataTable::add_text_column(std::string name, std::vector<std::string> values) {
  Column c;
  c.name = std::move(name);
  c.text = std::move(values);
  finalize(c);
  push(std::move(c));
}

void DataTable::add_numeric_column(std::string name, const std::vector<double>& values) {
  Column c;
  c.name = std::move(name);
  c.text.reserve(values.size());
  for (double v : values) c.text.push_back(format_double(v));
  c.numbers = values;
  c.numeric = !values.empty();
  push(std::move(c));
}

void DataTable::set_numeric_column(std::string name, const std::vector<double>& values) {
  for (auto& c : columns_) {
    if (c.name != name) continue;
    if (values.size() != rows_) throw ModelError("column " + name + ": row count mismatch");
    c.text.clear();
    for (double v : values) c.text.push_back(format_double(v));
    c.numbers = values;
    c.numeric = !values.empty();
    return;
  }
  add_numeric_column(std::move(name), values);
}

DataTable DataTable::select_rows(const std::vector<std::size_t>& rows) const {
  DataTable out;
  for (const auto& c : columns_) {
    Column n;
    n.name = c.name;
    for (auto r : rows) n.text.push_back(c.text.at(r));
    finalize(n);
    out.push(std::move(n));
  }
  out.rows_ = rows.size();
  return out;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

void DataTable::write_csv(std::ostream& out) const {
  for (std::size_t j = 0; j < columns_.size(); ++j) out << (j ? "," : "") << csv_escape(columns_[j].name);
  out << '\n';
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t j = 0; j < columns_.size(); ++j) out << (j ? "," : "") << csv_escape(columns_[j].text[r]);
    out << '\n';
  }
}

void DataTable::write_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelError("cannot write CSV file: " + path);
  write_csv(out);
}

}  // namespace stgm

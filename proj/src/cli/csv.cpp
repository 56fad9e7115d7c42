#include <fstream>
#include <sstream>

#include "confound_ui/cli.hpp"
#include "confound_ui/error.hpp"

namespace confound_ui::cli {

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  std::string known;
  for (const auto& h : header) known += (known.empty() ? "" : ", ") + h;
  throw InputError("column '" + name + "' not found in header (" + known + ")");
}

// RFC 4180: fields separated by commas, records by CRLF or LF; quoted fields
// may contain commas, line breaks and doubled quotes.
CsvTable parse_csv(std::istream& in) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  bool after_quote = false;
  std::size_t line = 1;
  std::size_t quote_line = 0;

  const auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
    after_quote = false;
  };
  const auto end_record = [&] {
    end_field();
    // A blank line is not a record.
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
  };

  char c;
  while (in.get(c)) {
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          quoted = false;
          after_quote = true;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == ',') {
      end_field();
    } else if (c == '\r') {
      if (in.peek() == '\n') in.get(c);
      end_record();
      ++line;
    } else if (c == '\n') {
      end_record();
      ++line;
    } else if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
      quote_line = line;
    } else {
      if (after_quote) {
        throw InputError("CSV line " + std::to_string(line) +
                         ": unexpected character after closing quote");
      }
      field_started = true;
      field.push_back(c);
    }
  }
  if (quoted) {
    throw InputError("CSV line " + std::to_string(quote_line) + ": unterminated quoted field");
  }
  if (field_started || !record.empty()) end_record();

  if (records.empty()) throw InputError("CSV input is empty");
  CsvTable t;
  t.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != t.header.size()) {
      throw InputError("CSV row " + std::to_string(r) + " has " +
                       std::to_string(records[r].size()) + " fields, header has " +
                       std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(records[r]));
  }
  return t;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open input file '" + path + "'");
  return parse_csv(in);
}

}  // namespace confound_ui::cli

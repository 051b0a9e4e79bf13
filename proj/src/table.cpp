#include "growthld/table.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "growthld/errors.hpp"

namespace growthld::io {

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string meta_text(const nlohmann::ordered_json& value) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_number_float()) return format_number(value.get<double>());
  return value.dump();
}

bool same_cell(const Cell& a, const Cell& b) {
  if (a.index() != b.index()) return false;
  if (const auto* x = std::get_if<double>(&a)) {
    const double y = std::get<double>(b);
    return (std::isnan(*x) && std::isnan(y)) || *x == y;
  }
  return a == b;
}

}  // namespace

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", x);
  return buffer;
}

double parse_number(const std::string& text) {
  if (text == "inf") return INFINITY;
  if (text == "-inf") return -INFINITY;
  if (text == "nan") return NAN;
  char* end = nullptr;
  const double value = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size()) {
    throw Error(ErrorCode::InvalidConfig, "not a number: '" + text + "'");
  }
  return value;
}

void Table::add_row(std::vector<Cell> row) {
  if (row.size() != columns_.size()) {
    throw Error(ErrorCode::InvalidConfig, "row has " + std::to_string(row.size()) +
                                              " cells, table has " +
                                              std::to_string(columns_.size()) + " columns");
  }
  rows_.push_back(std::move(row));
}

const Cell& Table::at(std::size_t row, const std::string& column) const {
  const auto it = std::find(columns_.begin(), columns_.end(), column);
  if (it == columns_.end()) throw Error(ErrorCode::InvalidConfig, "no column " + column);
  return rows_.at(row).at(static_cast<std::size_t>(it - columns_.begin()));
}

double Table::number(std::size_t row, const std::string& column) const {
  const Cell& cell = at(row, column);
  if (const auto* x = std::get_if<double>(&cell)) return *x;
  if (const auto* s = std::get_if<std::string>(&cell)) return parse_number(*s);
  return NAN;
}

std::string Table::to_csv() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    out << (i ? "," : "") << csv_field(columns_[i]);
  }
  out << "\n";
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ",";
      if (const auto* x = std::get_if<double>(&row[i])) {
        out << format_number(*x);
      } else if (const auto* s = std::get_if<std::string>(&row[i])) {
        out << csv_field(*s);
      }
    }
    out << "\n";
  }
  for (const auto& [key, value] : meta.items()) out << "# " << key << "=" << meta_text(value) << "\n";
  return out.str();
}

nlohmann::ordered_json Table::to_json() const {
  nlohmann::ordered_json j;
  j["columns"] = columns_;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& row : rows_) {
    nlohmann::ordered_json record = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < row.size(); ++i) {
      const Cell& cell = row[i];
      if (const auto* x = std::get_if<double>(&cell)) {
        if (std::isfinite(*x)) {
          record[columns_[i]] = *x;
        } else {
          record[columns_[i]] = format_number(*x);
        }
      } else if (const auto* s = std::get_if<std::string>(&cell)) {
        record[columns_[i]] = *s;
      } else {
        record[columns_[i]] = nullptr;
      }
    }
    j["rows"].push_back(std::move(record));
  }
  j["meta"] = meta;
  return j;
}

Table Table::from_json(const nlohmann::ordered_json& j) {
  try {
    Table table(j.at("columns").get<std::vector<std::string>>());
    for (const auto& record : j.at("rows")) {
      std::vector<Cell> row;
      for (const auto& column : table.columns_) {
        const auto& value = record.at(column);
        if (value.is_null()) {
          row.emplace_back(std::monostate{});
        } else if (value.is_number()) {
          row.emplace_back(value.get<double>());
        } else {
          const auto text = value.get<std::string>();
          if (text == "inf" || text == "-inf" || text == "nan") {
            row.emplace_back(parse_number(text));
          } else {
            row.emplace_back(text);
          }
        }
      }
      table.add_row(std::move(row));
    }
    if (j.contains("meta")) table.meta = j.at("meta");
    return table;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("malformed table JSON: ") + e.what());
  }
}

bool Table::operator==(const Table& other) const {
  if (columns_ != other.columns_ || rows_.size() != other.rows_.size()) return false;
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    for (std::size_t c = 0; c < columns_.size(); ++c) {
      if (!same_cell(rows_[r][c], other.rows_[r][c])) return false;
    }
  }
  return meta == other.meta;
}

}  // namespace growthld::io

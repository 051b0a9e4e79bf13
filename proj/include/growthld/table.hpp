#pragma once

// Column-ordered result tables with CSV and JSON serialization. Numbers are
// written with 17 significant digits so that re-reading reproduces them
// bit for bit; infinities are the tokens "inf" and "-inf".

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

namespace growthld::io {

/// Empty cells are std::monostate (CSV: empty field, JSON: null).
using Cell = std::variant<std::monostate, double, std::string>;

std::string format_number(double x);
/// Inverse of format_number; also accepts "inf", "-inf", "nan".
double parse_number(const std::string& text);

class Table {
 public:
  Table() = default;
  explicit Table(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  const std::vector<std::string>& columns() const { return columns_; }
  const std::vector<std::vector<Cell>>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }

  /// Appends a row; must have one cell per column.
  void add_row(std::vector<Cell> row);
  const Cell& at(std::size_t row, const std::string& column) const;
  double number(std::size_t row, const std::string& column) const;

  /// Diagnostics carried next to the rows (JSON "meta", CSV trailing
  /// "# key=value" lines).
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();

  std::string to_csv() const;
  nlohmann::ordered_json to_json() const;
  static Table from_json(const nlohmann::ordered_json& j);

  bool operator==(const Table& other) const;

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<Cell>> rows_;
};

}  // namespace growthld::io

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace isde::harness {

using Cell = std::variant<std::string, double, std::int64_t>;

/// Column-ordered result table. Reals are written with 12 significant digits.
class Table {
 public:
  Table() = default;
  explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}

  const std::vector<std::string>& header() const noexcept { return header_; }
  const std::vector<std::vector<Cell>>& rows() const noexcept { return rows_; }
  std::size_t size() const noexcept { return rows_.size(); }

  /// Throws std::invalid_argument when the row width does not match the header.
  void add_row(std::vector<Cell> row);

  std::size_t column_index(const std::string& name) const;
  const Cell& at(std::size_t row, const std::string& column) const;
  /// Numeric value of a cell (integers are widened). Throws for text cells.
  double number(std::size_t row, const std::string& column) const;
  const std::string& text(std::size_t row, const std::string& column) const;

  std::string to_csv() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<Cell>> rows_;
};

/// "%.12g", with nan/inf spelled out.
std::string format_real(double v);

void write_text(const std::filesystem::path& path, const std::string& contents);
void write_csv(const Table& table, const std::filesystem::path& path);

}  // namespace isde::harness

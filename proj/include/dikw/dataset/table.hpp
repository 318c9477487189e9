#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace dikw::dataset {

enum class ColumnType { Bool, Int, Float, Categorical, Date, Text };

std::string_view to_token(ColumnType t);
ColumnType parse_column_type(std::string_view text);

struct ColumnSpec {
  std::string name;
  ColumnType type = ColumnType::Text;
  bool nullable = true;

  bool operator==(const ColumnSpec&) const = default;
};

// Typed column with a validity mask. Storage by type:
//   Bool/Int/Date -> ints (Date as epoch seconds, UTC)
//   Float         -> reals
//   Categorical   -> texts + codes into sorted `levels`
//   Text          -> texts
class Column {
 public:
  explicit Column(ColumnSpec spec) : spec_(std::move(spec)) {}

  const ColumnSpec& spec() const { return spec_; }
  const std::string& name() const { return spec_.name; }
  ColumnType type() const { return spec_.type; }
  std::size_t size() const { return valid_.size(); }

  bool is_null(std::size_t row) const { return valid_[row] == 0; }
  const std::vector<std::uint8_t>& valid() const { return valid_; }
  const std::vector<std::int64_t>& ints() const { return ints_; }
  const std::vector<double>& reals() const { return reals_; }
  const std::vector<std::string>& texts() const { return texts_; }
  const std::vector<std::int32_t>& codes() const { return codes_; }
  const std::vector<std::string>& levels() const { return levels_; }

  bool is_numeric() const {
    return spec_.type == ColumnType::Bool || spec_.type == ColumnType::Int || spec_.type == ColumnType::Float ||
           spec_.type == ColumnType::Date;
  }
  // Numeric view of a present cell (Bool as 0/1, Date as epoch seconds).
  double number(std::size_t row) const {
    return spec_.type == ColumnType::Float ? reals_[row] : static_cast<double>(ints_[row]);
  }

  void reserve(std::size_t n);
  void push_null();
  void push_bool(bool v);
  void push_int(std::int64_t v);
  void push_real(double v);
  void push_date(std::int64_t epoch_seconds);
  void push_text(std::string v);

  // Rebuilds categorical codes; call once all rows are appended.
  void finalize();

  // Stable textual rendering of one cell (no null marker; caller checks).
  std::string render(std::size_t row) const;

 private:
  ColumnSpec spec_;
  std::vector<std::uint8_t> valid_;
  std::vector<std::int64_t> ints_;
  std::vector<double> reals_;
  std::vector<std::string> texts_;
  std::vector<std::int32_t> codes_;
  std::vector<std::string> levels_;
};

// Columns the experiment table must carry, with their fixed types.
const std::vector<ColumnSpec>& required_columns();

// Immutable after construction; safe for concurrent readers.
class EncounterTable {
 public:
  EncounterTable() = default;
  // Validates equal column lengths and the required-column schema, then
  // finalizes categorical codes.
  explicit EncounterTable(std::vector<Column> columns);

  std::size_t row_count() const { return rows_; }
  const std::vector<Column>& columns() const { return columns_; }
  std::vector<ColumnSpec> schema() const;

  bool has_column(std::string_view name) const;
  const Column& column(std::string_view name) const;  // throws MissingColumn
  const Column* find(std::string_view name) const;

 private:
  std::vector<Column> columns_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::size_t rows_ = 0;
};

// Header + rows, RFC-4180 quoting. Dates render as RFC-3339.
std::string to_csv(const EncounterTable& t);

}  // namespace dikw::dataset

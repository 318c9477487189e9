#include "dikw/dataset/table.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "dikw/common/clock.hpp"
#include "dikw/common/enum_tokens.hpp"

namespace dikw::dataset {

namespace {

constexpr TokenTable<ColumnType, 6> kTypes{{
    {ColumnType::Bool, "bool"},
    {ColumnType::Int, "int"},
    {ColumnType::Float, "float"},
    {ColumnType::Categorical, "categorical"},
    {ColumnType::Date, "date"},
    {ColumnType::Text, "text"},
}};

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::string_view to_token(ColumnType t) { return token_of(kTypes, t); }
ColumnType parse_column_type(std::string_view text) { return parse_token(kTypes, text, "column type"); }

void Column::reserve(std::size_t n) {
  valid_.reserve(n);
  switch (spec_.type) {
    case ColumnType::Bool:
    case ColumnType::Int:
    case ColumnType::Date: ints_.reserve(n); break;
    case ColumnType::Float: reals_.reserve(n); break;
    case ColumnType::Categorical:
    case ColumnType::Text: texts_.reserve(n); break;
  }
}

void Column::push_null() {
  valid_.push_back(0);
  switch (spec_.type) {
    case ColumnType::Bool:
    case ColumnType::Int:
    case ColumnType::Date: ints_.push_back(0); break;
    case ColumnType::Float: reals_.push_back(0.0); break;
    case ColumnType::Categorical:
    case ColumnType::Text: texts_.emplace_back(); break;
  }
}

void Column::push_bool(bool v) {
  valid_.push_back(1);
  ints_.push_back(v ? 1 : 0);
}

void Column::push_int(std::int64_t v) {
  valid_.push_back(1);
  ints_.push_back(v);
}

void Column::push_real(double v) {
  valid_.push_back(1);
  reals_.push_back(v);
}

void Column::push_date(std::int64_t epoch_seconds) {
  valid_.push_back(1);
  ints_.push_back(epoch_seconds);
}

void Column::push_text(std::string v) {
  valid_.push_back(1);
  texts_.push_back(std::move(v));
}

void Column::finalize() {
  if (spec_.type != ColumnType::Categorical) return;
  levels_.clear();
  for (std::size_t i = 0; i < texts_.size(); ++i) {
    if (valid_[i]) levels_.push_back(texts_[i]);
  }
  std::sort(levels_.begin(), levels_.end());
  levels_.erase(std::unique(levels_.begin(), levels_.end()), levels_.end());
  codes_.assign(texts_.size(), -1);
  for (std::size_t i = 0; i < texts_.size(); ++i) {
    if (!valid_[i]) continue;
    auto it = std::lower_bound(levels_.begin(), levels_.end(), texts_[i]);
    codes_[i] = static_cast<std::int32_t>(it - levels_.begin());
  }
}

std::string Column::render(std::size_t row) const {
  switch (spec_.type) {
    case ColumnType::Bool: return ints_[row] ? "true" : "false";
    case ColumnType::Int: return std::to_string(ints_[row]);
    case ColumnType::Date: return format_rfc3339(Timestamp{std::chrono::seconds{ints_[row]}});
    case ColumnType::Float: {
      char buf[64];
      auto res = std::to_chars(buf, buf + sizeof buf, reals_[row]);
      return std::string(buf, res.ptr);
    }
    case ColumnType::Categorical:
    case ColumnType::Text: return texts_[row];
  }
  return {};
}

const std::vector<ColumnSpec>& required_columns() {
  static const std::vector<ColumnSpec> kRequired = {
      {"patient_id", ColumnType::Text, false},
      {"variant", ColumnType::Categorical, false},
      {"clicked", ColumnType::Bool, false},
      {"authenticated", ColumnType::Bool, false},
      {"opted_out", ColumnType::Bool, false},
      {"redeemed", ColumnType::Bool, false},
      {"age", ColumnType::Int, true},
      {"gender", ColumnType::Categorical, true},
      {"state", ColumnType::Categorical, true},
      {"drug_category", ColumnType::Categorical, true},
      {"sent_at", ColumnType::Date, true},
  };
  return kRequired;
}

EncounterTable::EncounterTable(std::vector<Column> columns) : columns_(std::move(columns)) {
  rows_ = columns_.empty() ? 0 : columns_.front().size();
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    auto& c = columns_[i];
    if (c.size() != rows_) {
      throw Error(ErrorCode::MalformedInput, "column '" + c.name() + "' has a different row count");
    }
    if (!index_.emplace(c.name(), i).second) {
      throw Error(ErrorCode::DuplicateHeaderName, "duplicate column '" + c.name() + "'", {{"column", c.name()}});
    }
    c.finalize();
  }
  for (const auto& req : required_columns()) {
    auto it = index_.find(req.name);
    if (it == index_.end()) {
      throw Error(ErrorCode::MissingColumn, "missing required column '" + req.name + "'", {{"column", req.name}});
    }
    const auto& spec = columns_[it->second].spec();
    if (spec.type != req.type) {
      throw Error(ErrorCode::TypeCoercionFailure,
                  "column '" + req.name + "' must have type " + std::string(to_token(req.type)),
                  {{"column", req.name}});
    }
  }
}

std::vector<ColumnSpec> EncounterTable::schema() const {
  std::vector<ColumnSpec> out;
  out.reserve(columns_.size());
  for (const auto& c : columns_) out.push_back(c.spec());
  return out;
}

bool EncounterTable::has_column(std::string_view name) const { return index_.find(name) != index_.end(); }

const Column* EncounterTable::find(std::string_view name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &columns_[it->second];
}

const Column& EncounterTable::column(std::string_view name) const {
  if (const auto* c = find(name)) return *c;
  throw Error(ErrorCode::MissingColumn, "no column '" + std::string(name) + "'", {{"column", std::string(name)}});
}

std::string to_csv(const EncounterTable& t) {
  std::ostringstream os;
  const auto& cols = t.columns();
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (c) os << ',';
    os << csv_quote(cols[c].name());
  }
  os << '\n';
  for (std::size_t r = 0; r < t.row_count(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (c) os << ',';
      if (!cols[c].is_null(r)) os << csv_quote(cols[c].render(r));
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace dikw::dataset

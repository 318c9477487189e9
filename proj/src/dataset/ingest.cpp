#include "dikw/dataset/ingest.hpp"

#include <charconv>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "dikw/common/canonical.hpp"
#include "dikw/common/clock.hpp"
#include "dikw/common/error.hpp"

namespace dikw::dataset {

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::optional<std::int64_t> parse_int(const std::string& s) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec == std::errc() && p == s.data() + s.size()) return v;
  double d = 0;
  auto [p2, ec2] = std::from_chars(s.data(), s.data() + s.size(), d);
  if (ec2 == std::errc() && p2 == s.data() + s.size() && d == static_cast<double>(static_cast<std::int64_t>(d))) {
    return static_cast<std::int64_t>(d);
  }
  return std::nullopt;
}

std::optional<double> parse_real(const std::string& s) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec == std::errc() && p == s.data() + s.size()) return v;
  return std::nullopt;
}

std::optional<std::int64_t> parse_date(const std::string& s, const std::string& format) {
  if (format == "rfc3339") {
    try {
      return parse_rfc3339(s).time_since_epoch().count();
    } catch (const Error&) {
      return std::nullopt;
    }
  }
  std::tm tm{};
  std::istringstream in(s);
  in >> std::get_time(&tm, format.c_str());
  if (in.fail()) return std::nullopt;
  in >> std::ws;
  if (!in.eof()) return std::nullopt;
  return static_cast<std::int64_t>(timegm(&tm));
}

ColumnSpec spec_for(const std::string& name, const SchemaDescriptor& d) {
  for (const auto& req : required_columns()) {
    if (req.name == name) return req;
  }
  if (auto it = d.extra_columns.find(name); it != d.extra_columns.end()) return it->second;
  return ColumnSpec{name, ColumnType::Text, true};
}

}  // namespace

SchemaDescriptor SchemaDescriptor::from_json(const nlohmann::json& j) {
  SchemaDescriptor d;
  if (j.contains("rename")) d.rename = j.at("rename").get<std::map<std::string, std::string>>();
  d.date_format = j.value("date_format", d.date_format);
  if (j.contains("columns")) {
    for (auto it = j.at("columns").begin(); it != j.at("columns").end(); ++it) {
      ColumnSpec spec{it.key(), parse_column_type(it.value().at("type").get<std::string>()),
                      it.value().value("nullable", true)};
      d.extra_columns.emplace(it.key(), spec);
    }
  }
  return d;
}

SchemaDescriptor SchemaDescriptor::load(const std::filesystem::path& path) {
  try {
    return from_json(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedInput, "bad schema descriptor " + path.string() + ": " + e.what());
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string(), {{"path", path.string()}});
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t i = 0;
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
  while (i < text.size()) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          i += 2;
          continue;
        }
        in_quotes = false;
      } else {
        field.push_back(c);
      }
      ++i;
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\r') {
      // CRLF or bare CR ends the record
      end_record();
      if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
    } else if (c == '\n') {
      end_record();
    } else {
      field.push_back(c);
      field_started = true;
    }
    ++i;
  }
  if (in_quotes) throw Error(ErrorCode::MalformedInput, "unterminated quoted field in CSV");
  if (!field.empty() || !record.empty()) end_record();
  return records;
}

std::optional<bool> coerce_bool(std::string_view token) {
  static const std::set<std::string> kTrue{"1", "true", "yes", "y", "t"};
  static const std::set<std::string> kFalse{"0", "false", "no", "n", "f"};
  const auto t = lowercase_ascii(trim(token));
  if (kTrue.count(t)) return true;
  if (kFalse.count(t)) return false;
  return std::nullopt;
}

bool is_null_token(std::string_view token) {
  const auto t = lowercase_ascii(trim(token));
  return t.empty() || t == "na" || t == "nan" || t == "null" || t == "none";
}

EncounterTable ingest(std::string_view csv_text, const SchemaDescriptor& descriptor) {
  auto records = parse_csv(csv_text);
  if (records.empty()) throw Error(ErrorCode::MalformedInput, "CSV has no header row");
  std::vector<std::string> header;
  std::set<std::string> seen;
  for (const auto& raw : records.front()) {
    std::string name = trim(raw);
    if (auto it = descriptor.rename.find(name); it != descriptor.rename.end()) name = it->second;
    if (!seen.insert(name).second) {
      throw Error(ErrorCode::DuplicateHeaderName, "duplicate header '" + name + "'", {{"column", name}});
    }
    header.push_back(name);
  }
  for (const auto& req : required_columns()) {
    if (!seen.count(req.name)) {
      throw Error(ErrorCode::MissingColumn, "missing required column '" + req.name + "'", {{"column", req.name}});
    }
  }

  std::vector<Column> columns;
  columns.reserve(header.size());
  for (const auto& name : header) {
    columns.emplace_back(spec_for(name, descriptor));
    columns.back().reserve(records.size() - 1);
  }

  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() != header.size()) {
      throw Error(ErrorCode::MalformedInput, "row has " + std::to_string(rec.size()) + " fields, expected " +
                                                 std::to_string(header.size()),
                  {{"row", r}});
    }
    for (std::size_t c = 0; c < header.size(); ++c) {
      auto& col = columns[c];
      const auto& spec = col.spec();
      const std::string cell = spec.type == ColumnType::Text ? rec[c] : trim(rec[c]);
      auto fail = [&] {
        throw Error(ErrorCode::TypeCoercionFailure,
                    "cannot coerce '" + cell + "' to " + std::string(to_token(spec.type)) + " in column '" +
                        spec.name + "' at row " + std::to_string(r),
                    {{"row", r}, {"column", spec.name}, {"value", cell}});
      };
      if (spec.nullable && is_null_token(cell)) {
        col.push_null();
        continue;
      }
      bool ok = true;
      switch (spec.type) {
        case ColumnType::Bool:
          if (auto v = coerce_bool(cell)) col.push_bool(*v); else ok = false;
          break;
        case ColumnType::Int:
          if (auto v = parse_int(cell)) col.push_int(*v); else ok = false;
          break;
        case ColumnType::Float:
          if (auto v = parse_real(cell)) col.push_real(*v); else ok = false;
          break;
        case ColumnType::Date:
          if (auto v = parse_date(cell, descriptor.date_format)) col.push_date(*v); else ok = false;
          break;
        case ColumnType::Categorical:
        case ColumnType::Text:
          if (cell.empty()) ok = false; else col.push_text(cell);
          break;
      }
      if (!ok) {
        if (spec.nullable) col.push_null();
        else fail();
      }
    }
  }
  return EncounterTable(std::move(columns));
}

EncounterTable ingest_file(const std::filesystem::path& csv_path, const SchemaDescriptor& descriptor) {
  return ingest(read_text_file(csv_path), descriptor);
}

}  // namespace dikw::dataset

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dikw/dataset/table.hpp"

namespace dikw::dataset {

// JSON schema descriptor accompanying a CSV export:
//   {"rename": {"Source Header": "canonical_name"},
//    "date_format": "rfc3339" | strptime pattern,
//    "columns": {"extra_col": {"type": "float", "nullable": true}}}
struct SchemaDescriptor {
  std::map<std::string, std::string> rename;
  std::string date_format = "rfc3339";
  std::map<std::string, ColumnSpec> extra_columns;

  static SchemaDescriptor from_json(const nlohmann::json& j);
  static SchemaDescriptor load(const std::filesystem::path& path);
};

// RFC-4180 records. Throws MalformedInput on an unterminated quote.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

// Boolean coercion table: {1,true,yes,y,t} / {0,false,no,n,f}, case-insensitive.
std::optional<bool> coerce_bool(std::string_view token);

// Tokens treated as missing in nullable columns (besides the empty string).
bool is_null_token(std::string_view token);

EncounterTable ingest(std::string_view csv_text, const SchemaDescriptor& descriptor);
EncounterTable ingest_file(const std::filesystem::path& csv_path, const SchemaDescriptor& descriptor);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace dikw::dataset

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "dikw/common/digest.hpp"
#include "dikw/dataset/table.hpp"

namespace dikw::dataset {

struct DatasetFingerprint {
  Digest digest;
  std::size_t row_count = 0;
  std::vector<std::string> column_names;
};

// SHA-256 over a length-prefixed serialization:
//   header  "dikw-table-v1\n" then per column "<name>:<type>\n", then "\n"
//   cells   row-major; null -> "N", present -> "V<len>:<render>"
// where <render> is Column::render and <len> its byte length.
DatasetFingerprint fingerprint(const EncounterTable& t);

void to_json(nlohmann::json& j, const DatasetFingerprint& f);

}  // namespace dikw::dataset

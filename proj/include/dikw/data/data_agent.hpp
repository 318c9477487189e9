#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "dikw/artifact/artifact.hpp"
#include "dikw/artifact/topics.hpp"
#include "dikw/dataset/context.hpp"

namespace dikw::data {

inline constexpr std::string_view kAgentVersion = "data-agent/1";
inline constexpr double kDefaultBalanceTolerance = 0.05;
inline constexpr int kDefaultSmsLimit = 160;

struct ColumnMissingness {
  std::string column;
  std::int64_t null_count = 0;
  std::int64_t present_count = 0;
  double null_fraction = 0.0;
  std::vector<std::int64_t> null_rows;
};

// Columns in table order; `only` restricts to the named columns.
std::vector<ColumnMissingness> check_missingness(const dataset::EncounterTable& t,
                                                 const std::vector<std::string>& only = {});

struct BalanceReport {
  std::map<std::string, double> shares;
  std::map<std::string, std::int64_t> counts;
  double expected_share = 0.0;
  double tolerance = 0.0;
  std::vector<std::string> out_of_tolerance;
  bool passed = false;
};

// EmptyTable when no row carries a variant.
BalanceReport check_randomization_balance(const dataset::EncounterTable& t, double tolerance);

// Findings are structural only; payload is {"layer": "data", "kind",
// "findings", "violations", "passed"} with passed == violations.empty().
Artifact resolve_data_topic(const dataset::DatasetContext& data, const DataTopic& topic, Timestamp now);

}  // namespace dikw::data

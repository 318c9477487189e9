#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dikw/artifact/artifact.hpp"
#include "dikw/artifact/topics.hpp"
#include "dikw/dataset/context.hpp"
#include "dikw/info/slice.hpp"

namespace dikw::info {

inline constexpr std::string_view kAgentVersion = "information-agent/1";

struct GroupRow {
  std::string label;
  std::int64_t n = 0;
  std::optional<std::int64_t> successes;
  double estimate = 0.0;
  std::optional<double> ci_low, ci_high;
  std::optional<double> conditional;                 // Funnel: rate over the previous stage
  std::optional<std::map<std::string, std::int64_t>> counts;  // ChiSquare: observed row
};

// Computed statistics only; carries no verdict or recommendation field.
struct StatResult {
  InfoQuery query = InfoQuery::Rate;
  double estimate = 0.0;
  std::optional<double> ci_low, ci_high;
  double ci_level = 0.95;
  std::optional<double> test_statistic;
  std::optional<double> p_value;
  std::optional<double> degrees_of_freedom;
  std::int64_t n = 0;
  std::optional<std::int64_t> successes;
  bool degenerate = false;
  std::optional<std::vector<GroupRow>> group_results;
  std::vector<std::string> notes;
};

void to_json(nlohmann::json& j, const GroupRow& g);
void from_json(const nlohmann::json& j, GroupRow& g);
void to_json(nlohmann::json& j, const StatResult& r);
void from_json(const nlohmann::json& j, StatResult& r);

StatResult rate_with_ci(std::int64_t k, std::int64_t n, double level);
StatResult two_proportion_test(std::int64_t k1, std::int64_t n1, std::int64_t k2, std::int64_t n2, double level);

// Evaluates one information topic. Throws EmptySlice, DegenerateGroup,
// MissingColumn or InvalidTopic.
StatResult compute(const InfoTopic& topic, Evaluator& ev);

// Fixed sentence template per query kind.
std::string render_report(const InfoTopic& topic, const StatResult& r);

// Payload: {"layer": "information", "query", "subject", "result": StatResult}.
Artifact resolve_info_topic(const dataset::DatasetContext& data, const std::vector<TopicId>& data_deps,
                            const InfoTopic& topic, Timestamp now, kernels::Exec exec = kernels::Exec::Parallel);

StatResult stat_result_of(const Artifact& a);

}  // namespace dikw::info

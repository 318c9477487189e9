#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "dikw/artifact/topics.hpp"
#include "dikw/dataset/catalog.hpp"
#include "dikw/dataset/table.hpp"
#include "dikw/kernels/kernels.hpp"

namespace dikw::info {

// Derived metrics usable wherever a column name is expected.
//   age_band       categorical, from the context's age bins
//   char_count     int, the catalog length of the row's variant
//   strategy_tags  multi-valued; rows belong to every tag of their variant
//                  (grouping and predicates only)
inline constexpr std::string_view kAgeBand = "age_band";
inline constexpr std::string_view kCharCount = "char_count";
inline constexpr std::string_view kStrategyTags = "strategy_tags";

bool is_derived_metric(std::string_view name);

// A partition (or, for strategy_tags, an overlapping cover) of the rows,
// with labels in byte-lexicographic order.
struct Grouping {
  std::vector<std::string> labels;
  std::vector<std::int32_t> codes;        // single-membership; -1 = no group
  std::vector<kernels::Mask> memberships;  // multi-membership
  bool overlapping = false;

  bool multi() const { return overlapping; }
  kernels::Mask members(std::size_t g) const;
};

// Column resolution and slice evaluation over one table. Not thread-safe;
// create one per resolution.
class Evaluator {
 public:
  Evaluator(const dataset::EncounterTable& table, const dataset::MessageCatalog* catalog,
            std::vector<AgeBin> age_bins, kernels::Exec exec = kernels::Exec::Parallel);

  const dataset::EncounterTable& table() const { return table_; }
  kernels::Exec exec() const { return exec_; }

  // Physical or derived (age_band, char_count); throws MissingColumn.
  const dataset::Column& column(std::string_view name);
  bool knows(std::string_view name) const;

  kernels::Mask evaluate(const SliceSpec& slice);
  // slice AND restrict_to AND time window.
  kernels::Mask population(const SliceSpec& slice, const ContextSpec& context);

  Grouping grouping(std::string_view name);

 private:
  void apply(const Predicate& p, kernels::Mask& m);
  std::vector<std::uint8_t> variant_codes_with_tags(const std::set<StrategyTag>& tags) const;

  const dataset::EncounterTable& table_;
  const dataset::MessageCatalog* catalog_;
  std::vector<AgeBin> age_bins_;
  kernels::Exec exec_;
  std::map<std::string, std::unique_ptr<dataset::Column>, std::less<>> derived_;
};

std::string describe(const SliceSpec& slice);

}  // namespace dikw::info

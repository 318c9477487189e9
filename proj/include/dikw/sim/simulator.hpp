#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dikw/artifact/vocabulary.hpp"
#include "dikw/dataset/catalog.hpp"
#include "dikw/dataset/table.hpp"
#include "dikw/kernels/kernels.hpp"

// Synthetic randomized experiments with planted effects. Click logit for a
// row is base_logit[variant] + sum of strategy_effects over the variant's
// tags + age_effect[band]. Funnel stages are conditional Bernoulli draws, so
// auth implies click and redeem implies auth.
namespace dikw::sim {

inline constexpr std::size_t kDefaultRows = 50000;
inline constexpr std::size_t kLargeRows = 444691;

struct GroundTruthModel {
  std::uint64_t seed = 0;
  double default_base_logit = 0.0;
  std::map<std::string, double> base_logit;  // per variant; default above
  std::map<StrategyTag, double> strategy_effects;
  std::map<std::string, double> age_effect;  // age band label -> logit delta
  double auth_given_click = 0.5;
  double redeem_given_auth = 0.3;
  double opt_out = 0.01;
  std::vector<std::string> variants;  // empty: every catalog entry
  std::string start = "2024-05-01T00:00:00Z";
  int span_days = 14;

  static GroundTruthModel from_json(const nlohmann::json& j);
  static GroundTruthModel load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

struct AgeBandWeight {
  std::string label;
  int lo = 18;
  int hi = 44;  // inclusive
  double weight = 1.0;
};

// Finite mixture over age bands plus independent categorical marginals.
struct DemographicsMix {
  std::vector<AgeBandWeight> age_bands;
  double age_null_fraction = 0.0;
  std::map<std::string, double> gender;
  std::map<std::string, double> state;
  std::map<std::string, double> drug_category;

  static DemographicsMix defaults();
  static DemographicsMix from_json(const nlohmann::json& j);
  static DemographicsMix load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

// Counter-based uniform in [0, 1): a pure function of (seed, row, stream),
// so rows can be generated in any order or in parallel.
double uniform(std::uint64_t seed, std::uint64_t row, std::uint32_t stream);
std::uint64_t splitmix64(std::uint64_t x);

double logistic(double x);

// Variants the model assigns, in assignment order.
std::vector<std::string> assigned_variants(const GroundTruthModel& model, const dataset::MessageCatalog& catalog);

// Click logit of a variant before the age term.
double variant_logit(const GroundTruthModel& model, const dataset::MessageCatalog& catalog,
                     const std::string& variant);

dataset::EncounterTable generate(const GroundTruthModel& model, const dataset::MessageCatalog& catalog,
                                 std::size_t n, const DemographicsMix& mix,
                                 kernels::Exec exec = kernels::Exec::Parallel);

struct VariantExpectation {
  std::string variant;
  double click = 0.0;
  double authenticated = 0.0;
  double redeemed = 0.0;
};

struct OracleReport {
  std::vector<VariantExpectation> variants;
  // sign(click[a] - click[b]) for every ordered pair a < b by index.
  std::map<std::pair<std::string, std::string>, int> directions;

  const VariantExpectation& at(const std::string& variant) const;
  nlohmann::json to_json() const;
};

// Exact expectations by summation over the finite demographic mixture.
OracleReport oracle(const GroundTruthModel& model, const dataset::MessageCatalog& catalog, const DemographicsMix& mix);

// Expected click rate of a variant restricted to one age band.
double expected_click_in_band(const GroundTruthModel& model, const dataset::MessageCatalog& catalog,
                              const std::string& variant, const std::string& band);

}  // namespace dikw::sim

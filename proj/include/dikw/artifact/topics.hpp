#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "dikw/artifact/vocabulary.hpp"

namespace dikw {

// ---------------------------------------------------------------------------
// Data layer

enum class DataTopicKind {
  SchemaVerification,
  MissingValueMap,
  ExperimentDimensioning,
  IdUniqueness,
  FormatCompliance,
  Provenance,
  ExperimentConfig,
};

std::string_view to_token(DataTopicKind kind);
DataTopicKind parse_data_topic_kind(std::string_view text);

struct DataTopic {
  DataTopicKind kind = DataTopicKind::SchemaVerification;
  nlohmann::json params = nlohmann::json::object();
};

// Keys a DataTopic of the given kind may carry in `params`.
std::vector<std::string_view> allowed_params(DataTopicKind kind);

// ---------------------------------------------------------------------------
// Information layer

enum class PredicateOp { Eq, Neq, In, Lt, Le, Gt, Ge, NotNull };

std::string_view to_token(PredicateOp op);

struct Predicate {
  std::string column;
  PredicateOp op = PredicateOp::Eq;
  nlohmann::json value;  // null for NotNull, array for In
};

// Conjunction of predicates; empty means the full table.
struct SliceSpec {
  std::vector<Predicate> predicates;
};

// Inclusive age range; hi absent means open-ended ("65+").
struct AgeBin {
  std::string label;
  int lo = 0;
  std::optional<int> hi;
};

std::vector<AgeBin> default_age_bins();

struct NamedSlice {
  std::string label;
  SliceSpec slice;
};

struct TimeWindow {
  std::optional<std::string> from;  // RFC-3339, inclusive
  std::optional<std::string> to;    // RFC-3339, exclusive
};

struct ContextSpec {
  std::optional<TimeWindow> time_window;
  std::string units = "proportion";
  double ci_level = 0.95;
  std::vector<AgeBin> age_bins;       // empty: default bins
  std::vector<NamedSlice> groups;     // comparison groups (TwoProportionTest)
  std::optional<std::string> group_by;
  std::optional<std::string> covariate;  // x column for PearsonCorrelation
  SliceSpec restrict_to;                  // population restriction
};

enum class InfoQuery {
  Rate,
  Mean,
  Count,
  TwoProportionTest,
  ChiSquareIndependence,
  PearsonCorrelation,
  SegmentBreakdown,
  Funnel,
};

std::string_view to_token(InfoQuery q);
InfoQuery parse_info_query(std::string_view text);

struct InfoTopic {
  SliceSpec slice;
  ContextSpec context;
  std::string subject;
  InfoQuery query = InfoQuery::Rate;
};

// ---------------------------------------------------------------------------
// Knowledge layer

enum class DescriptorKind { Tag, Variant, Segment };

// A strategy tag, a single catalog variant, or a population segment
// (`column` = `value`, e.g. age_band = "65+").
struct Descriptor {
  DescriptorKind kind = DescriptorKind::Tag;
  std::string value;
  std::string column;  // Segment only

  bool operator==(const Descriptor&) const = default;
};

std::string describe(const Descriptor& d);

enum class Relation { Outperforms, Increases, Decreases, NoEffect };

std::string_view to_token(Relation r);

struct Claim {
  Descriptor left;
  Relation relation = Relation::Outperforms;
  Descriptor right;
  ContextSpec condition;
  std::string outcome = "clicked";
};

std::string describe(const Claim& c);

struct KnowledgeTopic {
  Claim claim;
  std::vector<InfoTopic> required_evidence;  // explicit extra evidence
};

// ---------------------------------------------------------------------------
// Wisdom layer

struct ConstraintSet {
  int max_chars = 160;
  std::vector<std::string> forbidden_tokens = {"expire", "expires soon", "last chance", "act now or"};
  // ECMAScript regex anchored at the start of the message.
  std::string required_prefix_pattern = R"(^(Hi, (it's )?|From |Following your visit: )?Dr\. [A-Z][a-z]+)";
  int min_claims_traced = 1;
};

enum class Register { Formal, ActionOriented, PersonalHealth };
std::string_view to_token(Register r);

enum class ContextAxis { MedicalUrgency, AgeCategory, ConditionType, Geography };
std::string_view to_token(ContextAxis a);

struct CombinationRule {
  std::vector<StrategyTag> tags_combined;
  std::string rationale_ref;
  // Literature-style figures carried verbatim; never recomputed.
  nlohmann::json metadata = nlohmann::json::object();
};

struct LinguisticRule {
  std::string age_band;
  Register register_ = Register::ActionOriented;
};

struct DesignRuleConfig {
  std::vector<ContextAxis> context_hierarchy = {ContextAxis::MedicalUrgency, ContextAxis::AgeCategory,
                                                ContextAxis::ConditionType, ContextAxis::Geography};
  std::vector<CombinationRule> combination_rules;
  std::vector<LinguisticRule> linguistic_map;

  static DesignRuleConfig defaults();
};

struct WisdomTopic {
  std::string objective;
  std::optional<ContextSpec> target_segment;  // nullopt: universal
  int portfolio_size = 20;
  double exploitation_fraction = 0.75;
  ConstraintSet constraints;
  DesignRuleConfig rules = DesignRuleConfig::defaults();
  std::uint64_t seed = 0;
  std::string provider_name = "Kristen Johnson";
};

// ---------------------------------------------------------------------------

using TopicBody = std::variant<DataTopic, InfoTopic, KnowledgeTopic, WisdomTopic>;

Layer layer_of(const TopicBody& body);

// Throws Error(InvalidTopic) when a type invariant fails.
void validate_topic(const TopicBody& body);

// Canonical JSON form: {"layer": ..., "body": {...}} with normalized strings.
nlohmann::json topic_to_json(const TopicBody& body);
TopicBody topic_from_json(const nlohmann::json& j);

std::string canonical_bytes(const TopicBody& body);
TopicId canonical_hash(const TopicBody& body);

// JSON (de)serializers for the individual types.
void to_json(nlohmann::json& j, const DataTopic& t);
void from_json(const nlohmann::json& j, DataTopic& t);
void to_json(nlohmann::json& j, const Predicate& p);
void from_json(const nlohmann::json& j, Predicate& p);
void to_json(nlohmann::json& j, const SliceSpec& s);
void from_json(const nlohmann::json& j, SliceSpec& s);
void to_json(nlohmann::json& j, const AgeBin& b);
void from_json(const nlohmann::json& j, AgeBin& b);
void to_json(nlohmann::json& j, const ContextSpec& c);
void from_json(const nlohmann::json& j, ContextSpec& c);
void to_json(nlohmann::json& j, const InfoTopic& t);
void from_json(const nlohmann::json& j, InfoTopic& t);
void to_json(nlohmann::json& j, const Descriptor& d);
void from_json(const nlohmann::json& j, Descriptor& d);
void to_json(nlohmann::json& j, const Claim& c);
void from_json(const nlohmann::json& j, Claim& c);
void to_json(nlohmann::json& j, const KnowledgeTopic& t);
void from_json(const nlohmann::json& j, KnowledgeTopic& t);
void to_json(nlohmann::json& j, const ConstraintSet& c);
void from_json(const nlohmann::json& j, ConstraintSet& c);
void to_json(nlohmann::json& j, const DesignRuleConfig& r);
void from_json(const nlohmann::json& j, DesignRuleConfig& r);
void to_json(nlohmann::json& j, const WisdomTopic& t);
void from_json(const nlohmann::json& j, WisdomTopic& t);

}  // namespace dikw

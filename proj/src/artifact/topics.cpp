#include "dikw/artifact/topics.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "dikw/common/canonical.hpp"
#include "dikw/common/enum_tokens.hpp"

namespace dikw {

using nlohmann::json;

namespace {

constexpr TokenTable<DataTopicKind, 7> kDataKinds{{
    {DataTopicKind::SchemaVerification, "schema_verification"},
    {DataTopicKind::MissingValueMap, "missing_value_map"},
    {DataTopicKind::ExperimentDimensioning, "experiment_dimensioning"},
    {DataTopicKind::IdUniqueness, "id_uniqueness"},
    {DataTopicKind::FormatCompliance, "format_compliance"},
    {DataTopicKind::Provenance, "provenance"},
    {DataTopicKind::ExperimentConfig, "experiment_config"},
}};

constexpr TokenTable<PredicateOp, 8> kOps{{
    {PredicateOp::Eq, "eq"},
    {PredicateOp::Neq, "neq"},
    {PredicateOp::In, "in"},
    {PredicateOp::Lt, "lt"},
    {PredicateOp::Le, "le"},
    {PredicateOp::Gt, "gt"},
    {PredicateOp::Ge, "ge"},
    {PredicateOp::NotNull, "not_null"},
}};

constexpr TokenTable<InfoQuery, 8> kQueries{{
    {InfoQuery::Rate, "rate"},
    {InfoQuery::Mean, "mean"},
    {InfoQuery::Count, "count"},
    {InfoQuery::TwoProportionTest, "two_proportion_test"},
    {InfoQuery::ChiSquareIndependence, "chi_square_independence"},
    {InfoQuery::PearsonCorrelation, "pearson_correlation"},
    {InfoQuery::SegmentBreakdown, "segment_breakdown"},
    {InfoQuery::Funnel, "funnel"},
}};

constexpr TokenTable<DescriptorKind, 3> kDescriptorKinds{{
    {DescriptorKind::Tag, "tag"},
    {DescriptorKind::Variant, "variant"},
    {DescriptorKind::Segment, "segment"},
}};

constexpr TokenTable<Relation, 4> kRelations{{
    {Relation::Outperforms, "outperforms"},
    {Relation::Increases, "increases"},
    {Relation::Decreases, "decreases"},
    {Relation::NoEffect, "no_effect"},
}};

constexpr TokenTable<Register, 3> kRegisters{{
    {Register::Formal, "formal"},
    {Register::ActionOriented, "action_oriented"},
    {Register::PersonalHealth, "personal_health"},
}};

constexpr TokenTable<ContextAxis, 4> kAxes{{
    {ContextAxis::MedicalUrgency, "medical_urgency"},
    {ContextAxis::AgeCategory, "age_category"},
    {ContextAxis::ConditionType, "condition_type"},
    {ContextAxis::Geography, "geography"},
}};

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::InvalidTopic, msg); }

template <class T>
T value_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  return it->get<T>();
}

const json& require(const json& j, const char* key) {
  if (!j.is_object()) invalid(std::string("expected object containing '") + key + "'");
  auto it = j.find(key);
  if (it == j.end()) invalid(std::string("missing field '") + key + "'");
  return *it;
}

void validate_slice(const SliceSpec& s) {
  for (const auto& p : s.predicates) {
    if (p.column.empty()) invalid("slice predicate has empty column");
    switch (p.op) {
      case PredicateOp::NotNull:
        if (!p.value.is_null()) invalid("not_null predicate takes no value");
        break;
      case PredicateOp::In:
        if (!p.value.is_array() || p.value.empty()) invalid("'in' predicate needs a non-empty array value");
        break;
      default:
        if (p.value.is_null() || p.value.is_structured()) invalid("predicate on '" + p.column + "' needs a scalar value");
    }
  }
}

void validate_context(const ContextSpec& c) {
  if (!(c.ci_level > 0.0 && c.ci_level < 1.0)) invalid("ci_level must lie in (0,1)");
  std::set<std::string> labels;
  for (const auto& b : c.age_bins) {
    if (b.label.empty() || !labels.insert(b.label).second) invalid("age bin labels must be unique and non-empty");
    if (b.hi && *b.hi < b.lo) invalid("age bin '" + b.label + "' has hi < lo");
  }
  for (const auto& g : c.groups) {
    if (g.label.empty()) invalid("context group needs a label");
    validate_slice(g.slice);
  }
  validate_slice(c.restrict_to);
}

void validate(const DataTopic& t) {
  if (!t.params.is_object()) invalid("data topic params must be an object");
  auto allowed = allowed_params(t.kind);
  for (auto it = t.params.begin(); it != t.params.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      invalid("param '" + it.key() + "' not allowed for " + std::string(to_token(t.kind)));
    }
  }
  if (auto it = t.params.find("limit"); it != t.params.end()) {
    if (!it->is_number_integer() || it->get<long long>() < 1) invalid("limit must be a positive integer");
  }
  if (auto it = t.params.find("id_column"); it != t.params.end()) {
    if (!it->is_string() || it->get<std::string>().empty()) invalid("id_column must be a non-empty string");
  }
  if (auto it = t.params.find("balance_tolerance"); it != t.params.end()) {
    if (!it->is_number() || it->get<double>() <= 0.0 || it->get<double>() > 1.0) {
      invalid("balance_tolerance must lie in (0,1]");
    }
  }
  if (auto it = t.params.find("columns"); it != t.params.end()) {
    if (!it->is_array()) invalid("columns must be an array of names");
    for (const auto& c : *it) {
      if (!c.is_string()) invalid("columns must be an array of names");
    }
  }
}

void validate(const InfoTopic& t) {
  if (t.subject.empty()) invalid("information topic needs a subject");
  validate_slice(t.slice);
  validate_context(t.context);
  switch (t.query) {
    case InfoQuery::TwoProportionTest:
      if (t.context.groups.size() != 2) invalid("two_proportion_test needs exactly two context groups");
      break;
    case InfoQuery::PearsonCorrelation:
      if (!t.context.covariate || t.context.covariate->empty()) invalid("pearson_correlation needs context.covariate");
      break;
    case InfoQuery::SegmentBreakdown:
    case InfoQuery::ChiSquareIndependence:
      if (!t.context.group_by || t.context.group_by->empty()) {
        invalid(std::string(to_token(t.query)) + " needs context.group_by");
      }
      break;
    default:
      break;
  }
}

void validate(const Descriptor& d) {
  if (d.value.empty()) invalid("descriptor value is empty");
  if (d.kind == DescriptorKind::Segment && d.column.empty()) invalid("segment descriptor needs a column");
  if (d.kind == DescriptorKind::Tag) (void)parse_strategy_tag(d.value);
}

void validate(const KnowledgeTopic& t) {
  validate(t.claim.left);
  validate(t.claim.right);
  if (t.claim.left == t.claim.right) invalid("claim left and right descriptors must differ");
  const bool left_seg = t.claim.left.kind == DescriptorKind::Segment;
  const bool right_seg = t.claim.right.kind == DescriptorKind::Segment;
  if (left_seg != right_seg) invalid("claim compares a segment with a strategy; both sides must be the same family");
  if (left_seg && t.claim.left.column != t.claim.right.column) invalid("segment descriptors must share a column");
  if (t.claim.outcome.empty()) invalid("claim outcome is empty");
  validate_context(t.claim.condition);
  for (const auto& e : t.required_evidence) validate(e);
}

void validate(const WisdomTopic& t) {
  if (t.objective.empty()) invalid("wisdom topic needs an objective");
  if (t.portfolio_size < 1) invalid("portfolio_size must be >= 1");
  if (!(t.exploitation_fraction >= 0.0 && t.exploitation_fraction <= 1.0)) {
    invalid("exploitation_fraction must lie in [0,1]");
  }
  if (t.constraints.max_chars < 1) invalid("max_chars must be >= 1");
  if (t.constraints.min_claims_traced < 0) invalid("min_claims_traced must be >= 0");
  std::set<ContextAxis> axes(t.rules.context_hierarchy.begin(), t.rules.context_hierarchy.end());
  if (axes.size() != 4 || t.rules.context_hierarchy.size() != 4) {
    invalid("context_hierarchy must be a permutation of the four context axes");
  }
  if (t.target_segment) validate_context(*t.target_segment);
}

}  // namespace

std::string_view to_token(DataTopicKind kind) { return token_of(kDataKinds, kind); }
DataTopicKind parse_data_topic_kind(std::string_view text) {
  return parse_token(kDataKinds, text, "data topic kind", ErrorCode::InvalidTopic);
}

std::vector<std::string_view> allowed_params(DataTopicKind kind) {
  switch (kind) {
    case DataTopicKind::SchemaVerification: return {};
    case DataTopicKind::MissingValueMap: return {"columns"};
    case DataTopicKind::ExperimentDimensioning: return {};
    case DataTopicKind::IdUniqueness: return {"id_column"};
    case DataTopicKind::FormatCompliance: return {"limit"};
    case DataTopicKind::Provenance: return {"source_description"};
    case DataTopicKind::ExperimentConfig: return {"balance_tolerance"};
  }
  return {};
}

std::string_view to_token(PredicateOp op) { return token_of(kOps, op); }
std::string_view to_token(InfoQuery q) { return token_of(kQueries, q); }
InfoQuery parse_info_query(std::string_view text) {
  return parse_token(kQueries, text, "information query", ErrorCode::InvalidTopic);
}
std::string_view to_token(Relation r) { return token_of(kRelations, r); }
std::string_view to_token(Register r) { return token_of(kRegisters, r); }
std::string_view to_token(ContextAxis a) { return token_of(kAxes, a); }

std::vector<AgeBin> default_age_bins() {
  return {{"18-44", 18, 44}, {"45-64", 45, 64}, {"65+", 65, std::nullopt}};
}

std::string describe(const Descriptor& d) {
  switch (d.kind) {
    case DescriptorKind::Tag: return "tag:" + std::string(display_name(parse_strategy_tag(d.value)));
    case DescriptorKind::Variant: return "variant:" + d.value;
    case DescriptorKind::Segment: return d.column + "=" + d.value;
  }
  return d.value;
}

std::string describe(const Claim& c) {
  std::ostringstream os;
  os << describe(c.left);
  switch (c.relation) {
    case Relation::Outperforms: os << " outperforms "; break;
    case Relation::Increases: os << " increases relative to "; break;
    case Relation::Decreases: os << " decreases relative to "; break;
    case Relation::NoEffect: os << " has no effect relative to "; break;
  }
  os << describe(c.right) << " on " << c.outcome;
  return os.str();
}

DesignRuleConfig DesignRuleConfig::defaults() {
  DesignRuleConfig r;
  r.combination_rules.push_back(CombinationRule{
      {StrategyTag::Authority, StrategyTag::TaskCompletion},
      "psychological-amplification",
      json{{"reported_effect_ratio", 1.7}, {"reported_ci95", {1.4, 2.1}}, {"recomputed", false}}});
  r.linguistic_map = {
      {"65+", Register::Formal},
      {"45-64", Register::ActionOriented},
      {"18-44", Register::PersonalHealth},
  };
  return r;
}

// ---------------------------------------------------------------------------
// JSON

void to_json(json& j, const DataTopic& t) {
  j = json{{"kind", std::string(to_token(t.kind))}, {"params", t.params.is_null() ? json::object() : t.params}};
}
void from_json(const json& j, DataTopic& t) {
  t.kind = parse_data_topic_kind(require(j, "kind").get<std::string>());
  t.params = j.contains("params") && !j.at("params").is_null() ? j.at("params") : json::object();
}

void to_json(json& j, const Predicate& p) {
  j = json{{"column", p.column}, {"op", std::string(to_token(p.op))}, {"value", p.value}};
}
void from_json(const json& j, Predicate& p) {
  p.column = require(j, "column").get<std::string>();
  p.op = parse_token(kOps, require(j, "op").get<std::string>(), "predicate op", ErrorCode::InvalidTopic);
  p.value = j.contains("value") ? j.at("value") : json();
}

void to_json(json& j, const SliceSpec& s) { j = json{{"predicates", s.predicates}}; }
void from_json(const json& j, SliceSpec& s) {
  s.predicates.clear();
  if (j.is_array()) {
    s.predicates = j.get<std::vector<Predicate>>();
  } else if (j.is_object() && j.contains("predicates")) {
    s.predicates = j.at("predicates").get<std::vector<Predicate>>();
  }
}

void to_json(json& j, const AgeBin& b) {
  j = json{{"label", b.label}, {"lo", b.lo}};
  if (b.hi) j["hi"] = *b.hi;
}
void from_json(const json& j, AgeBin& b) {
  b.label = require(j, "label").get<std::string>();
  b.lo = require(j, "lo").get<int>();
  b.hi = j.contains("hi") && !j.at("hi").is_null() ? std::optional<int>(j.at("hi").get<int>()) : std::nullopt;
}

void to_json(json& j, const ContextSpec& c) {
  j = json::object();
  if (c.time_window) {
    json tw = json::object();
    if (c.time_window->from) tw["from"] = *c.time_window->from;
    if (c.time_window->to) tw["to"] = *c.time_window->to;
    j["time_window"] = tw;
  }
  j["units"] = c.units;
  j["ci_level"] = c.ci_level;
  j["age_bins"] = c.age_bins;
  json groups = json::array();
  for (const auto& g : c.groups) groups.push_back(json{{"label", g.label}, {"slice", g.slice}});
  j["groups"] = groups;
  if (c.group_by) j["group_by"] = *c.group_by;
  if (c.covariate) j["covariate"] = *c.covariate;
  j["restrict"] = c.restrict_to;
}
void from_json(const json& j, ContextSpec& c) {
  c = ContextSpec{};
  if (j.is_null()) return;
  if (auto it = j.find("time_window"); it != j.end() && !it->is_null()) {
    TimeWindow tw;
    if (it->contains("from")) tw.from = it->at("from").get<std::string>();
    if (it->contains("to")) tw.to = it->at("to").get<std::string>();
    c.time_window = tw;
  }
  c.units = value_or<std::string>(j, "units", "proportion");
  c.ci_level = value_or<double>(j, "ci_level", 0.95);
  if (j.contains("age_bins")) c.age_bins = j.at("age_bins").get<std::vector<AgeBin>>();
  if (j.contains("groups")) {
    for (const auto& g : j.at("groups")) {
      c.groups.push_back(NamedSlice{require(g, "label").get<std::string>(), require(g, "slice").get<SliceSpec>()});
    }
  }
  if (j.contains("group_by") && !j.at("group_by").is_null()) c.group_by = j.at("group_by").get<std::string>();
  if (j.contains("covariate") && !j.at("covariate").is_null()) c.covariate = j.at("covariate").get<std::string>();
  if (j.contains("restrict")) c.restrict_to = j.at("restrict").get<SliceSpec>();
}

void to_json(json& j, const InfoTopic& t) {
  j = json{{"slice", t.slice}, {"context", t.context}, {"subject", t.subject}, {"query", std::string(to_token(t.query))}};
}
void from_json(const json& j, InfoTopic& t) {
  t.slice = j.contains("slice") ? j.at("slice").get<SliceSpec>() : SliceSpec{};
  t.context = j.contains("context") ? j.at("context").get<ContextSpec>() : ContextSpec{};
  t.subject = require(j, "subject").get<std::string>();
  t.query = parse_info_query(require(j, "query").get<std::string>());
}

void to_json(json& j, const Descriptor& d) {
  j = json{{"kind", std::string(token_of(kDescriptorKinds, d.kind))}, {"value", d.value}};
  if (d.kind == DescriptorKind::Tag) j["value"] = std::string(to_token(parse_strategy_tag(d.value)));
  if (d.kind == DescriptorKind::Segment) j["column"] = d.column;
}
void from_json(const json& j, Descriptor& d) {
  d.kind = parse_token(kDescriptorKinds, require(j, "kind").get<std::string>(), "descriptor kind",
                       ErrorCode::InvalidTopic);
  d.value = require(j, "value").get<std::string>();
  if (d.kind == DescriptorKind::Tag) d.value = std::string(to_token(parse_strategy_tag(d.value)));
  d.column = value_or<std::string>(j, "column", "");
}

void to_json(json& j, const Claim& c) {
  j = json{{"left", c.left},
           {"relation", std::string(to_token(c.relation))},
           {"right", c.right},
           {"condition", c.condition},
           {"outcome", c.outcome}};
}
void from_json(const json& j, Claim& c) {
  c.left = require(j, "left").get<Descriptor>();
  c.relation = parse_token(kRelations, require(j, "relation").get<std::string>(), "relation", ErrorCode::InvalidTopic);
  c.right = require(j, "right").get<Descriptor>();
  c.condition = j.contains("condition") ? j.at("condition").get<ContextSpec>() : ContextSpec{};
  c.outcome = value_or<std::string>(j, "outcome", "clicked");
}

void to_json(json& j, const KnowledgeTopic& t) {
  j = json{{"claim", t.claim}, {"required_evidence", t.required_evidence}};
}
void from_json(const json& j, KnowledgeTopic& t) {
  t.claim = require(j, "claim").get<Claim>();
  t.required_evidence.clear();
  if (j.contains("required_evidence")) t.required_evidence = j.at("required_evidence").get<std::vector<InfoTopic>>();
}

void to_json(json& j, const ConstraintSet& c) {
  j = json{{"max_chars", c.max_chars},
           {"forbidden_tokens", c.forbidden_tokens},
           {"required_prefix_pattern", c.required_prefix_pattern},
           {"min_claims_traced", c.min_claims_traced}};
}
void from_json(const json& j, ConstraintSet& c) {
  c = ConstraintSet{};
  if (j.is_null()) return;
  c.max_chars = value_or<int>(j, "max_chars", c.max_chars);
  if (j.contains("forbidden_tokens")) {
    c.forbidden_tokens = j.at("forbidden_tokens").get<std::vector<std::string>>();
  }
  if (j.contains("extra_forbidden_tokens")) {
    for (const auto& t : j.at("extra_forbidden_tokens")) c.forbidden_tokens.push_back(t.get<std::string>());
  }
  for (auto& t : c.forbidden_tokens) t = lowercase_ascii(t);
  c.required_prefix_pattern = value_or<std::string>(j, "required_prefix_pattern", c.required_prefix_pattern);
  c.min_claims_traced = value_or<int>(j, "min_claims_traced", c.min_claims_traced);
}

void to_json(json& j, const DesignRuleConfig& r) {
  json hierarchy = json::array();
  for (auto a : r.context_hierarchy) hierarchy.push_back(std::string(to_token(a)));
  json combos = json::array();
  for (const auto& c : r.combination_rules) {
    combos.push_back(json{{"tags_combined", c.tags_combined}, {"rationale_ref", c.rationale_ref}, {"metadata", c.metadata}});
  }
  json ling = json::array();
  for (const auto& l : r.linguistic_map) {
    ling.push_back(json{{"age_band", l.age_band}, {"register", std::string(to_token(l.register_))}});
  }
  j = json{{"context_hierarchy", hierarchy}, {"combination_rules", combos}, {"linguistic_map", ling}};
}
void from_json(const json& j, DesignRuleConfig& r) {
  r = DesignRuleConfig::defaults();
  if (j.is_null()) return;
  if (j.contains("context_hierarchy")) {
    r.context_hierarchy.clear();
    for (const auto& a : j.at("context_hierarchy")) {
      r.context_hierarchy.push_back(parse_token(kAxes, a.get<std::string>(), "context axis", ErrorCode::InvalidTopic));
    }
  }
  if (j.contains("combination_rules")) {
    r.combination_rules.clear();
    for (const auto& c : j.at("combination_rules")) {
      r.combination_rules.push_back(CombinationRule{require(c, "tags_combined").get<std::vector<StrategyTag>>(),
                                                    value_or<std::string>(c, "rationale_ref", ""),
                                                    c.contains("metadata") ? c.at("metadata") : json::object()});
    }
  }
  if (j.contains("linguistic_map")) {
    r.linguistic_map.clear();
    for (const auto& l : j.at("linguistic_map")) {
      r.linguistic_map.push_back(LinguisticRule{
          require(l, "age_band").get<std::string>(),
          parse_token(kRegisters, require(l, "register").get<std::string>(), "register", ErrorCode::InvalidTopic)});
    }
  }
}

void to_json(json& j, const WisdomTopic& t) {
  j = json{{"objective", t.objective},
           {"target_segment", t.target_segment ? json(*t.target_segment) : json("universal")},
           {"portfolio_size", t.portfolio_size},
           {"exploitation_fraction", t.exploitation_fraction},
           {"constraints", t.constraints},
           {"rules", t.rules},
           {"seed", t.seed},
           {"provider_name", t.provider_name}};
}
void from_json(const json& j, WisdomTopic& t) {
  t = WisdomTopic{};
  t.objective = require(j, "objective").get<std::string>();
  if (auto it = j.find("target_segment"); it != j.end() && it->is_object()) t.target_segment = it->get<ContextSpec>();
  t.portfolio_size = value_or<int>(j, "portfolio_size", t.portfolio_size);
  t.exploitation_fraction = value_or<double>(j, "exploitation_fraction", t.exploitation_fraction);
  if (j.contains("constraints")) t.constraints = j.at("constraints").get<ConstraintSet>();
  if (j.contains("rules")) t.rules = j.at("rules").get<DesignRuleConfig>();
  t.seed = value_or<std::uint64_t>(j, "seed", 0);
  t.provider_name = value_or<std::string>(j, "provider_name", t.provider_name);
}

// ---------------------------------------------------------------------------

Layer layer_of(const TopicBody& body) {
  return std::visit(
      [](const auto& t) -> Layer {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, DataTopic>) return Layer::Data;
        if constexpr (std::is_same_v<T, InfoTopic>) return Layer::Information;
        if constexpr (std::is_same_v<T, KnowledgeTopic>) return Layer::Knowledge;
        return Layer::Wisdom;
      },
      body);
}

void validate_topic(const TopicBody& body) {
  std::visit([](const auto& t) { validate(t); }, body);
}

json topic_to_json(const TopicBody& body) {
  json inner;
  std::visit([&inner](const auto& t) { inner = t; }, body);
  return normalize_strings(json{{"layer", std::string(to_token(layer_of(body)))}, {"body", inner}});
}

TopicBody topic_from_json(const json& raw) {
  try {
    const json j = normalize_strings(raw);
    const Layer layer = parse_layer(require(j, "layer").get<std::string>());
    const json& body = require(j, "body");
    switch (layer) {
      case Layer::Data: return body.get<DataTopic>();
      case Layer::Information: return body.get<InfoTopic>();
      case Layer::Knowledge: return body.get<KnowledgeTopic>();
      case Layer::Wisdom: return body.get<WisdomTopic>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidTopic, std::string("malformed topic JSON: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidTopic) throw;
    throw Error(ErrorCode::InvalidTopic, e.what(), e.detail());
  }
  invalid("unreachable layer");
}

std::string canonical_bytes(const TopicBody& body) { return canonical_dump(topic_to_json(body)); }

TopicId canonical_hash(const TopicBody& body) {
  validate_topic(body);
  return TopicId{layer_of(body), sha256(canonical_bytes(body))};
}

}  // namespace dikw

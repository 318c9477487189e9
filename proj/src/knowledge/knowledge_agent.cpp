#include "dikw/knowledge/knowledge_agent.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dikw/common/enum_tokens.hpp"
#include "dikw/common/error.hpp"

namespace dikw::knowledge {

using nlohmann::json;

namespace {

constexpr TokenTable<Band, 3> kBands{{
    {Band::Low, "low"},
    {Band::Medium, "medium"},
    {Band::High, "high"},
}};

constexpr TokenTable<RationaleSource, 3> kSources{{
    {RationaleSource::LLM, "llm"},
    {RationaleSource::Manual, "manual"},
    {RationaleSource::Canned, "canned"},
}};

constexpr double kNoEffectAlpha = 0.05;

// Variants a tag or variant descriptor stands for, in catalog order.
std::vector<std::string> variants_of(const Descriptor& d, const dataset::MessageCatalog& catalog) {
  std::vector<std::string> out;
  if (d.kind == DescriptorKind::Tag) {
    out = catalog.variants_with(parse_strategy_tag(d.value));
  } else if (d.kind == DescriptorKind::Variant && catalog.find(d.value)) {
    out.push_back(d.value);
  }
  if (out.empty()) {
    throw Error(ErrorCode::UnresolvableDescriptor, "descriptor " + describe(d) + " matches no catalog entry",
                {{"descriptor", describe(d)}});
  }
  return out;
}

InfoTopic comparison(const Claim& claim, NamedSlice left, NamedSlice right) {
  InfoTopic t;
  t.subject = claim.outcome;
  t.query = InfoQuery::TwoProportionTest;
  t.context = claim.condition;
  t.context.group_by.reset();
  t.context.covariate.reset();
  t.context.groups = {std::move(left), std::move(right)};
  return t;
}

NamedSlice equals(const std::string& column, const std::string& value) {
  return NamedSlice{value, SliceSpec{{Predicate{column, PredicateOp::Eq, value}}}};
}

bool directional(InfoQuery q) { return q == InfoQuery::TwoProportionTest || q == InfoQuery::PearsonCorrelation; }

std::string evidence_summary(const std::vector<EvidenceItem>& items) {
  std::ostringstream os;
  for (const auto& e : items) {
    os << "\n- " << e.artifact_id.str() << ": effect " << e.effect;
    if (e.p_value) os << ", p " << *e.p_value;
    os << (e.scored ? (e.direction_match ? ", matches" : ", opposes") : ", descriptive") << " the claimed direction";
  }
  return os.str();
}

std::optional<std::string> rationale_schema(const json& j) {
  if (!j.contains("theoretical_rationale") || !j.at("theoretical_rationale").is_string() ||
      j.at("theoretical_rationale").get<std::string>().empty()) {
    return std::string("missing non-empty string field 'theoretical_rationale'");
  }
  if (j.contains("generalizability_notes") && !j.at("generalizability_notes").is_string()) {
    return std::string("'generalizability_notes' must be a string");
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_token(Band b) { return token_of(kBands, b); }
Band parse_band(std::string_view text) { return parse_token(kBands, text, "confidence band"); }
std::string_view to_token(RationaleSource s) { return token_of(kSources, s); }

Band band_of(double score, const BandCutpoints& cut) {
  if (score >= cut.high) return Band::High;
  if (score >= cut.medium) return Band::Medium;
  return Band::Low;
}

double weight_of(const EvidenceItem& e) {
  if (!e.scored) return 0.0;
  if (e.p_value) return std::clamp(1.0 - *e.p_value, 0.0, 1.0);
  return std::min(1.0, std::fabs(e.effect));
}

Support empirical_support(const std::vector<EvidenceItem>& evidence) {
  double total = 0.0, signed_total = 0.0;
  for (const auto& e : evidence) {
    const double w = weight_of(e);
    total += w;
    signed_total += e.direction_match ? w : -w;
  }
  if (!(total > 0.0)) return {0.5, true};
  return {std::clamp((1.0 + signed_total / total) / 2.0, 0.0, 1.0), false};
}

EvidenceItem assess(const Claim& claim, const TopicId& id, const info::StatResult& r) {
  EvidenceItem e;
  e.artifact_id = id;
  e.effect = r.estimate;
  e.p_value = r.p_value;
  e.scored = directional(r.query) || (claim.relation == Relation::NoEffect && r.p_value.has_value());
  switch (claim.relation) {
    case Relation::Outperforms:
    case Relation::Increases: e.direction_match = r.estimate > 0.0; break;
    case Relation::Decreases: e.direction_match = r.estimate < 0.0; break;
    case Relation::NoEffect:
      e.direction_match = r.p_value ? *r.p_value >= kNoEffectAlpha : r.estimate == 0.0;
      break;
  }
  return e;
}

std::vector<InfoTopic> required_evidence(const KnowledgeTopic& topic, const dataset::MessageCatalog& catalog) {
  validate_topic(topic);
  const auto& claim = topic.claim;
  std::vector<InfoTopic> out;
  if (claim.left.kind == DescriptorKind::Segment) {
    out.push_back(comparison(claim, equals(claim.left.column, claim.left.value),
                             equals(claim.right.column, claim.right.value)));
  } else {
    const auto left = variants_of(claim.left, catalog);
    const auto right = variants_of(claim.right, catalog);
    for (const auto& lv : left) {
      for (const auto& rv : right) {
        if (lv == rv) continue;
        out.push_back(comparison(claim, equals("variant", lv), equals("variant", rv)));
      }
    }
    if (out.empty()) {
      throw Error(ErrorCode::UnresolvableDescriptor,
                  "descriptors " + describe(claim.left) + " and " + describe(claim.right) +
                      " share every variant; nothing to compare");
    }
  }
  for (const auto& extra : topic.required_evidence) out.push_back(extra);
  return out;
}

void to_json(json& j, const EvidenceItem& e) {
  j = json{{"artifact_id", e.artifact_id},
           {"direction_match", e.direction_match},
           {"p_value", e.p_value ? json(*e.p_value) : json()},
           {"effect", e.effect},
           {"scored", e.scored},
           {"weight", weight_of(e)}};
}

void from_json(const json& j, EvidenceItem& e) {
  e.artifact_id = j.at("artifact_id").get<TopicId>();
  e.direction_match = j.at("direction_match").get<bool>();
  e.p_value = j.at("p_value").is_null() ? std::nullopt : std::optional<double>(j.at("p_value").get<double>());
  e.effect = j.at("effect").get<double>();
  e.scored = j.value("scored", true);
}

void to_json(json& j, const KnowledgeClaim& c) {
  j = json{{"topic_id", c.id},
           {"claim", topic_to_json(c.topic)},
           {"hypothesis", c.hypothesis},
           {"theoretical_rationale", {{"text", c.theoretical_rationale}, {"source", to_token(c.rationale_source)}}},
           {"evidence", c.evidence},
           {"support_score", c.support_score},
           {"neutral", c.neutral},
           {"confidence_band", to_token(c.confidence_band)},
           {"generalizability_notes", c.generalizability_notes}};
}

void from_json(const json& j, KnowledgeClaim& c) {
  c.id = j.at("topic_id").get<TopicId>();
  c.topic = std::get<KnowledgeTopic>(topic_from_json(j.at("claim")));
  c.hypothesis = j.at("hypothesis").get<std::string>();
  c.theoretical_rationale = j.at("theoretical_rationale").at("text").get<std::string>();
  c.rationale_source =
      parse_token(kSources, j.at("theoretical_rationale").at("source").get<std::string>(), "rationale source");
  c.evidence = j.at("evidence").get<std::vector<EvidenceItem>>();
  c.support_score = j.at("support_score").get<double>();
  c.neutral = j.at("neutral").get<bool>();
  c.confidence_band = parse_band(j.at("confidence_band").get<std::string>());
  c.generalizability_notes = j.value("generalizability_notes", std::string());
}

KnowledgeClaim claim_of(const Artifact& a) { return a.payload.get<KnowledgeClaim>(); }

Evaluation evaluate_hypothesis(const KnowledgeTopic& topic, const dataset::MessageCatalog& catalog,
                               const ArtifactView& store, const InfoResolver& resolver, llm::Adapter* adapter,
                               const Digest& dataset_fingerprint, Timestamp now, const BandCutpoints& cut) {
  Evaluation ev;
  auto& claim = ev.claim;
  claim.topic = topic;
  claim.id = canonical_hash(topic);
  claim.hypothesis = describe(topic.claim);

  std::vector<TopicId> inputs;
  for (const auto& info_topic : required_evidence(topic, catalog)) {
    const auto id = canonical_hash(info_topic);
    std::optional<Artifact> art = store.find(id);
    if (!art) {
      ++ev.resolver_calls;
      try {
        art = resolver(info_topic);
      } catch (const Error& e) {
        throw Error(ErrorCode::EvidenceResolutionFailure,
                    "evidence " + id.str() + " failed: " + std::string(to_string(e.code())) + ": " + e.what(),
                    {{"topic_id", id.str()}, {"cause", e.to_json()}});
      }
    }
    if (std::find(inputs.begin(), inputs.end(), id) != inputs.end()) continue;
    inputs.push_back(id);
    claim.evidence.push_back(assess(topic.claim, id, info::stat_result_of(*art)));
  }

  const auto support = empirical_support(claim.evidence);
  claim.support_score = support.score;
  claim.neutral = support.neutral;
  claim.confidence_band = band_of(support.score, cut);

  std::vector<std::string> exchanges;
  if (adapter) {
    llm::Request req;
    req.layer = Layer::Knowledge;
    req.params = llm::kKnowledgeParams;
    req.user_content = "Hypothesis: " + claim.hypothesis + "\nEvidence:" + evidence_summary(claim.evidence) +
                       "\nReturn a JSON object with string fields \"theoretical_rationale\" and "
                       "\"generalizability_notes\".";
    req.hints = json{{"hypothesis", claim.hypothesis}};
    auto reply = adapter->complete_json(req, rationale_schema);
    claim.theoretical_rationale = reply.value.at("theoretical_rationale").get<std::string>();
    claim.generalizability_notes = reply.value.value("generalizability_notes", std::string());
    claim.rationale_source = adapter->mode() == llm::Mode::Canned ? RationaleSource::Canned : RationaleSource::LLM;
    exchanges = std::move(reply.exchange_ids);
  } else {
    claim.theoretical_rationale = "No rationale source configured for: " + claim.hypothesis;
    claim.rationale_source = RationaleSource::Manual;
  }

  auto& a = ev.artifact;
  a.topic_id = claim.id;
  a.payload = json(claim);
  a.payload["layer"] = "knowledge";
  std::ostringstream report;
  char score[32];
  std::snprintf(score, sizeof score, "%.4f", claim.support_score);
  report << "Hypothesis: " << claim.hypothesis << "\nSupport score " << score << " ("
         << to_token(claim.confidence_band) << ")" << (claim.neutral ? ", neutral: no weighted evidence" : "")
         << " from " << claim.evidence.size() << " evidence item(s)." << evidence_summary(claim.evidence)
         << "\nRationale (" << to_token(claim.rationale_source) << "): " << claim.theoretical_rationale;
  a.report = report.str();
  a.provenance.input_artifact_ids = inputs;
  a.provenance.dataset_fingerprint = dataset_fingerprint;
  a.provenance.agent_version = std::string(kAgentVersion);
  a.provenance.llm_exchange_ids = exchanges;
  a.created_at = now;
  return ev;
}

}  // namespace dikw::knowledge

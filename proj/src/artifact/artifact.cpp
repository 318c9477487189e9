#include "dikw/artifact/artifact.hpp"

#include "dikw/common/canonical.hpp"
#include "dikw/common/enum_tokens.hpp"

namespace dikw {

using nlohmann::json;

namespace {

constexpr TokenTable<HumanActionKind, 3> kActions{{
    {HumanActionKind::Approve, "approve"},
    {HumanActionKind::Reject, "reject"},
    {HumanActionKind::Edit, "edit"},
}};

}  // namespace

std::string_view to_token(HumanActionKind k) { return token_of(kActions, k); }
HumanActionKind parse_human_action(std::string_view text) { return parse_token(kActions, text, "review action"); }

void to_json(json& j, const HumanAction& a) {
  j = json{{"actor", a.actor},
           {"action", std::string(to_token(a.action))},
           {"timestamp", format_rfc3339(a.timestamp)},
           {"comment", a.comment}};
  if (!a.target.empty()) j["target"] = a.target;
}

void from_json(const json& j, HumanAction& a) {
  a.actor = j.at("actor").get<std::string>();
  a.action = parse_human_action(j.at("action").get<std::string>());
  a.timestamp = parse_rfc3339(j.at("timestamp").get<std::string>());
  a.comment = j.value("comment", "");
  a.target = j.value("target", "");
}

void to_json(json& j, const Provenance& p) {
  j = json{{"input_artifact_ids", p.input_artifact_ids},
           {"dataset_fingerprint", p.dataset_fingerprint.hex()},
           {"agent_version", p.agent_version},
           {"llm_exchange_ids", p.llm_exchange_ids},
           {"human_actions", p.human_actions}};
}

void from_json(const json& j, Provenance& p) {
  p.input_artifact_ids = j.at("input_artifact_ids").get<std::vector<TopicId>>();
  p.dataset_fingerprint = Digest::from_hex(j.at("dataset_fingerprint").get<std::string>());
  p.agent_version = j.at("agent_version").get<std::string>();
  p.llm_exchange_ids = j.at("llm_exchange_ids").get<std::vector<std::string>>();
  p.human_actions = j.at("human_actions").get<std::vector<HumanAction>>();
}

void to_json(json& j, const Artifact& a) {
  j = json{{"format_version", a.format_version},
           {"digest_algorithm", std::string(Digest::kAlgorithm)},
           {"topic_id", a.topic_id},
           {"payload", a.payload},
           {"report", a.report},
           {"provenance", a.provenance},
           {"created_at", format_rfc3339(a.created_at)}};
}

void from_json(const json& j, Artifact& a) {
  a.format_version = j.at("format_version").get<int>();
  a.topic_id = j.at("topic_id").get<TopicId>();
  a.payload = j.at("payload");
  a.report = j.at("report").get<std::string>();
  a.provenance = j.at("provenance").get<Provenance>();
  a.created_at = parse_rfc3339(j.at("created_at").get<std::string>());
}

std::string serialize(const Artifact& a) { return canonical_dump(json(a)); }

Artifact deserialize_artifact(std::string_view bytes) {
  try {
    return json::parse(bytes).get<Artifact>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedInput, std::string("malformed artifact: ") + e.what());
  }
}

std::vector<std::string> validate_artifact(const Artifact& a, const ArtifactView& store) {
  std::vector<std::string> violations;
  if (a.report.empty()) violations.emplace_back("empty report");
  const bool payload_empty = a.payload.is_null() || (a.payload.is_structured() && a.payload.empty());
  if (payload_empty) violations.emplace_back("empty payload");
  if (!payload_empty) {
    auto it = a.payload.is_object() ? a.payload.find("layer") : a.payload.end();
    if (!a.payload.is_object() || it == a.payload.end() || !it->is_string()) {
      violations.emplace_back("layer mismatch: payload carries no layer tag");
    } else if (*it != std::string(to_token(a.topic_id.layer))) {
      violations.emplace_back("layer mismatch: topic is " + std::string(to_token(a.topic_id.layer)) +
                              ", payload is " + it->get<std::string>());
    }
  }
  for (const auto& input : a.provenance.input_artifact_ids) {
    if (!store.contains(input)) violations.push_back("dangling provenance: " + input.str());
    if (rank(input.layer) > rank(a.topic_id.layer)) {
      violations.push_back("layer monotonicity: input " + input.str() + " is from a higher layer");
    }
  }
  if (a.format_version != kArtifactFormatVersion) violations.emplace_back("unsupported format_version");
  return violations;
}

}  // namespace dikw

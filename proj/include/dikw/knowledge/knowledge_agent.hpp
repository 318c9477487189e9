#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dikw/artifact/artifact.hpp"
#include "dikw/artifact/topics.hpp"
#include "dikw/dataset/catalog.hpp"
#include "dikw/info/info_agent.hpp"
#include "dikw/llm/llm.hpp"

namespace dikw::knowledge {

inline constexpr std::string_view kAgentVersion = "knowledge-agent/1";

enum class Band { Low, Medium, High };
std::string_view to_token(Band b);
Band parse_band(std::string_view text);

struct BandCutpoints {
  double high = 0.8;
  double medium = 0.6;
};

Band band_of(double score, const BandCutpoints& cut = {});

enum class RationaleSource { LLM, Manual, Canned };
std::string_view to_token(RationaleSource s);

struct EvidenceItem {
  TopicId artifact_id;
  bool direction_match = false;
  std::optional<double> p_value;
  double effect = 0.0;
  bool scored = true;  // false for non-directional evidence (weight 0)
};

// Weight of one item: clamp(1 - p, 0, 1), or min(1, |effect|) without p.
double weight_of(const EvidenceItem& e);

struct Support {
  double score = 0.5;
  bool neutral = true;
};

// score = (1 + sum(w*d) / sum(w)) / 2 with d = +1 on a direction match,
// -1 otherwise; 0.5 and neutral when the weights sum to zero.
Support empirical_support(const std::vector<EvidenceItem>& evidence);

// Reads one resolved information result against the claim's relation.
// The first group of a two-group comparison is the claim's left side.
EvidenceItem assess(const Claim& claim, const TopicId& id, const info::StatResult& r);

// Generated evidence plus the topic's explicit required_evidence. A tag or
// variant comparison expands to one two-proportion test per (left variant,
// right variant) pair with distinct variants; a segment comparison to a
// single two-proportion test between the two segments.
// UnresolvableDescriptor when a side matches no catalog entry.
std::vector<InfoTopic> required_evidence(const KnowledgeTopic& topic, const dataset::MessageCatalog& catalog);

struct KnowledgeClaim {
  TopicId id;
  KnowledgeTopic topic;
  std::string hypothesis;
  std::string theoretical_rationale;
  RationaleSource rationale_source = RationaleSource::Canned;
  std::vector<EvidenceItem> evidence;
  double support_score = 0.5;
  bool neutral = true;
  Band confidence_band = Band::Low;
  std::string generalizability_notes;
};

void to_json(nlohmann::json& j, const EvidenceItem& e);
void from_json(const nlohmann::json& j, EvidenceItem& e);
void to_json(nlohmann::json& j, const KnowledgeClaim& c);
void from_json(const nlohmann::json& j, KnowledgeClaim& c);

KnowledgeClaim claim_of(const Artifact& a);

// Resolves and publishes a missing information topic, returning its artifact.
using InfoResolver = std::function<Artifact(const InfoTopic&)>;

struct Evaluation {
  Artifact artifact;
  KnowledgeClaim claim;
  int resolver_calls = 0;
};

// Evidence already in `store` is reused; the rest goes through `resolver`.
// Any resolver failure raises EvidenceResolutionFailure naming the topic.
// `adapter` may be null, in which case the rationale is marked Manual and
// left as a placeholder.
Evaluation evaluate_hypothesis(const KnowledgeTopic& topic, const dataset::MessageCatalog& catalog,
                               const ArtifactView& store, const InfoResolver& resolver, llm::Adapter* adapter,
                               const Digest& dataset_fingerprint, Timestamp now, const BandCutpoints& cut = {});

}  // namespace dikw::knowledge

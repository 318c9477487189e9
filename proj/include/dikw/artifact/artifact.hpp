#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dikw/artifact/vocabulary.hpp"
#include "dikw/common/clock.hpp"
#include "dikw/common/digest.hpp"

namespace dikw {

inline constexpr int kArtifactFormatVersion = 1;

enum class HumanActionKind { Approve, Reject, Edit };
std::string_view to_token(HumanActionKind k);
HumanActionKind parse_human_action(std::string_view text);

struct HumanAction {
  std::string actor;
  HumanActionKind action = HumanActionKind::Approve;
  Timestamp timestamp{};
  std::string comment;
  std::string target;  // topic id, or candidate name for portfolio actions

  bool operator==(const HumanAction&) const = default;
};

struct Provenance {
  std::vector<TopicId> input_artifact_ids;
  Digest dataset_fingerprint;
  std::string agent_version;
  std::vector<std::string> llm_exchange_ids;
  std::vector<HumanAction> human_actions;
};

struct Artifact {
  int format_version = kArtifactFormatVersion;
  TopicId topic_id;
  nlohmann::json payload;  // carries a "layer" tag
  std::string report;
  Provenance provenance;
  Timestamp created_at{};
};

void to_json(nlohmann::json& j, const HumanAction& a);
void from_json(const nlohmann::json& j, HumanAction& a);
void to_json(nlohmann::json& j, const Provenance& p);
void from_json(const nlohmann::json& j, Provenance& p);
void to_json(nlohmann::json& j, const Artifact& a);
void from_json(const nlohmann::json& j, Artifact& a);

// Byte-stable serialized form written to the store.
std::string serialize(const Artifact& a);
Artifact deserialize_artifact(std::string_view bytes);

// Read-only lookup used for provenance checks.
class ArtifactView {
 public:
  virtual ~ArtifactView() = default;
  virtual bool contains(const TopicId& id) const = 0;
  virtual std::optional<Artifact> find(const TopicId& id) const = 0;
};

// Empty result means valid. Each entry names one violated invariant.
std::vector<std::string> validate_artifact(const Artifact& a, const ArtifactView& store);

}  // namespace dikw

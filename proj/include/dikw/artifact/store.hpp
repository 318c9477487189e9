#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <vector>

#include "dikw/artifact/artifact.hpp"

namespace dikw {

enum class PublishOutcome {
  Stored,               // first writer
  Duplicate,            // already present with an identical payload
  NondeterminismAlarm,  // already present with a different payload
};

std::string_view to_token(PublishOutcome o);

class ArtifactStore : public ArtifactView {
 public:
  // Atomic and idempotent: the first writer wins, later writers compare
  // payload digests and discard.
  virtual PublishOutcome publish(const Artifact& a) = 0;
  virtual std::vector<TopicId> list() const = 0;
  // Appends a review action to a stored artifact's provenance. The payload is
  // untouched, so the publish-time payload identity still holds.
  virtual Artifact append_human_action(const TopicId& id, const HumanAction& action) = 0;
};

// Content-addressed files: <root>/<dataset-fingerprint>/<layer>/<topic-hash>.json.
// The fingerprint partition keys every artifact on (dataset, topic).
class FileArtifactStore final : public ArtifactStore {
 public:
  FileArtifactStore(std::filesystem::path root, const Digest& dataset_fingerprint);

  bool contains(const TopicId& id) const override;
  std::optional<Artifact> find(const TopicId& id) const override;
  PublishOutcome publish(const Artifact& a) override;
  std::vector<TopicId> list() const override;
  Artifact append_human_action(const TopicId& id, const HumanAction& action) override;

  std::filesystem::path path_of(const TopicId& id) const;
  const std::filesystem::path& partition() const { return partition_; }

  // Searches every fingerprint partition under `root` for a topic hash.
  static std::optional<std::filesystem::path> locate(const std::filesystem::path& root, const Digest& topic_hash);

 private:
  std::filesystem::path partition_;
};

class MemoryArtifactStore final : public ArtifactStore {
 public:
  bool contains(const TopicId& id) const override;
  std::optional<Artifact> find(const TopicId& id) const override;
  PublishOutcome publish(const Artifact& a) override;
  std::vector<TopicId> list() const override;
  Artifact append_human_action(const TopicId& id, const HumanAction& action) override;

 private:
  mutable std::mutex mu_;
  std::map<TopicId, std::string> items_;
};

}  // namespace dikw

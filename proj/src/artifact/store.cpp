#include "dikw/artifact/store.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dikw/common/canonical.hpp"
#include "dikw/common/error.hpp"

namespace dikw {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool same_payload(const std::string& existing_bytes, const Artifact& incoming) {
  const auto existing = deserialize_artifact(existing_bytes);
  return canonical_digest(existing.payload) == canonical_digest(incoming.payload);
}

std::atomic<unsigned long> tmp_counter{0};
std::mutex amend_mu;

void write_file(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + p.string());
  out << bytes;
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "short write to " + p.string());
}

fs::path tmp_path(const fs::path& partition, const TopicId& id) {
  const auto dir = partition / ".tmp";
  fs::create_directories(dir);
  return dir / (id.hash.hex() + "." + std::to_string(::getpid()) + "." + std::to_string(tmp_counter.fetch_add(1)));
}

}  // namespace

std::string_view to_token(PublishOutcome o) {
  switch (o) {
    case PublishOutcome::Stored: return "stored";
    case PublishOutcome::Duplicate: return "duplicate";
    case PublishOutcome::NondeterminismAlarm: return "nondeterminism_alarm";
  }
  return "unknown";
}

FileArtifactStore::FileArtifactStore(fs::path root, const Digest& dataset_fingerprint)
    : partition_(std::move(root) / dataset_fingerprint.hex()) {
  fs::create_directories(partition_);
}

fs::path FileArtifactStore::path_of(const TopicId& id) const {
  return partition_ / std::string(to_token(id.layer)) / (id.hash.hex() + ".json");
}

bool FileArtifactStore::contains(const TopicId& id) const { return fs::exists(path_of(id)); }

std::optional<Artifact> FileArtifactStore::find(const TopicId& id) const {
  const auto p = path_of(id);
  if (!fs::exists(p)) return std::nullopt;
  return deserialize_artifact(read_file(p));
}

PublishOutcome FileArtifactStore::publish(const Artifact& a) {
  const auto final_path = path_of(a.topic_id);
  fs::create_directories(final_path.parent_path());
  const auto tmp = tmp_path(partition_, a.topic_id);
  write_file(tmp, serialize(a));
  // link(2) fails with EEXIST if another writer got there first.
  const int rc = ::link(tmp.c_str(), final_path.c_str());
  const int err = errno;
  fs::remove(tmp);
  if (rc == 0) return PublishOutcome::Stored;
  if (err != EEXIST) {
    throw Error(ErrorCode::Io, "cannot publish " + final_path.string() + ": " + std::strerror(err));
  }
  return same_payload(read_file(final_path), a) ? PublishOutcome::Duplicate : PublishOutcome::NondeterminismAlarm;
}

std::vector<TopicId> FileArtifactStore::list() const {
  std::vector<TopicId> ids;
  for (auto layer : {Layer::Data, Layer::Information, Layer::Knowledge, Layer::Wisdom}) {
    const auto dir = partition_ / std::string(to_token(layer));
    if (!fs::exists(dir)) continue;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.path().extension() != ".json") continue;
      ids.push_back(TopicId{layer, Digest::from_hex(entry.path().stem().string())});
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

Artifact FileArtifactStore::append_human_action(const TopicId& id, const HumanAction& action) {
  std::lock_guard lock(amend_mu);
  const auto p = path_of(id);
  if (!fs::exists(p)) throw Error(ErrorCode::NotFound, "no artifact " + id.str(), {{"topic_id", id.str()}});
  auto a = deserialize_artifact(read_file(p));
  a.provenance.human_actions.push_back(action);
  const auto tmp = tmp_path(partition_, id);
  write_file(tmp, serialize(a));
  fs::rename(tmp, p);
  return a;
}

std::optional<fs::path> FileArtifactStore::locate(const fs::path& root, const Digest& topic_hash) {
  if (!fs::exists(root)) return std::nullopt;
  std::vector<fs::path> partitions;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) partitions.push_back(entry.path());
  }
  std::sort(partitions.begin(), partitions.end());
  for (const auto& part : partitions) {
    for (auto layer : {Layer::Data, Layer::Information, Layer::Knowledge, Layer::Wisdom}) {
      auto p = part / std::string(to_token(layer)) / (topic_hash.hex() + ".json");
      if (fs::exists(p)) return p;
    }
  }
  return std::nullopt;
}

bool MemoryArtifactStore::contains(const TopicId& id) const {
  std::lock_guard lock(mu_);
  return items_.count(id) != 0;
}

std::optional<Artifact> MemoryArtifactStore::find(const TopicId& id) const {
  std::lock_guard lock(mu_);
  auto it = items_.find(id);
  if (it == items_.end()) return std::nullopt;
  return deserialize_artifact(it->second);
}

PublishOutcome MemoryArtifactStore::publish(const Artifact& a) {
  std::lock_guard lock(mu_);
  auto [it, inserted] = items_.emplace(a.topic_id, serialize(a));
  if (inserted) return PublishOutcome::Stored;
  return same_payload(it->second, a) ? PublishOutcome::Duplicate : PublishOutcome::NondeterminismAlarm;
}

Artifact MemoryArtifactStore::append_human_action(const TopicId& id, const HumanAction& action) {
  std::lock_guard lock(mu_);
  auto it = items_.find(id);
  if (it == items_.end()) throw Error(ErrorCode::NotFound, "no artifact " + id.str(), {{"topic_id", id.str()}});
  auto a = deserialize_artifact(it->second);
  a.provenance.human_actions.push_back(action);
  it->second = serialize(a);
  return a;
}

std::vector<TopicId> MemoryArtifactStore::list() const {
  std::lock_guard lock(mu_);
  std::vector<TopicId> ids;
  for (const auto& [id, _] : items_) ids.push_back(id);
  return ids;
}

}  // namespace dikw

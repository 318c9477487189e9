#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dikw/artifact/artifact.hpp"
#include "dikw/artifact/store.hpp"
#include "dikw/artifact/topics.hpp"
#include "dikw/kernels/kernels.hpp"
#include "dikw/llm/llm.hpp"
#include "dikw/wisdom/wisdom_agent.hpp"

namespace dikw::orch {

enum class TopicStatus { Pending, AwaitingApproval, Ready, Running, Resolved, Failed, Rejected };

std::string_view to_token(TopicStatus s);
TopicStatus parse_status(std::string_view text);
bool is_terminal(TopicStatus s);
// Pending->AwaitingApproval->{Ready,Rejected}; Pending->Ready;
// Ready->Running->{Resolved,Failed}. Pending may also fail or resolve from
// cache, and a crash returns Running to Ready.
bool transition_allowed(TopicStatus from, TopicStatus to);

struct TopicState {
  TopicId id;
  TopicBody body;
  TopicStatus status = TopicStatus::Pending;
  std::vector<TopicId> deps;
  std::optional<TopicId> spawned_by;
  std::optional<std::string> error;
  nlohmann::json error_detail;  // null, or {code, message, detail, cause?}
  std::vector<HumanAction> human_actions;  // carried into the artifact
  std::optional<TopicId> edited_from, edited_to;
  bool seed = false;
  bool cached = false;  // resolved from the store without execution
};

nlohmann::json to_json(const TopicState& s);
TopicState topic_state_from_json(const nlohmann::json& j);

// Either a CSV export with its schema descriptor, or a simulator spec.
struct DatasetRef {
  std::string csv;
  std::string schema;  // optional
  std::string model;   // simulator model file
  std::string demographics;
  std::size_t rows = 0;  // 0: default desk-scale size
};

struct SeedSpec {
  TopicBody body;
  std::vector<std::size_t> depends_on;  // indices into the seed list
};

struct RunConfig {
  DatasetRef dataset;
  std::string catalog;
  std::vector<SeedSpec> seeds;
  std::map<Layer, bool> review_gates = {
      {Layer::Data, false}, {Layer::Information, false}, {Layer::Knowledge, true}, {Layer::Wisdom, true}};
  int max_parallelism = 4;
  std::optional<llm::Mode> llm_mode;
  std::string cassette_dir;
  std::string clock = "system";
  // Relative paths resolve against this directory; not part of identity.
  std::filesystem::path base_dir;

  static RunConfig from_json(const nlohmann::json& j, std::filesystem::path base_dir = {});
  static RunConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  std::filesystem::path resolve(const std::string& p) const;
  void gates_off();
};

// Throws InvalidTopic naming a node on a cycle.
void check_acyclic(const std::map<TopicId, std::vector<TopicId>>& graph);

struct TraceEvent {
  TopicId id;
  int running_now = 0;
  bool deps_resolved = true;
};

struct RunStats {
  int executions = 0;
  int peak_running = 0;
  int safety_violations = 0;
  int resolver_calls = 0;
  int steps = 0;
};

struct RunSnapshot {
  std::string run_id;
  Digest fingerprint;
  std::vector<TopicState> topics;
  RunStats stats;
  bool quiescent = false;  // no Pending/Ready/Running topic can advance
  bool active = false;     // a driver is currently stepping the run

  std::map<TopicStatus, int> counts() const;
  const TopicState* find(const TopicId& id) const;
};

nlohmann::json to_json(const RunSnapshot& s);

struct ReviewRequest {
  HumanActionKind action = HumanActionKind::Approve;
  std::string actor;
  std::string comment;
  std::optional<nlohmann::json> new_body;  // Edit: topic JSON of the same layer
  std::optional<std::string> candidate;    // portfolio-level action on a Wisdom artifact
};

ReviewRequest review_request_from_json(const nlohmann::json& j);

struct ReviewResult {
  TopicState state;
  std::optional<TopicState> created;  // Edit: the replacement topic
};

class Run;

// Single-process engine. Each run serializes its mutations behind one lock;
// agent executions run concurrently up to the run's max_parallelism and
// publish through the content-addressed store.
class Engine {
 public:
  struct Options {
    std::filesystem::path state_dir = ".dikw";  // holds runs/ and store/
    kernels::Exec exec = kernels::Exec::Parallel;
    // Test hook called after each publish; throwing from it aborts the step
    // without saving, which is how a crash is simulated.
    std::function<void(const TopicId&)> after_publish;
  };

  explicit Engine(Options options);
  ~Engine();

  const Options& options() const { return options_; }
  std::filesystem::path runs_dir() const;
  std::filesystem::path store_dir() const;

  std::string submit(const RunConfig& config);
  // Loads a persisted run; Running topics go back to Ready.
  void resume(const std::string& run_id);
  bool loaded(const std::string& run_id) const;
  std::vector<std::string> list_runs() const;

  RunSnapshot step(const std::string& run_id);
  RunSnapshot run(const std::string& run_id, int max_steps = 100000);
  RunSnapshot snapshot(const std::string& run_id);
  std::vector<TraceEvent> trace(const std::string& run_id);

  ReviewResult review(const std::string& run_id, const TopicId& topic, const ReviewRequest& request);

  // Runs containing the topic, most recent first.
  std::vector<std::string> runs_with(const TopicId& topic);

  // Candidates of every resolved Wisdom topic with review flags applied.
  std::vector<wisdom::MessageCandidate> portfolio(const std::string& run_id);
  std::optional<Artifact> artifact(const std::string& run_id, const TopicId& id);
  // Looks a topic hash up across every dataset partition of the store.
  std::optional<Artifact> find_artifact(const Digest& topic_hash) const;
  std::vector<nlohmann::json> action_log(const std::string& run_id);

  void set_active(const std::string& run_id, bool active);

 private:
  std::shared_ptr<Run> get(const std::string& run_id);

  Options options_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Run>> runs_;
};

// Applies the review flags recorded in a Wisdom artifact's provenance.
std::vector<wisdom::MessageCandidate> reviewed_candidates(const Artifact& wisdom_artifact);

}  // namespace dikw::orch

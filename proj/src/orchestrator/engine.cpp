#include "dikw/orchestrator/engine.hpp"

#include <algorithm>
#include <fstream>
#include <thread>

#include "dikw/common/canonical.hpp"
#include "dikw/common/enum_tokens.hpp"
#include "dikw/common/error.hpp"
#include "dikw/data/data_agent.hpp"
#include "dikw/dataset/catalog.hpp"
#include "dikw/dataset/context.hpp"
#include "dikw/dataset/fingerprint.hpp"
#include "dikw/dataset/ingest.hpp"
#include "dikw/info/info_agent.hpp"
#include "dikw/knowledge/knowledge_agent.hpp"
#include "dikw/sim/simulator.hpp"

namespace dikw::orch {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr TokenTable<TopicStatus, 7> kStatuses{{
    {TopicStatus::Pending, "pending"},
    {TopicStatus::AwaitingApproval, "awaiting_approval"},
    {TopicStatus::Ready, "ready"},
    {TopicStatus::Running, "running"},
    {TopicStatus::Resolved, "resolved"},
    {TopicStatus::Failed, "failed"},
    {TopicStatus::Rejected, "rejected"},
}};

std::string read_all(const fs::path& p) { return dataset::read_text_file(p); }

void write_atomic(const fs::path& p, const std::string& bytes) {
  const auto tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp);
    out << bytes;
    out.flush();
    if (!out) throw Error(ErrorCode::Io, "short write to " + tmp);
  }
  fs::rename(tmp, p);
}

json opt_id(const std::optional<TopicId>& id) { return id ? json(id->str()) : json(); }

std::optional<TopicId> opt_id_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return TopicId::parse(j.at(key).get<std::string>());
}

}  // namespace

std::string_view to_token(TopicStatus s) { return token_of(kStatuses, s); }
TopicStatus parse_status(std::string_view text) { return parse_token(kStatuses, text, "topic status"); }

bool is_terminal(TopicStatus s) {
  return s == TopicStatus::Resolved || s == TopicStatus::Failed || s == TopicStatus::Rejected;
}

bool transition_allowed(TopicStatus from, TopicStatus to) {
  using S = TopicStatus;
  switch (from) {
    case S::Pending: return to == S::AwaitingApproval || to == S::Ready || to == S::Resolved || to == S::Failed;
    case S::AwaitingApproval: return to == S::Ready || to == S::Rejected;
    case S::Ready: return to == S::Running || to == S::Resolved;
    case S::Running: return to == S::Resolved || to == S::Failed || to == S::Ready;
    case S::Resolved:
    case S::Failed:
    case S::Rejected: return false;
  }
  return false;
}

json to_json(const TopicState& s) {
  json deps = json::array();
  for (const auto& d : s.deps) deps.push_back(d.str());
  return json{{"id", s.id.str()},
              {"layer", to_token(s.id.layer)},
              {"topic", topic_to_json(s.body)},
              {"status", to_token(s.status)},
              {"deps", deps},
              {"spawned_by", opt_id(s.spawned_by)},
              {"error", s.error ? json(*s.error) : json()},
              {"error_detail", s.error_detail},
              {"human_actions", s.human_actions},
              {"edited_from", opt_id(s.edited_from)},
              {"edited_to", opt_id(s.edited_to)},
              {"seed", s.seed},
              {"cached", s.cached}};
}

TopicState topic_state_from_json(const json& j) {
  TopicState s;
  s.id = TopicId::parse(j.at("id").get<std::string>());
  s.body = topic_from_json(j.at("topic"));
  s.status = parse_status(j.at("status").get<std::string>());
  for (const auto& d : j.at("deps")) s.deps.push_back(TopicId::parse(d.get<std::string>()));
  s.spawned_by = opt_id_from(j, "spawned_by");
  if (j.contains("error") && !j.at("error").is_null()) s.error = j.at("error").get<std::string>();
  s.error_detail = j.value("error_detail", json());
  s.human_actions = j.value("human_actions", std::vector<HumanAction>{});
  s.edited_from = opt_id_from(j, "edited_from");
  s.edited_to = opt_id_from(j, "edited_to");
  s.seed = j.value("seed", false);
  s.cached = j.value("cached", false);
  return s;
}

// ---------------------------------------------------------------------------

RunConfig RunConfig::from_json(const json& j, fs::path base_dir) {
  RunConfig c;
  c.base_dir = std::move(base_dir);
  try {
    const auto& d = j.at("dataset");
    if (d.contains("simulate")) {
      const auto& s = d.at("simulate");
      c.dataset.model = s.at("model").get<std::string>();
      c.dataset.demographics = s.value("demographics", std::string());
      c.dataset.rows = s.value("rows", std::size_t{0});
    } else {
      c.dataset.csv = d.at("csv").get<std::string>();
      c.dataset.schema = d.value("schema", std::string());
    }
    c.catalog = j.at("catalog").get<std::string>();
    for (const auto& s : j.value("seeds", json::array())) {
      SeedSpec seed;
      if (s.contains("topic")) {
        seed.body = topic_from_json(s.at("topic"));
        seed.depends_on = s.value("depends_on", std::vector<std::size_t>{});
      } else {
        seed.body = topic_from_json(s);
      }
      c.seeds.push_back(std::move(seed));
    }
    if (j.contains("review_gates")) {
      for (const auto& [k, v] : j.at("review_gates").items()) c.review_gates[parse_layer(k)] = v.get<bool>();
    }
    c.max_parallelism = j.value("max_parallelism", c.max_parallelism);
    if (j.contains("llm")) {
      const auto& l = j.at("llm");
      if (l.contains("mode")) c.llm_mode = llm::parse_mode(l.at("mode").get<std::string>());
      c.cassette_dir = l.value("cassette_dir", std::string());
    }
    c.clock = j.value("clock", c.clock);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedInput, std::string("malformed run config: ") + e.what());
  }
  if (c.max_parallelism < 1) throw Error(ErrorCode::MalformedInput, "max_parallelism must be >= 1");
  for (std::size_t i = 0; i < c.seeds.size(); ++i) {
    for (auto d : c.seeds[i].depends_on) {
      if (d >= c.seeds.size() || d == i) {
        throw Error(ErrorCode::InvalidTopic, "seed " + std::to_string(i) + " has an invalid depends_on index");
      }
    }
  }
  make_clock(c.clock);
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw Error(ErrorCode::MalformedInput, "run config not found: " + path.string());
  json j;
  try {
    j = json::parse(read_all(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedInput, "bad run config " + path.string() + ": " + e.what());
  }
  return from_json(j, fs::absolute(path).parent_path());
}

json RunConfig::to_json() const {
  json d;
  if (!dataset.model.empty()) {
    d["simulate"] = {{"model", dataset.model}, {"demographics", dataset.demographics}, {"rows", dataset.rows}};
  } else {
    d = {{"csv", dataset.csv}, {"schema", dataset.schema}};
  }
  json seeds_j = json::array();
  for (const auto& s : seeds) seeds_j.push_back({{"topic", topic_to_json(s.body)}, {"depends_on", s.depends_on}});
  json gates = json::object();
  for (const auto& [l, on] : review_gates) gates[std::string(dikw::to_token(l))] = on;
  json l = json::object();
  if (llm_mode) l["mode"] = llm::to_token(*llm_mode);
  if (!cassette_dir.empty()) l["cassette_dir"] = cassette_dir;
  return json{{"dataset", d},     {"catalog", catalog}, {"seeds", seeds_j},
              {"review_gates", gates}, {"max_parallelism", max_parallelism}, {"llm", l},
              {"clock", clock}};
}

fs::path RunConfig::resolve(const std::string& p) const {
  fs::path path(p);
  if (path.is_absolute() || base_dir.empty()) return path;
  return base_dir / path;
}

void RunConfig::gates_off() {
  for (auto& [_, on] : review_gates) on = false;
}

void check_acyclic(const std::map<TopicId, std::vector<TopicId>>& graph) {
  // Kahn's algorithm over the dependency edges.
  std::map<TopicId, int> indegree;
  std::map<TopicId, std::vector<TopicId>> users;
  for (const auto& [id, deps] : graph) {
    indegree.emplace(id, 0);
    for (const auto& d : deps) {
      indegree.emplace(d, 0);
      users[d].push_back(id);
      ++indegree[id];
    }
  }
  std::vector<TopicId> queue;
  for (const auto& [id, deg] : indegree) {
    if (deg == 0) queue.push_back(id);
  }
  std::size_t seen = 0;
  while (!queue.empty()) {
    const auto id = queue.back();
    queue.pop_back();
    ++seen;
    for (const auto& u : users[id]) {
      if (--indegree[u] == 0) queue.push_back(u);
    }
  }
  if (seen == indegree.size()) return;
  for (const auto& [id, deg] : indegree) {
    if (deg > 0) throw Error(ErrorCode::InvalidTopic, "dependency cycle through " + id.str(), {{"topic_id", id.str()}});
  }
}

std::map<TopicStatus, int> RunSnapshot::counts() const {
  std::map<TopicStatus, int> c;
  for (const auto& t : topics) ++c[t.status];
  return c;
}

const TopicState* RunSnapshot::find(const TopicId& id) const {
  for (const auto& t : topics) {
    if (t.id == id) return &t;
  }
  return nullptr;
}

json to_json(const RunSnapshot& s) {
  json topics = json::array();
  for (const auto& t : s.topics) topics.push_back(to_json(t));
  json counts = json::object();
  for (const auto& [st, n] : s.counts()) counts[std::string(to_token(st))] = n;
  return json{{"run_id", s.run_id},
              {"dataset_fingerprint", s.fingerprint.hex()},
              {"topics", topics},
              {"counts", counts},
              {"stats",
               {{"executions", s.stats.executions},
                {"peak_running", s.stats.peak_running},
                {"safety_violations", s.stats.safety_violations},
                {"resolver_calls", s.stats.resolver_calls},
                {"steps", s.stats.steps}}},
              {"quiescent", s.quiescent},
              {"active", s.active}};
}

ReviewRequest review_request_from_json(const json& j) {
  ReviewRequest r;
  try {
    r.action = parse_human_action(j.at("action").get<std::string>());
    r.actor = j.value("actor", std::string());
    r.comment = j.value("comment", std::string());
    if (j.contains("new_body") && !j.at("new_body").is_null()) r.new_body = j.at("new_body");
    if (j.contains("candidate") && !j.at("candidate").is_null()) r.candidate = j.at("candidate").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedInput, std::string("malformed review request: ") + e.what());
  }
  return r;
}

std::vector<wisdom::MessageCandidate> reviewed_candidates(const Artifact& a) {
  auto candidates = wisdom::candidates_of(a);
  for (const auto& act : a.provenance.human_actions) {
    for (auto& c : candidates) {
      if (c.name != act.target) continue;
      if (act.action == HumanActionKind::Reject) c.rejected_by_review = true;
      if (act.action == HumanActionKind::Approve) c.rejected_by_review = false;
    }
  }
  return candidates;
}

// ---------------------------------------------------------------------------

struct Outcome {
  TopicStatus status = TopicStatus::Failed;
  std::optional<std::string> error;
  json error_detail;
  bool executed = false;
  bool cached = false;
};

class Run {
 public:
  std::mutex mu;
  std::string id;
  RunConfig config;
  fs::path dir;
  dataset::EncounterTable table;
  dataset::MessageCatalog catalog;
  Digest fingerprint;
  std::unique_ptr<FileArtifactStore> store;
  std::unique_ptr<llm::Adapter> adapter;
  std::shared_ptr<const Clock> clock;
  std::vector<TopicId> order;
  std::map<TopicId, TopicState> topics;
  RunStats stats;
  std::vector<TraceEvent> trace;
  int running = 0;
  bool active = false;
  std::mutex step_mu;  // one driver at a time
  kernels::Exec exec = kernels::Exec::Parallel;
  std::function<void(const TopicId&)> after_publish;

  dataset::DatasetContext context() const { return {&table, &catalog, fingerprint}; }

  void load_inputs(const fs::path& store_root) {
    try {
      catalog = dataset::load_catalog(config.resolve(config.catalog));
      if (!config.dataset.model.empty()) {
        const auto model = sim::GroundTruthModel::load(config.resolve(config.dataset.model));
        const auto mix = config.dataset.demographics.empty()
                             ? sim::DemographicsMix::defaults()
                             : sim::DemographicsMix::load(config.resolve(config.dataset.demographics));
        const auto rows = config.dataset.rows ? config.dataset.rows : sim::kDefaultRows;
        table = sim::generate(model, catalog, rows, mix, exec);
      } else {
        const auto desc = config.dataset.schema.empty()
                              ? dataset::SchemaDescriptor{}
                              : dataset::SchemaDescriptor::load(config.resolve(config.dataset.schema));
        table = dataset::ingest_file(config.resolve(config.dataset.csv), desc);
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Io) throw;
      throw Error(ErrorCode::MalformedInput, e.what(), e.detail());
    }
    dataset::require_catalog_variants(table, catalog);
    fingerprint = dataset::fingerprint(table).digest;
    store = std::make_unique<FileArtifactStore>(store_root, fingerprint);
    clock = make_clock(config.clock);
    llm::Config lc = llm::Config::from_env();
    if (config.llm_mode) lc.mode = *config.llm_mode;
    if (!config.cassette_dir.empty()) lc.cassette_dir = config.resolve(config.cassette_dir);
    adapter = std::make_unique<llm::Adapter>(lc, llm::PromptLibrary::shipped(), clock);
  }

  bool gated(Layer l) const {
    auto it = config.review_gates.find(l);
    return it != config.review_gates.end() && it->second;
  }

  std::map<TopicId, std::vector<TopicId>> graph() const {
    std::map<TopicId, std::vector<TopicId>> g;
    for (const auto& [id, st] : topics) g[id] = st.deps;
    return g;
  }

  void set_status(TopicState& st, TopicStatus to) {
    if (!transition_allowed(st.status, to)) {
      throw Error(ErrorCode::InvalidState,
                  "illegal transition " + std::string(to_token(st.status)) + " -> " + std::string(to_token(to)),
                  {{"topic_id", st.id.str()}, {"status", to_token(st.status)}});
    }
    st.status = to;
  }

  // Registers a topic and, unless it is already in the store, the
  // lower-layer topics it needs.
  TopicId add_topic(const TopicBody& body, std::optional<TopicId> spawned_by, bool seed) {
    const auto tid = canonical_hash(body);
    if (auto it = topics.find(tid); it != topics.end()) {
      it->second.seed = it->second.seed || seed;
      return tid;
    }
    TopicState st;
    st.id = tid;
    st.body = body;
    st.spawned_by = spawned_by;
    st.seed = seed;
    topics.emplace(tid, st);
    order.push_back(tid);
    if (store->contains(tid)) {
      auto& s = topics.at(tid);
      s.status = TopicStatus::Resolved;
      s.cached = true;
      return tid;
    }
    std::vector<TopicId> deps;
    try {
      switch (tid.layer) {
        case Layer::Data:
        case Layer::Wisdom: break;
        case Layer::Information:
          deps.push_back(add_topic(DataTopic{DataTopicKind::SchemaVerification, json::object()}, tid, false));
          break;
        case Layer::Knowledge:
          for (const auto& ev : knowledge::required_evidence(std::get<KnowledgeTopic>(body), catalog)) {
            const auto d = add_topic(ev, tid, false);
            if (std::find(deps.begin(), deps.end(), d) == deps.end()) deps.push_back(d);
          }
          break;
      }
    } catch (const Error& e) {
      auto& s = topics.at(tid);
      s.status = TopicStatus::Failed;
      s.error = std::string(to_string(e.code())) + ": " + e.what();
      s.error_detail = e.to_json();
    }
    topics.at(tid).deps = deps;
    return tid;
  }

  void wire_wisdom(const TopicId& w) {
    auto& st = topics.at(w);
    for (const auto& id : order) {
      if (id.layer == Layer::Knowledge && topics.at(id).seed &&
          std::find(st.deps.begin(), st.deps.end(), id) == st.deps.end()) {
        st.deps.push_back(id);
      }
    }
  }

  // A rejected Knowledge dependency shrinks a Wisdom topic's claim pool
  // instead of blocking it.
  static bool rejection_tolerated(const TopicState& st, const TopicId& dep) {
    return st.id.layer == Layer::Wisdom && dep.layer == Layer::Knowledge;
  }

  bool deps_resolved(const TopicState& st) const {
    for (const auto& d : st.deps) {
      const auto& ds = topics.at(d);
      if (ds.status == TopicStatus::Resolved) continue;
      if (ds.status == TopicStatus::Rejected && rejection_tolerated(st, d)) continue;
      return false;
    }
    return true;
  }

  void promote() {
    bool changed = true;
    while (changed) {
      changed = false;
      for (const auto& tid : order) {
        auto& st = topics.at(tid);
        if (st.status != TopicStatus::Pending) continue;
        if (store->contains(tid)) {
          set_status(st, TopicStatus::Resolved);
          st.cached = true;
          changed = true;
          continue;
        }
        const TopicState* cause = nullptr;
        bool blocked = false;
        for (const auto& d : st.deps) {
          const auto& ds = topics.at(d);
          if (ds.status == TopicStatus::Failed ||
              (ds.status == TopicStatus::Rejected && !rejection_tolerated(st, d))) {
            cause = &ds;
            break;
          }
          if (ds.status != TopicStatus::Resolved && ds.status != TopicStatus::Rejected) blocked = true;
        }
        if (cause) {
          const bool evidence = tid.layer == Layer::Knowledge && cause->id.layer == Layer::Information;
          const std::string code = evidence ? std::string(to_string(ErrorCode::EvidenceResolutionFailure))
                                            : std::string("DependencyFailed");
          const std::string what = cause->status == TopicStatus::Rejected ? "was rejected" : "failed";
          st.error = code + ": dependency " + cause->id.str() + " " + what +
                     (cause->error ? " (" + *cause->error + ")" : std::string());
          st.error_detail = json{{"code", code},
                                 {"message", *st.error},
                                 {"topic_id", cause->id.str()},
                                 {"cause", cause->error_detail}};
          set_status(st, TopicStatus::Failed);
          changed = true;
        } else if (!blocked) {
          set_status(st, gated(tid.layer) ? TopicStatus::AwaitingApproval : TopicStatus::Ready);
          changed = true;
        }
      }
    }
  }

  bool quiescent() const {
    for (const auto& [_, st] : topics) {
      if (st.status == TopicStatus::Ready || st.status == TopicStatus::Running) return false;
    }
    return true;
  }

  RunSnapshot snapshot() const {
    RunSnapshot s;
    s.run_id = id;
    s.fingerprint = fingerprint;
    for (const auto& tid : order) s.topics.push_back(topics.at(tid));
    s.stats = stats;
    s.quiescent = quiescent();
    s.active = active;
    return s;
  }

  void persist() const {
    json topics_j = json::array();
    for (const auto& tid : order) topics_j.push_back(to_json(topics.at(tid)));
    json j{{"format_version", 1},
           {"run_id", id},
           {"config", config.to_json()},
           {"base_dir", config.base_dir.string()},
           {"dataset_fingerprint", fingerprint.hex()},
           {"topics", topics_j},
           {"stats",
            {{"executions", stats.executions},
             {"peak_running", stats.peak_running},
             {"safety_violations", stats.safety_violations},
             {"resolver_calls", stats.resolver_calls},
             {"steps", stats.steps}}}};
    write_atomic(dir / "state.json", j.dump(2) + "\n");
  }

  void log_action(const std::string& target_topic, const HumanAction& a, const json& extra = json::object()) {
    json line{{"run_id", id}, {"topic", target_topic}, {"action", a}};
    for (const auto& [k, v] : extra.items()) line[k] = v;
    std::ofstream out(dir / "actions.log", std::ios::app | std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot append to actions.log");
    out << canonical_dump(line) << "\n";
  }

  Artifact resolve_info_now(const InfoTopic& t) {
    const DataTopic schema{DataTopicKind::SchemaVerification, json::object()};
    std::vector<TopicId> deps;
    const auto sid = canonical_hash(schema);
    if (!store->contains(sid)) store->publish(data::resolve_data_topic(context(), schema, clock->now()));
    deps.push_back(sid);
    auto a = info::resolve_info_topic(context(), deps, t, clock->now(), exec);
    store->publish(a);
    return a;
  }

  // Runs the agent for one topic. `claim_ids` lists the resolved Knowledge
  // dependencies of a Wisdom topic.
  Outcome execute(const TopicState& st, const std::vector<TopicId>& claim_ids) {
    Outcome out;
    out.executed = true;
    try {
      Artifact a;
      const auto now = clock->now();
      switch (st.id.layer) {
        case Layer::Data: a = data::resolve_data_topic(context(), std::get<DataTopic>(st.body), now); break;
        case Layer::Information: {
          std::vector<TopicId> data_deps;
          for (const auto& d : st.deps) {
            if (d.layer == Layer::Data) data_deps.push_back(d);
          }
          a = info::resolve_info_topic(context(), data_deps, std::get<InfoTopic>(st.body), now, exec);
          break;
        }
        case Layer::Knowledge: {
          auto ev = knowledge::evaluate_hypothesis(
              std::get<KnowledgeTopic>(st.body), catalog, *store,
              [this](const InfoTopic& t) { return resolve_info_now(t); }, adapter.get(), fingerprint, now);
          {
            std::lock_guard lock(mu);
            stats.resolver_calls += ev.resolver_calls;
          }
          a = std::move(ev.artifact);
          break;
        }
        case Layer::Wisdom: {
          std::vector<knowledge::KnowledgeClaim> claims;
          for (const auto& k : claim_ids) {
            auto art = store->find(k);
            if (!art) throw Error(ErrorCode::NotFound, "claim artifact missing: " + k.str());
            claims.push_back(knowledge::claim_of(*art));
          }
          a = wisdom::resolve_wisdom_topic(std::get<WisdomTopic>(st.body), claims, catalog, adapter.get(),
                                           fingerprint, now);
          break;
        }
      }
      a.provenance.human_actions = st.human_actions;
      const auto outcome = store->publish(a);
      if (after_publish) after_publish(st.id);
      if (outcome == PublishOutcome::NondeterminismAlarm) {
        out.status = TopicStatus::Failed;
        out.error = "NondeterminismAlarm: stored artifact payload differs from the recomputed one";
        out.error_detail = json{{"code", "NondeterminismAlarm"}, {"message", *out.error}};
      } else {
        out.status = TopicStatus::Resolved;
      }
    } catch (const Error& e) {
      out.status = TopicStatus::Failed;
      out.error = std::string(to_string(e.code())) + ": " + e.what();
      out.error_detail = e.to_json();
    }
    return out;
  }
};

// ---------------------------------------------------------------------------

Engine::Engine(Options options) : options_(std::move(options)) {
  fs::create_directories(runs_dir());
  fs::create_directories(store_dir());
}

Engine::~Engine() = default;

fs::path Engine::runs_dir() const { return options_.state_dir / "runs"; }
fs::path Engine::store_dir() const { return options_.state_dir / "store"; }

std::shared_ptr<Run> Engine::get(const std::string& run_id) {
  {
    std::lock_guard lock(mu_);
    auto it = runs_.find(run_id);
    if (it != runs_.end()) return it->second;
  }
  resume(run_id);
  std::lock_guard lock(mu_);
  return runs_.at(run_id);
}

bool Engine::loaded(const std::string& run_id) const {
  auto& self = const_cast<Engine&>(*this);
  std::lock_guard lock(self.mu_);
  return runs_.count(run_id) > 0;
}

std::string Engine::submit(const RunConfig& config) {
  auto run = std::make_shared<Run>();
  run->config = config;
  run->exec = options_.exec;
  run->after_publish = options_.after_publish;
  run->load_inputs(store_dir());

  std::vector<TopicId> seed_ids;
  for (const auto& s : config.seeds) seed_ids.push_back(run->add_topic(s.body, std::nullopt, true));
  for (std::size_t i = 0; i < config.seeds.size(); ++i) {
    auto& st = run->topics.at(seed_ids[i]);
    if (st.status == TopicStatus::Resolved || st.status == TopicStatus::Failed) continue;
    if (config.seeds[i].depends_on.empty()) {
      if (st.id.layer == Layer::Wisdom) run->wire_wisdom(st.id);
      continue;
    }
    for (auto d : config.seeds[i].depends_on) {
      if (std::find(st.deps.begin(), st.deps.end(), seed_ids[d]) == st.deps.end()) st.deps.push_back(seed_ids[d]);
    }
  }
  check_acyclic(run->graph());

  const std::string prefix = canonical_digest(config.to_json()).hex().substr(0, 12) + "-";
  std::lock_guard lock(mu_);
  int seq = 1;
  while (fs::exists(runs_dir() / (prefix + std::to_string(seq)))) ++seq;
  run->id = prefix + std::to_string(seq);
  run->dir = runs_dir() / run->id;
  fs::create_directories(run->dir);
  run->promote();
  run->persist();
  runs_[run->id] = run;
  return run->id;
}

void Engine::resume(const std::string& run_id) {
  const auto dir = runs_dir() / run_id;
  if (run_id.empty() || run_id.find('/') != std::string::npos || !fs::exists(dir / "state.json")) {
    throw Error(ErrorCode::NotFound, "no run '" + run_id + "'", {{"run_id", run_id}});
  }
  const auto j = json::parse(read_all(dir / "state.json"));
  auto run = std::make_shared<Run>();
  run->id = run_id;
  run->dir = dir;
  run->config = RunConfig::from_json(j.at("config"), j.value("base_dir", std::string()));
  run->exec = options_.exec;
  run->after_publish = options_.after_publish;
  run->load_inputs(store_dir());
  if (run->fingerprint.hex() != j.at("dataset_fingerprint").get<std::string>()) {
    throw Error(ErrorCode::InvalidState, "dataset changed since run " + run_id + " was created",
                {{"run_id", run_id}});
  }
  for (const auto& t : j.at("topics")) {
    auto st = topic_state_from_json(t);
    // A crash leaves in-flight topics Running; they go back to Ready and
    // resolve from the store if their artifact was already published.
    if (st.status == TopicStatus::Running) st.status = TopicStatus::Ready;
    run->order.push_back(st.id);
    run->topics.emplace(st.id, std::move(st));
  }
  const auto& s = j.at("stats");
  run->stats.executions = s.value("executions", 0);
  run->stats.peak_running = s.value("peak_running", 0);
  run->stats.safety_violations = s.value("safety_violations", 0);
  run->stats.resolver_calls = s.value("resolver_calls", 0);
  run->stats.steps = s.value("steps", 0);
  std::lock_guard lock(mu_);
  runs_[run_id] = run;
}

std::vector<std::string> Engine::list_runs() const {
  std::vector<std::string> out;
  if (!fs::exists(runs_dir())) return out;
  for (const auto& e : fs::directory_iterator(runs_dir())) {
    if (fs::exists(e.path() / "state.json")) out.push_back(e.path().filename().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

RunSnapshot Engine::step(const std::string& run_id) {
  auto run = get(run_id);
  std::lock_guard driver(run->step_mu);
  std::vector<TopicId> ready;
  int parallelism = 1;
  {
    std::lock_guard lock(run->mu);
    ++run->stats.steps;
    run->promote();
    for (const auto& tid : run->order) {
      if (run->topics.at(tid).status == TopicStatus::Ready) ready.push_back(tid);
    }
    parallelism = run->config.max_parallelism;
    run->persist();
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> crashed{false};
  std::exception_ptr crash;
  std::mutex crash_mu;
  auto worker = [&] {
    while (!crashed) {
      const std::size_t i = next++;
      if (i >= ready.size()) return;
      TopicState st;
      std::vector<TopicId> claim_ids;
      bool cached = false;
      {
        std::lock_guard lock(run->mu);
        auto& live = run->topics.at(ready[i]);
        if (run->store->contains(live.id)) {
          run->set_status(live, TopicStatus::Resolved);
          live.cached = true;
          cached = true;
        } else {
          run->set_status(live, TopicStatus::Running);
          ++run->running;
          run->stats.peak_running = std::max(run->stats.peak_running, run->running);
          const bool ok = run->deps_resolved(live);
          if (!ok) ++run->stats.safety_violations;
          run->trace.push_back({live.id, run->running, ok});
          for (const auto& d : live.deps) {
            if (d.layer == Layer::Knowledge && run->topics.at(d).status == TopicStatus::Resolved) {
              claim_ids.push_back(d);
            }
          }
          st = live;
        }
        run->persist();
      }
      if (cached) continue;
      Outcome out;
      try {
        out = run->execute(st, claim_ids);
      } catch (...) {
        std::lock_guard lock(crash_mu);
        if (!crash) crash = std::current_exception();
        crashed = true;
        return;
      }
      std::lock_guard lock(run->mu);
      auto& live = run->topics.at(st.id);
      --run->running;
      ++run->stats.executions;
      run->set_status(live, out.status);
      live.error = out.error;
      live.error_detail = out.error_detail;
      run->persist();
    }
  };
  const int workers = static_cast<int>(std::min<std::size_t>(ready.size(), static_cast<std::size_t>(parallelism)));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (crash) {
    // The in-memory run is abandoned; its state file is what a restarted
    // process would see.
    std::lock_guard lock(mu_);
    runs_.erase(run_id);
    std::rethrow_exception(crash);
  }
  std::lock_guard lock(run->mu);
  run->promote();
  run->persist();
  return run->snapshot();
}

RunSnapshot Engine::run(const std::string& run_id, int max_steps) {
  RunSnapshot s = snapshot(run_id);
  for (int i = 0; i < max_steps; ++i) {
    s = step(run_id);
    if (s.quiescent) break;
  }
  return s;
}

RunSnapshot Engine::snapshot(const std::string& run_id) {
  auto run = get(run_id);
  std::lock_guard lock(run->mu);
  return run->snapshot();
}

std::vector<TraceEvent> Engine::trace(const std::string& run_id) {
  auto run = get(run_id);
  std::lock_guard lock(run->mu);
  return run->trace;
}

void Engine::set_active(const std::string& run_id, bool active) {
  auto run = get(run_id);
  std::lock_guard lock(run->mu);
  run->active = active;
}

ReviewResult Engine::review(const std::string& run_id, const TopicId& topic, const ReviewRequest& req) {
  auto run = get(run_id);
  std::lock_guard lock(run->mu);
  auto it = run->topics.find(topic);
  if (it == run->topics.end()) {
    throw Error(ErrorCode::NotFound, "topic " + topic.str() + " is not in run " + run_id, {{"topic_id", topic.str()}});
  }
  if (req.actor.empty()) throw Error(ErrorCode::MalformedInput, "review requires an actor");
  auto& st = it->second;
  HumanAction act{req.actor, req.action, run->clock->now(), req.comment, topic.str()};
  ReviewResult result;

  if (req.candidate) {
    if (topic.layer != Layer::Wisdom || st.status != TopicStatus::Resolved) {
      throw Error(ErrorCode::InvalidState, "portfolio review needs a resolved wisdom topic",
                  {{"topic_id", topic.str()}, {"status", to_token(st.status)}});
    }
    if (req.action == HumanActionKind::Edit) {
      throw Error(ErrorCode::InvalidState, "candidates can be rejected or restored, not edited");
    }
    const auto art = run->store->find(topic);
    if (!art) throw Error(ErrorCode::NotFound, "artifact missing for " + topic.str());
    const auto current = reviewed_candidates(*art);
    auto c = std::find_if(current.begin(), current.end(),
                          [&](const wisdom::MessageCandidate& m) { return m.name == *req.candidate; });
    if (c == current.end()) {
      throw Error(ErrorCode::NotFound, "no candidate '" + *req.candidate + "'", {{"candidate", *req.candidate}});
    }
    const bool want_rejected = req.action == HumanActionKind::Reject;
    if (c->rejected_by_review == want_rejected) {
      throw Error(ErrorCode::InvalidState,
                  "candidate '" + *req.candidate + "' is already " + (want_rejected ? "rejected" : "active"),
                  {{"candidate", *req.candidate}});
    }
    act.target = *req.candidate;
    run->store->append_human_action(topic, act);
    run->log_action(topic.str(), act, {{"candidate", *req.candidate}});
    result.state = st;
    return result;
  }

  std::optional<TopicId> created_id;
  if (st.status != TopicStatus::AwaitingApproval) {
    throw Error(ErrorCode::InvalidState,
                "topic " + topic.str() + " is " + std::string(to_token(st.status)) + ", not awaiting approval",
                {{"topic_id", topic.str()}, {"status", to_token(st.status)}});
  }
  switch (req.action) {
    case HumanActionKind::Approve:
      st.human_actions.push_back(act);
      run->set_status(st, TopicStatus::Ready);
      break;
    case HumanActionKind::Reject:
      st.human_actions.push_back(act);
      run->set_status(st, TopicStatus::Rejected);
      break;
    case HumanActionKind::Edit: {
      if (!req.new_body) throw Error(ErrorCode::InvalidTopic, "edit requires new_body");
      const auto body = topic_from_json(*req.new_body);
      const auto new_id = canonical_hash(body);
      if (new_id.layer != topic.layer) throw Error(ErrorCode::InvalidTopic, "edit must keep the topic layer");
      if (new_id == topic) throw Error(ErrorCode::InvalidTopic, "edit does not change the topic");
      if (run->topics.count(new_id)) {
        throw Error(ErrorCode::InvalidState, "edited topic " + new_id.str() + " is already part of the run",
                    {{"topic_id", new_id.str()}, {"status", to_token(run->topics.at(new_id).status)}});
      }
      const auto spawned_by = st.spawned_by;
      const bool seed = st.seed;
      run->set_status(st, TopicStatus::Rejected);
      st.edited_to = new_id;
      run->add_topic(body, spawned_by, seed);
      auto& created = run->topics.at(new_id);
      created.edited_from = topic;
      act.target = new_id.str();
      created.human_actions.push_back(act);
      if (new_id.layer == Layer::Wisdom && created.status == TopicStatus::Pending) run->wire_wisdom(new_id);
      for (auto& [oid, other] : run->topics) {
        if (oid == new_id) continue;
        for (auto& d : other.deps) {
          if (d == topic) d = new_id;
        }
      }
      if (new_id.layer == Layer::Knowledge) {
        for (auto& [oid, other] : run->topics) {
          if (oid.layer == Layer::Wisdom && std::find(other.deps.begin(), other.deps.end(), new_id) == other.deps.end() &&
              other.status == TopicStatus::Pending) {
            other.deps.push_back(new_id);
          }
        }
      }
      check_acyclic(run->graph());
      created_id = new_id;
      break;
    }
  }
  run->log_action(topic.str(), act);
  run->promote();
  run->persist();
  result.state = run->topics.at(topic);
  if (created_id) result.created = run->topics.at(*created_id);
  return result;
}

std::vector<std::string> Engine::runs_with(const TopicId& topic) {
  std::vector<std::pair<std::string, std::shared_ptr<Run>>> loaded;
  {
    std::lock_guard lock(mu_);
    for (const auto& [id, r] : runs_) loaded.emplace_back(id, r);
  }
  std::vector<std::string> out;
  for (const auto& [id, r] : loaded) {
    std::lock_guard lock(r->mu);
    if (r->topics.count(topic)) out.push_back(id);
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::vector<wisdom::MessageCandidate> Engine::portfolio(const std::string& run_id) {
  auto run = get(run_id);
  std::lock_guard lock(run->mu);
  std::vector<wisdom::MessageCandidate> out;
  for (const auto& tid : run->order) {
    if (tid.layer != Layer::Wisdom || run->topics.at(tid).status != TopicStatus::Resolved) continue;
    auto art = run->store->find(tid);
    if (!art) continue;
    auto cs = reviewed_candidates(*art);
    out.insert(out.end(), cs.begin(), cs.end());
  }
  return out;
}

std::optional<Artifact> Engine::artifact(const std::string& run_id, const TopicId& id) {
  auto run = get(run_id);
  return run->store->find(id);
}

std::optional<Artifact> Engine::find_artifact(const Digest& topic_hash) const {
  const auto p = FileArtifactStore::locate(store_dir(), topic_hash);
  if (!p) return std::nullopt;
  return deserialize_artifact(read_all(*p));
}

std::vector<json> Engine::action_log(const std::string& run_id) {
  auto run = get(run_id);
  std::lock_guard lock(run->mu);
  std::vector<json> out;
  const auto p = run->dir / "actions.log";
  if (!fs::exists(p)) return out;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(json::parse(line));
  }
  return out;
}

}  // namespace dikw::orch

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>

#include "dikw/common/canonical.hpp"
#include "dikw/common/error.hpp"
#include "dikw/dataset/catalog.hpp"
#include "dikw/dataset/fingerprint.hpp"
#include "dikw/dataset/ingest.hpp"
#include "dikw/info/info_agent.hpp"
#include "dikw/orchestrator/engine.hpp"
#include "dikw/service/api.hpp"
#include "dikw/sim/simulator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dikw;

namespace {

struct Globals {
  std::string state_dir = ".dikw";
  bool json_out = false;
  bool serial = false;
};

orch::Engine make_engine(const Globals& g) {
  orch::Engine::Options o;
  o.state_dir = g.state_dir;
  o.exec = g.serial ? kernels::Exec::Serial : kernels::Exec::Parallel;
  return orch::Engine(o);
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + p.string());
  out << text;
}

void emit(const Globals& g, const json& j, const std::string& human) {
  if (g.json_out) std::cout << j.dump(2) << "\n";
  else std::cout << human;
}

std::string summary_line(const orch::RunSnapshot& s) {
  std::string out = "run " + s.run_id + ":";
  for (const auto& [st, n] : s.counts()) out += " " + std::string(orch::to_token(st)) + "=" + std::to_string(n);
  out += " executions=" + std::to_string(s.stats.executions) + "\n";
  return out;
}

std::string render_portfolio(const std::vector<wisdom::MessageCandidate>& cs, const std::string& format) {
  if (format == "md") return wisdom::portfolio_markdown(cs);
  return json{{"candidates", cs}}.dump(2) + "\n";
}

// Newest run whose state file mentions the topic id.
std::string find_run_for(const Globals& g, const std::string& topic) {
  const fs::path runs = fs::path(g.state_dir) / "runs";
  std::string best;
  fs::file_time_type best_time{};
  if (fs::exists(runs)) {
    for (const auto& e : fs::directory_iterator(runs)) {
      const auto state = e.path() / "state.json";
      if (!fs::exists(state)) continue;
      if (dataset::read_text_file(state).find("\"" + topic + "\"") == std::string::npos) continue;
      const auto t = fs::last_write_time(state);
      if (best.empty() || t > best_time) {
        best = e.path().filename().string();
        best_time = t;
      }
    }
  }
  if (best.empty()) throw Error(ErrorCode::NotFound, "no run contains topic " + topic);
  return best;
}

int run_command(const Globals& g, const std::string& config_path, const std::string& resume, bool auto_approve,
                const std::string& portfolio_out, const std::string& format, int max_steps) {
  auto engine = make_engine(g);
  std::string id = resume;
  if (id.empty()) {
    auto config = orch::RunConfig::load(config_path);
    if (auto_approve) config.gates_off();
    id = engine.submit(config);
  } else {
    engine.resume(id);
  }
  const auto snap = engine.run(id, max_steps);
  const auto candidates = engine.portfolio(id);
  if (!portfolio_out.empty() && !candidates.empty()) write_text(portfolio_out, render_portfolio(candidates, format));
  const auto counts = snap.counts();
  const bool failed = counts.count(orch::TopicStatus::Failed) > 0;
  json j = orch::to_json(snap);
  j.erase("topics");
  emit(g, j, summary_line(snap));
  if (!g.json_out) {
    for (const auto& t : snap.topics) {
      if (t.status == orch::TopicStatus::Failed) std::cerr << "failed " << t.id.str() << ": " << t.error.value_or("") << "\n";
      if (t.status == orch::TopicStatus::AwaitingApproval) std::cout << "awaiting approval " << t.id.str() << "\n";
    }
  }
  return failed ? service::kExitRunFailed : service::kExitOk;
}

std::string plot_csv(orch::Engine& engine, const std::string& run_id) {
  std::string out = "topic_id,query,subject,group,n,estimate,ci_low,ci_high\n";
  auto num = [](const std::optional<double>& v) {
    if (!v) return std::string();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", *v);
    return std::string(buf);
  };
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  };
  for (const auto& t : engine.snapshot(run_id).topics) {
    if (t.id.layer != Layer::Information || t.status != orch::TopicStatus::Resolved) continue;
    const auto a = engine.artifact(run_id, t.id);
    if (!a) continue;
    const auto r = info::stat_result_of(*a);
    const auto& topic = std::get<InfoTopic>(t.body);
    const std::string prefix = t.id.str() + "," + std::string(to_token(r.query)) + "," + quote(topic.subject) + ",";
    if (r.group_results) {
      for (const auto& gr : *r.group_results) {
        out += prefix + quote(gr.label) + "," + std::to_string(gr.n) + "," + num(gr.estimate) + "," + num(gr.ci_low) +
               "," + num(gr.ci_high) + "\n";
      }
    } else {
      out += prefix + "," + std::to_string(r.n) + "," + num(r.estimate) + "," + num(r.ci_low) + "," + num(r.ci_high) + "\n";
    }
  }
  return out;
}

service::ApiServer* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dikw: experiment-to-message-design pipeline engine"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--state-dir", g.state_dir, "Directory holding runs/ and store/")->capture_default_str();
  app.add_flag("--json", g.json_out, "Machine-readable output and errors");
  app.add_flag("--serial", g.serial, "Use the serial kernels");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Load a CSV export and print its fingerprint");
  std::string csv, schema, catalog_path, out_path;
  ingest->add_option("--csv", csv, "CSV file")->required();
  ingest->add_option("--schema", schema, "JSON schema descriptor");
  ingest->add_option("--catalog", catalog_path, "Catalog to check variants against");
  ingest->add_option("--out", out_path, "Write the normalized CSV here");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic experiment with planted effects");
  std::string model_path, demo_path, oracle_path;
  std::size_t rows = sim::kDefaultRows;
  bool large = false;
  simulate->add_option("--model", model_path, "Ground-truth model JSON")->required();
  simulate->add_option("--demographics", demo_path, "Demographic mix JSON");
  simulate->add_option("--catalog", catalog_path, "Message catalog JSON")->required();
  simulate->add_option("--rows,-n", rows, "Row count")->capture_default_str();
  simulate->add_flag("--large", large, "Use the full-scale row count (444691)");
  simulate->add_option("--out", out_path, "Output CSV")->required();
  simulate->add_option("--oracle", oracle_path, "Write the analytic oracle report here");

  // run
  auto* run = app.add_subcommand("run", "Submit a run config and drive it until it needs review or finishes");
  std::string config_path, resume, portfolio_out, format = "json";
  bool auto_approve = false;
  int max_steps = 100000;
  auto* cfg_opt = run->add_option("--config", config_path, "Run config JSON");
  run->add_option("--resume", resume, "Continue an existing run")->excludes(cfg_opt);
  run->add_flag("--auto-approve", auto_approve, "Disable review gates (CI)");
  run->add_option("--portfolio-out", portfolio_out, "Write the portfolio here when resolved");
  run->add_option("--format", format, "Portfolio format")->check(CLI::IsMember({"json", "md"}));
  run->add_option("--max-steps", max_steps, "Scheduler step limit")->capture_default_str();

  // topics ls
  auto* topics = app.add_subcommand("topics", "Inspect topic states");
  topics->require_subcommand(1);
  auto* ls = topics->add_subcommand("ls", "List topics of a run");
  std::string run_id, status_filter, layer_filter;
  ls->add_option("--run", run_id, "Run id")->required();
  ls->add_option("--status", status_filter, "Only this status");
  ls->add_option("--layer", layer_filter, "Only this layer");

  // review
  auto* review = app.add_subcommand("review", "Approve, reject or edit a gated topic or portfolio candidate");
  std::string topic_arg, edit_path, actor, comment, candidate;
  bool approve = false, reject = false, restore = false;
  review->add_option("topic", topic_arg, "Topic id (<layer>/<hash>)")->required();
  review->add_option("--run", run_id, "Run id (default: newest run containing the topic)");
  auto* a_opt = review->add_flag("--approve", approve, "Approve");
  auto* r_opt = review->add_flag("--reject", reject, "Reject");
  auto* e_opt = review->add_option("--edit", edit_path, "Replace with the topic JSON in this file");
  auto* s_opt = review->add_flag("--restore", restore, "Restore a rejected candidate");
  a_opt->excludes(r_opt)->excludes(e_opt)->excludes(s_opt);
  r_opt->excludes(e_opt)->excludes(s_opt);
  e_opt->excludes(s_opt);
  review->add_option("--actor", actor, "Reviewer name");
  review->add_option("--comment", comment, "Comment");
  review->add_option("--candidate", candidate, "Portfolio candidate name");

  // export
  auto* exp = app.add_subcommand("export", "Export run results");
  exp->require_subcommand(1);
  auto* exp_pf = exp->add_subcommand("portfolio", "Export the message portfolio");
  bool active_only = false;
  exp_pf->add_option("--run", run_id, "Run id")->required();
  exp_pf->add_option("--format", format, "json or md")->check(CLI::IsMember({"json", "md"}))->capture_default_str();
  exp_pf->add_option("--out", out_path, "Output file (default stdout)");
  exp_pf->add_flag("--active-only", active_only, "Omit candidates rejected in review");
  auto* exp_csv = exp->add_subcommand("rates", "Export information results as plot-ready CSV");
  exp_csv->add_option("--run", run_id, "Run id")->required();
  exp_csv->add_option("--out", out_path, "Output file (default stdout)");

  // serve
  auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
  std::string host = "127.0.0.1";
  int port = 8080;
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : service::kExitUsage;
  }

  try {
    if (*ingest) {
      const auto desc = schema.empty() ? dataset::SchemaDescriptor{} : dataset::SchemaDescriptor::load(schema);
      const auto table = dataset::ingest_file(csv, desc);
      if (!catalog_path.empty()) dataset::require_catalog_variants(table, dataset::load_catalog(catalog_path));
      const auto fp = dataset::fingerprint(table);
      if (!out_path.empty()) write_text(out_path, dataset::to_csv(table));
      emit(g, json(fp), "rows=" + std::to_string(fp.row_count) + " fingerprint=" + fp.digest.hex() + "\n");
      return 0;
    }
    if (*simulate) {
      const auto model = sim::GroundTruthModel::load(model_path);
      const auto mix = demo_path.empty() ? sim::DemographicsMix::defaults() : sim::DemographicsMix::load(demo_path);
      const auto catalog = dataset::load_catalog(catalog_path);
      const auto n = large ? sim::kLargeRows : rows;
      const auto table = sim::generate(model, catalog, n, mix, g.serial ? kernels::Exec::Serial : kernels::Exec::Parallel);
      write_text(out_path, dataset::to_csv(table));
      if (!oracle_path.empty()) write_text(oracle_path, sim::oracle(model, catalog, mix).to_json().dump(2) + "\n");
      const auto fp = dataset::fingerprint(table);
      emit(g, json(fp), "wrote " + std::to_string(n) + " rows to " + out_path + " fingerprint=" + fp.digest.hex() + "\n");
      return 0;
    }
    if (*run) {
      if (config_path.empty() && resume.empty()) {
        std::cerr << "run: one of --config or --resume is required\n";
        return service::kExitUsage;
      }
      return run_command(g, config_path, resume, auto_approve, portfolio_out, format, max_steps);
    }
    if (*ls) {
      auto engine = make_engine(g);
      const auto snap = engine.snapshot(run_id);
      json out = json::array();
      std::string human;
      for (const auto& t : snap.topics) {
        if (!status_filter.empty() && t.status != orch::parse_status(status_filter)) continue;
        if (!layer_filter.empty() && t.id.layer != parse_layer(layer_filter)) continue;
        out.push_back(orch::to_json(t));
        human += std::string(orch::to_token(t.status)) + "\t" + t.id.str() + (t.seed ? "\tseed" : "\t") +
                 (t.error ? "\t" + *t.error : std::string()) + "\n";
      }
      emit(g, out, human);
      return 0;
    }
    if (*review) {
      if (!approve && !reject && edit_path.empty() && !restore) {
        std::cerr << "review: one of --approve, --reject, --edit or --restore is required\n";
        return service::kExitUsage;
      }
      if (restore && candidate.empty()) {
        std::cerr << "review: --restore applies to a --candidate\n";
        return service::kExitUsage;
      }
      const auto tid = TopicId::parse(topic_arg);
      if (run_id.empty()) run_id = find_run_for(g, tid.str());
      orch::ReviewRequest req;
      req.action = reject ? HumanActionKind::Reject
                          : (!edit_path.empty() ? HumanActionKind::Edit : HumanActionKind::Approve);
      req.actor = !actor.empty() ? actor : (std::getenv("USER") ? std::getenv("USER") : "cli");
      req.comment = comment;
      if (!candidate.empty()) req.candidate = candidate;
      if (!edit_path.empty()) req.new_body = json::parse(dataset::read_text_file(edit_path));
      auto engine = make_engine(g);
      const auto result = engine.review(run_id, tid, req);
      json out = orch::to_json(result.state);
      std::string human = tid.str() + " -> " + std::string(orch::to_token(result.state.status)) + "\n";
      if (result.created) {
        out["created"] = orch::to_json(*result.created);
        human += "created " + result.created->id.str() + "\n";
      }
      emit(g, out, human);
      return 0;
    }
    if (*exp_pf) {
      auto engine = make_engine(g);
      auto cs = engine.portfolio(run_id);
      if (cs.empty()) throw Error(ErrorCode::NotFound, "run " + run_id + " has no resolved portfolio");
      if (active_only) std::erase_if(cs, [](const wisdom::MessageCandidate& c) { return c.rejected_by_review; });
      const auto text = render_portfolio(cs, format);
      if (out_path.empty()) std::cout << text;
      else write_text(out_path, text);
      return 0;
    }
    if (*exp_csv) {
      auto engine = make_engine(g);
      const auto text = plot_csv(engine, run_id);
      if (out_path.empty()) std::cout << text;
      else write_text(out_path, text);
      return 0;
    }
    if (*serve) {
      auto engine = make_engine(g);
      service::ApiServer::Options o;
      if (const char* t = std::getenv("DIKW_API_TOKEN")) o.bearer_token = t;
      service::ApiServer server(engine, o);
      const int bound = server.bind(host, port);
      g_server = &server;
      std::signal(SIGINT, [](int) {
        if (g_server) g_server->stop();
      });
      std::signal(SIGTERM, [](int) {
        if (g_server) g_server->stop();
      });
      std::cerr << "listening on http://" << host << ":" << bound << "\n";
      server.listen_after_bind();
      g_server = nullptr;
      return 0;
    }
  } catch (const Error& e) {
    const auto api = service::api_error_of(e);
    if (g.json_out) std::cout << api.to_json().dump(2) << "\n";
    else std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return service::exit_code_of(api.code);
  } catch (const json::exception& e) {
    service::ApiError api{service::ApiErrorCode::ValidationFailed, e.what(), json::object()};
    if (g.json_out) std::cout << api.to_json().dump(2) << "\n";
    else std::cerr << "error: " << e.what() << "\n";
    return service::kExitValidation;
  } catch (const std::exception& e) {
    service::ApiError api{service::ApiErrorCode::Internal, e.what(), json::object()};
    if (g.json_out) std::cout << api.to_json().dump(2) << "\n";
    else std::cerr << "error: " << e.what() << "\n";
    return service::kExitInternal;
  }
  return 0;
}

#include "dikw/service/api.hpp"

#include <httplib.h>

#include "dikw/common/canonical.hpp"
#include "dikw/wisdom/wisdom_agent.hpp"

namespace dikw::service {

using nlohmann::json;

std::string_view to_token(ApiErrorCode c) {
  switch (c) {
    case ApiErrorCode::NotFound: return "NotFound";
    case ApiErrorCode::InvalidState: return "InvalidState";
    case ApiErrorCode::ValidationFailed: return "ValidationFailed";
    case ApiErrorCode::Internal: return "Internal";
  }
  return "Internal";
}

int ApiError::http_status() const {
  switch (code) {
    case ApiErrorCode::NotFound: return 404;
    case ApiErrorCode::InvalidState: return 409;
    case ApiErrorCode::ValidationFailed: return 400;
    case ApiErrorCode::Internal: return 500;
  }
  return 500;
}

json ApiError::to_json() const {
  return json{{"error", {{"code", to_token(code)}, {"message", message}, {"detail", detail}}}};
}

ApiError api_error_of(const Error& e) {
  ApiError a;
  a.message = e.what();
  a.detail = e.detail().is_object() ? e.detail() : json{{"detail", e.detail()}};
  a.detail["engine_code"] = to_string(e.code());
  switch (e.code()) {
    case ErrorCode::NotFound: a.code = ApiErrorCode::NotFound; break;
    case ErrorCode::InvalidState: a.code = ApiErrorCode::InvalidState; break;
    case ErrorCode::Io:
    case ErrorCode::TransportError:
    case ErrorCode::CassetteMiss:
    case ErrorCode::SchemaViolation: a.code = ApiErrorCode::Internal; break;
    default: a.code = ApiErrorCode::ValidationFailed; break;
  }
  return a;
}

int exit_code_of(ApiErrorCode c) {
  switch (c) {
    case ApiErrorCode::NotFound: return kExitNotFound;
    case ApiErrorCode::InvalidState: return kExitInvalidState;
    case ApiErrorCode::ValidationFailed: return kExitValidation;
    case ApiErrorCode::Internal: return kExitInternal;
  }
  return kExitInternal;
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(2) + "\n", "application/json");
}

void send_error(httplib::Response& res, const ApiError& e) { send_json(res, e.http_status(), e.to_json()); }

json parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedInput, std::string("request body is not JSON: ") + e.what());
  }
}

TopicId topic_from_match(const httplib::Request& req) {
  return TopicId::parse(std::string(req.matches[1]) + "/" + std::string(req.matches[2]));
}

}  // namespace

ApiServer::ApiServer(orch::Engine& engine, Options options)
    : engine_(engine), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  if (options_.config_base_dir.empty()) options_.config_base_dir = std::filesystem::current_path();
  install_routes();
}

ApiServer::~ApiServer() {
  stop();
  wait_idle();
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(mu_);
    threads.swap(threads_);
  }
  for (auto& t : threads) {
    if (t.joinable()) t.join();
  }
}

int ApiServer::bind(const std::string& host, int port) {
  if (port == 0) return server_->bind_to_any_port(host);
  if (!server_->bind_to_port(host, port)) {
    throw Error(ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void ApiServer::listen_after_bind() { server_->listen_after_bind(); }

void ApiServer::stop() {
  if (server_->is_running()) server_->stop();
}

void ApiServer::wait_idle() {
  std::unique_lock lock(mu_);
  idle_cv_.wait(lock, [this] {
    for (const auto& [_, n] : drivers_) {
      if (n > 0) return false;
    }
    return true;
  });
}

void ApiServer::drive(const std::string& run_id) {
  std::lock_guard outer(mu_);
  ++drivers_[run_id];
  engine_.set_active(run_id, true);
  threads_.emplace_back([this, run_id] {
    try {
      engine_.run(run_id);
    } catch (...) {
      // Failures are recorded as topic states; anything else leaves the
      // state file as the last consistent snapshot.
    }
    std::lock_guard lock(mu_);
    if (--drivers_[run_id] == 0) engine_.set_active(run_id, false);
    idle_cv_.notify_all();
  });
}

void ApiServer::install_routes() {
  auto& s = *server_;

  s.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
    if (options_.bearer_token.empty() || req.path == "/healthz") return httplib::Server::HandlerResponse::Unhandled;
    if (req.get_header_value("Authorization") == "Bearer " + options_.bearer_token) {
      return httplib::Server::HandlerResponse::Unhandled;
    }
    ApiError e{ApiErrorCode::ValidationFailed, "missing or invalid bearer token", json{{"status", 401}}};
    send_json(res, 401, e.to_json());
    return httplib::Server::HandlerResponse::Handled;
  });

  s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const Error& e) {
      send_error(res, api_error_of(e));
    } catch (const std::exception& e) {
      send_error(res, ApiError{ApiErrorCode::Internal, e.what(), json::object()});
    } catch (...) {
      send_error(res, ApiError{ApiErrorCode::Internal, "unknown failure", json::object()});
    }
  });

  s.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    if (res.status == 404) {
      send_error(res, ApiError{ApiErrorCode::NotFound, "no route for " + req.method + " " + req.path, json::object()});
    } else if (res.status >= 400) {
      const int status = res.status;
      send_json(res, status, ApiError{ApiErrorCode::ValidationFailed, "request rejected", json{{"status", status}}}.to_json());
    }
  });

  s.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, json{{"status", "ok"}});
  });

  s.Post("/runs", [this](const httplib::Request& req, httplib::Response& res) {
    const auto config = orch::RunConfig::from_json(parse_body(req), options_.config_base_dir);
    const auto id = engine_.submit(config);
    if (req.get_param_value("sync") == "1" || req.get_param_value("sync") == "true") {
      engine_.run(id);
    } else {
      drive(id);
    }
    send_json(res, 201, json{{"run_id", id}});
  });

  s.Get("/runs", [this](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, json{{"runs", engine_.list_runs()}});
  });

  s.Get(R"(/runs/([A-Za-z0-9_.-]+))", [this](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, orch::to_json(engine_.snapshot(req.matches[1])));
  });

  s.Get(R"(/runs/([A-Za-z0-9_.-]+)/topics)", [this](const httplib::Request& req, httplib::Response& res) {
    const auto snap = engine_.snapshot(req.matches[1]);
    std::optional<orch::TopicStatus> filter;
    if (req.has_param("status")) filter = orch::parse_status(req.get_param_value("status"));
    std::optional<Layer> layer;
    if (req.has_param("layer")) layer = parse_layer(req.get_param_value("layer"));
    json out = json::array();
    for (const auto& t : snap.topics) {
      if (filter && t.status != *filter) continue;
      if (layer && t.id.layer != *layer) continue;
      out.push_back(orch::to_json(t));
    }
    send_json(res, 200, json{{"run_id", snap.run_id}, {"topics", out}});
  });

  s.Get(R"(/runs/([A-Za-z0-9_.-]+)/portfolio)", [this](const httplib::Request& req, httplib::Response& res) {
    auto candidates = engine_.portfolio(req.matches[1]);
    if (req.get_param_value("active") == "1" || req.get_param_value("active") == "true") {
      std::erase_if(candidates, [](const wisdom::MessageCandidate& c) { return c.rejected_by_review; });
    }
    if (req.get_param_value("format") == "md") {
      res.status = 200;
      res.set_content(wisdom::portfolio_markdown(candidates), "text/markdown");
      return;
    }
    int active = 0;
    for (const auto& c : candidates) active += c.rejected_by_review ? 0 : 1;
    send_json(res, 200,
              json{{"run_id", std::string(req.matches[1])},
                   {"candidates", candidates},
                   {"active", active},
                   {"rejected", static_cast<int>(candidates.size()) - active}});
  });

  s.Get(R"(/runs/([A-Za-z0-9_.-]+)/actions)", [this](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, json{{"actions", engine_.action_log(req.matches[1])}});
  });

  const std::string topic_re = R"(/topics/(data|information|knowledge|wisdom)/([0-9a-f]{64}))";

  auto run_for = [this](const httplib::Request& req, const TopicId& id, const json& body) {
    if (req.has_param("run")) return req.get_param_value("run");
    if (body.is_object() && body.contains("run_id")) return body.at("run_id").get<std::string>();
    const auto runs = engine_.runs_with(id);
    if (runs.empty()) throw Error(ErrorCode::NotFound, "topic " + id.str() + " is in no loaded run");
    return runs.front();
  };

  s.Get(topic_re, [this, run_for](const httplib::Request& req, httplib::Response& res) {
    const auto id = topic_from_match(req);
    const auto run_id = run_for(req, id, json());
    const auto snap = engine_.snapshot(run_id);
    const auto* st = snap.find(id);
    if (!st) throw Error(ErrorCode::NotFound, "topic " + id.str() + " is not in run " + run_id);
    auto j = orch::to_json(*st);
    j["run_id"] = run_id;
    send_json(res, 200, j);
  });

  s.Post(topic_re + "/review", [this, run_for](const httplib::Request& req, httplib::Response& res) {
    const auto id = topic_from_match(req);
    const auto body = parse_body(req);
    const auto run_id = run_for(req, id, body);
    const auto result = engine_.review(run_id, id, orch::review_request_from_json(body));
    json out = orch::to_json(result.state);
    out["run_id"] = run_id;
    if (result.created) out["created"] = orch::to_json(*result.created);
    if (!body.contains("candidate")) drive(run_id);
    send_json(res, 200, out);
  });

  s.Get(R"(/artifacts/([0-9a-f]{64}))", [this](const httplib::Request& req, httplib::Response& res) {
    const auto a = engine_.find_artifact(Digest::from_hex(std::string(req.matches[1])));
    if (!a) throw Error(ErrorCode::NotFound, "no artifact " + std::string(req.matches[1]));
    send_json(res, 200, json(*a));
  });
}

}  // namespace dikw::service

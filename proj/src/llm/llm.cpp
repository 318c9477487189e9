#include "dikw/llm/llm.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "dikw/common/canonical.hpp"
#include "dikw/common/enum_tokens.hpp"
#include "dikw/common/error.hpp"

namespace dikw::llm {

using nlohmann::json;

namespace {

constexpr TokenTable<Mode, 4> kModes{{
    {Mode::Live, "live"},
    {Mode::Record, "record"},
    {Mode::Replay, "replay"},
    {Mode::Canned, "canned"},
}};

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) {
    throw Error(ErrorCode::TransportError, "invalid LLM endpoint '" + url + "'");
  }
  return {m[1].str(), m[2].matched ? m[2].str() : std::string("/")};
}

const char* getenv_or_null(const char* name) {
  const char* v = std::getenv(name);
  return (v && *v) ? v : nullptr;
}

}  // namespace

std::string_view to_token(Mode m) { return token_of(kModes, m); }
Mode parse_mode(std::string_view text) { return parse_token(kModes, text, "LLM mode"); }

std::string PromptAsset::ref() const {
  return std::string(dikw::to_token(layer)) + "@v" + std::to_string(version) + ":" + sha256(text).hex().substr(0, 16);
}

PromptLibrary PromptLibrary::load(const std::filesystem::path& dir, int version) {
  PromptLibrary lib;
  for (auto layer : {Layer::Data, Layer::Information, Layer::Knowledge, Layer::Wisdom}) {
    PromptAsset a;
    a.layer = layer;
    a.version = version;
    a.text = read_file(dir / (std::string(dikw::to_token(layer)) + ".txt"));
    if (a.text.empty()) throw Error(ErrorCode::MalformedInput, "empty prompt asset for " + std::string(dikw::to_token(layer)));
    lib.assets_.emplace(layer, std::move(a));
  }
  return lib;
}

PromptLibrary PromptLibrary::shipped() { return load(std::filesystem::path(DIKW_ASSET_DIR) / "prompts"); }

const PromptAsset& PromptLibrary::get(Layer layer) const {
  auto it = assets_.find(layer);
  if (it == assets_.end()) throw Error(ErrorCode::NotFound, "no prompt asset for " + std::string(dikw::to_token(layer)));
  return it->second;
}

Config Config::from_env(Config base) {
  if (auto v = getenv_or_null("DIKW_LLM_MODE")) base.mode = parse_mode(v);
  if (auto v = getenv_or_null("DIKW_LLM_ENDPOINT")) base.endpoint = v;
  if (auto v = getenv_or_null("DIKW_LLM_API_KEY")) base.api_key = v;
  if (auto v = getenv_or_null("DIKW_LLM_MODEL")) base.model = v;
  if (auto v = getenv_or_null("DIKW_LLM_RESPONSE_PATH")) base.response_path = v;
  if (auto v = getenv_or_null("DIKW_CASSETTE_DIR")) base.cassette_dir = v;
  return base;
}

Config Config::from_env() { return from_env(Config{}); }

Adapter::Adapter(Config config, PromptLibrary prompts, std::shared_ptr<const Clock> clock)
    : config_(std::move(config)), prompts_(std::move(prompts)), clock_(std::move(clock)) {
  if ((config_.mode == Mode::Record || config_.mode == Mode::Replay) && config_.cassette_dir.empty()) {
    throw Error(ErrorCode::MalformedInput, "record/replay mode needs a cassette directory");
  }
}

json Adapter::request_record(const Request& request) const {
  return json{{"system_prompt_ref", prompts_.get(request.layer).ref()},
              {"user_content", request.user_content},
              {"params", {{"temperature", request.params.temperature}, {"max_tokens", request.params.max_tokens}}},
              {"model", config_.model}};
}

std::string Adapter::request_id(const Request& request) const {
  return canonical_digest(request_record(request)).hex();
}

std::filesystem::path Adapter::cassette_path(const std::string& id) const { return config_.cassette_dir / (id + ".json"); }

Response Adapter::complete(const Request& request) {
  switch (config_.mode) {
    case Mode::Canned: return canned(request);
    case Mode::Replay: {
      const auto id = request_id(request);
      const auto path = cassette_path(id);
      if (!std::filesystem::exists(path)) {
        throw Error(ErrorCode::CassetteMiss, "no recorded exchange for request " + id, {{"request_id", id}});
      }
      auto ex = json::parse(read_file(path)).get<Exchange>();
      ex.response.exchange_id = ex.id;
      return ex.response;
    }
    case Mode::Live: return live(request);
    case Mode::Record: {
      auto resp = live(request);
      Exchange ex;
      ex.id = request_id(request);
      ex.request = request_record(request);
      ex.response = resp;
      ex.recorded_at = clock_->now();
      std::lock_guard lock(record_mu_);
      std::filesystem::create_directories(config_.cassette_dir);
      const auto path = cassette_path(ex.id);
      const auto tmp = path.string() + ".tmp";
      {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << json(ex).dump(2) << "\n";
      }
      std::filesystem::rename(tmp, path);
      resp.exchange_id = ex.id;
      return resp;
    }
  }
  throw Error(ErrorCode::TransportError, "unknown LLM mode");
}

Response Adapter::live(const Request& request) {
  if (config_.endpoint.empty()) throw Error(ErrorCode::TransportError, "no LLM endpoint configured");
  const auto ep = split_endpoint(config_.endpoint);
  const json body{{"model", config_.model},
                  {"messages",
                   json::array({{{"role", "system"}, {"content", prompts_.get(request.layer).text}},
                                {{"role", "user"}, {"content", request.user_content}}})},
                  {"temperature", request.params.temperature},
                  {"max_tokens", request.params.max_tokens}};
  std::string last_error;
  for (int attempt = 0; attempt < config_.max_attempts; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(200 << (attempt - 1)));
    httplib::Client client(ep.origin);
    client.set_connection_timeout(10);
    client.set_read_timeout(120);
    if (!config_.api_key.empty()) client.set_bearer_token_auth(config_.api_key);
    auto res = client.Post(ep.path, body.dump(), "application/json");
    if (!res) {
      last_error = "transport: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500 || res->status == 429) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw Error(ErrorCode::TransportError, "LLM endpoint returned HTTP " + std::to_string(res->status),
                  {{"status", res->status}, {"body", res->body.substr(0, 512)}});
    }
    json reply;
    try {
      reply = json::parse(res->body);
    } catch (const json::exception&) {
      throw Error(ErrorCode::SchemaViolation, "LLM endpoint returned non-JSON body");
    }
    const json::json_pointer ptr(config_.response_path);
    if (!reply.contains(ptr) || !reply.at(ptr).is_string()) {
      throw Error(ErrorCode::SchemaViolation, "no text at response path " + config_.response_path);
    }
    Response out;
    out.text = reply.at(ptr).get<std::string>();
    const json::json_pointer fin("/choices/0/finish_reason");
    out.finish_reason = reply.contains(fin) && reply.at(fin).is_string() ? reply.at(fin).get<std::string>() : "stop";
    return out;
  }
  throw Error(ErrorCode::TransportError, "LLM request failed after " + std::to_string(config_.max_attempts) +
                                             " attempts: " + last_error);
}

Response Adapter::canned(const Request& request) const {
  Response r;
  r.finish_reason = "stop";
  switch (request.layer) {
    case Layer::Knowledge: {
      const auto hyp = request.hints.value("hypothesis", request.user_content);
      r.text = json{{"theoretical_rationale", "Canned rationale for the hypothesis \"" + hyp +
                                                  "\". Support is taken from the evidence set only."},
                    {"generalizability_notes", "Canned source: applies to the experiment population as sampled."}}
                   .dump();
      break;
    }
    case Layer::Wisdom:
      r.text = json{{"text", request.hints.value("draft", std::string())},
                    {"rationale", request.hints.value("rationale", std::string("Canned draft."))}}
                   .dump();
      break;
    default:
      r.text = json{{"summary", "Canned " + std::string(dikw::to_token(request.layer)) + " response."}}.dump();
      break;
  }
  return r;
}

std::optional<json> parse_json_reply(std::string_view text) {
  std::string s(text);
  auto first = s.find('{');
  auto last = s.rfind('}');
  if (first == std::string::npos || last == std::string::npos || last < first) return std::nullopt;
  try {
    auto j = json::parse(s.substr(first, last - first + 1));
    if (!j.is_object()) return std::nullopt;
    return j;
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

Adapter::JsonReply Adapter::complete_json(const Request& request, const SchemaCheck& check) {
  JsonReply out;
  Request current = request;
  std::string problem;
  for (int attempt = 0; attempt < 2; ++attempt) {
    auto resp = complete(current);
    if (!resp.exchange_id.empty()) out.exchange_ids.push_back(resp.exchange_id);
    auto parsed = parse_json_reply(resp.text);
    if (!parsed) {
      problem = "reply is not a JSON object";
    } else if (auto err = check(*parsed)) {
      problem = *err;
    } else {
      out.value = std::move(*parsed);
      return out;
    }
    current.user_content = request.user_content +
                           "\n\nYour previous reply did not match the required JSON schema (" + problem +
                           "). Reply with the JSON object only.";
  }
  throw Error(ErrorCode::SchemaViolation, "LLM reply failed the " + std::string(dikw::to_token(request.layer)) +
                                              " schema after one reprompt: " + problem,
              {{"problem", problem}});
}

void to_json(json& j, const Exchange& e) {
  j = json{{"id", e.id},
           {"request", e.request},
           {"response", {{"text", e.response.text}, {"finish_reason", e.response.finish_reason}}},
           {"recorded_at", format_rfc3339(e.recorded_at)}};
}

void from_json(const json& j, Exchange& e) {
  e.id = j.at("id").get<std::string>();
  e.request = j.at("request");
  e.response.text = j.at("response").at("text").get<std::string>();
  e.response.finish_reason = j.at("response").value("finish_reason", std::string("stop"));
  e.recorded_at = parse_rfc3339(j.at("recorded_at").get<std::string>());
}

}  // namespace dikw::llm

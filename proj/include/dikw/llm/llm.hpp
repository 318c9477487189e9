#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <json.hpp>

#include "dikw/artifact/vocabulary.hpp"
#include "dikw/common/clock.hpp"

namespace dikw::llm {

enum class Mode { Live, Record, Replay, Canned };

std::string_view to_token(Mode m);
Mode parse_mode(std::string_view text);

struct PromptAsset {
  Layer layer = Layer::Data;
  std::string text;
  int version = 1;

  // "<layer>@v<version>:<first 16 hex of sha256(text)>"
  std::string ref() const;
};

// One system prompt per layer, read from <dir>/<layer>.txt.
class PromptLibrary {
 public:
  static PromptLibrary load(const std::filesystem::path& dir, int version = 1);
  static PromptLibrary shipped();  // the repository's assets/prompts

  const PromptAsset& get(Layer layer) const;

 private:
  std::map<Layer, PromptAsset> assets_;
};

struct Params {
  double temperature = 0.0;
  int max_tokens = 1024;
};

inline constexpr Params kKnowledgeParams{0.0, 1024};
inline constexpr Params kWisdomParams{0.7, 512};

struct Request {
  Layer layer = Layer::Knowledge;
  std::string user_content;
  Params params;
  // Structured hints for Canned mode (e.g. "hypothesis", "draft"); not
  // part of the request identity.
  nlohmann::json hints = nlohmann::json::object();
};

struct Response {
  std::string text;
  std::string finish_reason;
  std::string exchange_id;  // cassette id; empty in Canned mode
};

struct Exchange {
  std::string id;
  nlohmann::json request;  // {system_prompt_ref, user_content, params, model}
  Response response;
  Timestamp recorded_at{};
};

struct Config {
  Mode mode = Mode::Canned;
  std::string endpoint;  // http(s)://host[:port]/path
  std::string api_key;
  std::string model = "default";
  std::string response_path = "/choices/0/message/content";
  std::filesystem::path cassette_dir;
  int max_attempts = 3;

  // DIKW_LLM_MODE, DIKW_LLM_ENDPOINT, DIKW_LLM_API_KEY, DIKW_LLM_MODEL,
  // DIKW_LLM_RESPONSE_PATH, DIKW_CASSETTE_DIR over `base`.
  static Config from_env(Config base);
  static Config from_env();
};

// Returns an error message, or nullopt when the value fits the schema.
using SchemaCheck = std::function<std::optional<std::string>(const nlohmann::json&)>;

class Adapter {
 public:
  Adapter(Config config, PromptLibrary prompts, std::shared_ptr<const Clock> clock);

  const Config& config() const { return config_; }
  Mode mode() const { return config_.mode; }

  Response complete(const Request& request);

  // Parses the reply as a JSON object and checks it; on failure sends one
  // reprompt naming the problem, then throws SchemaViolation.
  struct JsonReply {
    nlohmann::json value;
    std::vector<std::string> exchange_ids;
  };
  JsonReply complete_json(const Request& request, const SchemaCheck& check);

  // Identity of a request: canonical digest of its recorded form.
  std::string request_id(const Request& request) const;
  nlohmann::json request_record(const Request& request) const;

 private:
  Response live(const Request& request);
  Response canned(const Request& request) const;
  std::filesystem::path cassette_path(const std::string& id) const;

  Config config_;
  PromptLibrary prompts_;
  std::shared_ptr<const Clock> clock_;
  std::mutex record_mu_;
};

void to_json(nlohmann::json& j, const Exchange& e);
void from_json(const nlohmann::json& j, Exchange& e);

// Strips optional ``` fences and parses a JSON object.
std::optional<nlohmann::json> parse_json_reply(std::string_view text);

}  // namespace dikw::llm

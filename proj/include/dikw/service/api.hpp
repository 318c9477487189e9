#pragma once

#include <condition_variable>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dikw/common/error.hpp"
#include "dikw/orchestrator/engine.hpp"

namespace httplib {
class Server;
}

namespace dikw::service {

enum class ApiErrorCode { NotFound, InvalidState, ValidationFailed, Internal };

std::string_view to_token(ApiErrorCode c);

struct ApiError {
  ApiErrorCode code = ApiErrorCode::Internal;
  std::string message;
  nlohmann::json detail = nlohmann::json::object();

  int http_status() const;
  nlohmann::json to_json() const;  // {"error": {code, message, detail}}
};

ApiError api_error_of(const Error& e);

// Process exit codes shared by the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitValidation = 3;
inline constexpr int kExitNotFound = 4;
inline constexpr int kExitInvalidState = 5;
inline constexpr int kExitRunFailed = 6;

int exit_code_of(ApiErrorCode c);

// HTTP front end over one engine. Mutations route to the engine, whose runs
// serialize their own state changes; each submitted or reviewed run is then
// driven to quiescence on a background thread.
class ApiServer {
 public:
  struct Options {
    std::string bearer_token;              // empty: no auth
    std::filesystem::path config_base_dir;  // resolves relative paths in POSTed configs
  };

  ApiServer(orch::Engine& engine, Options options);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  // Binds an ephemeral port when `port` is 0; returns the bound port.
  int bind(const std::string& host, int port);
  // Blocks serving until stop().
  void listen_after_bind();
  void stop();
  // Waits until every background driver has finished.
  void wait_idle();

  // Drives a run to quiescence in the background.
  void drive(const std::string& run_id);

 private:
  void install_routes();

  orch::Engine& engine_;
  Options options_;
  std::unique_ptr<httplib::Server> server_;
  std::mutex mu_;
  std::condition_variable idle_cv_;
  std::map<std::string, int> drivers_;
  std::vector<std::thread> threads_;
};

}  // namespace dikw::service

#pragma once

// Chat-completion backends: a live OpenAI-compatible HTTP client, a
// fixture-driven replay backend, a fixture recorder, and a content-addressed
// response cache. All backends are shareable and safe to call concurrently.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "hallucheck/core.h"

namespace hallucheck {

enum class Role { System, User, Assistant };

std::string_view to_string(Role role);
std::optional<Role> parse_role(std::string_view name);

struct ChatMessage {
  Role role = Role::User;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  // Absent means "provider default": the field is not sent at all.
  std::optional<double> temperature;
  std::optional<int> max_tokens;

  bool operator==(const ChatRequest&) const = default;
};

struct Usage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;

  bool operator==(const Usage&) const = default;
};

struct ChatResponse {
  std::string content;
  std::string model;
  Usage usage;
  std::string finish_reason;

  bool operator==(const ChatResponse&) const = default;
};

// A response plus the telemetry of how it was obtained.
struct Completion {
  ChatResponse response;
  bool cached = false;
  int retry_count = 0;
  std::int64_t latency_ms = 0;
};

enum class BackendErrc {
  InvalidRequest,
  AuthError,
  RateLimited,
  Timeout,
  ServerError,
  HttpError,
  Transport,
  MalformedResponse,
  RetriesExhausted,
  Config,
};

std::string_view to_string(BackendErrc code);
bool is_retryable(BackendErrc code);

using BackendError = CodedError<BackendErrc>;

struct BackendConfig {
  std::string backend_id;
  std::string type = "http";  // "http" or "replay"
  std::string base_url;
  std::string api_key_env;
  std::string model;
  int max_retries = 3;
  int backoff_base_ms = 500;
  int max_backoff_ms = 30000;
  int max_concurrent = 4;
  int timeout_ms = 60000;
  std::optional<double> temperature;
  std::optional<int> max_tokens;
  std::string fixtures;  // replay fixture JSONL (type = "replay")
};

void to_json(Json& j, const ChatMessage& m);
void from_json(const Json& j, ChatMessage& m);
void to_json(Json& j, const ChatRequest& r);
void from_json(const Json& j, ChatRequest& r);
void to_json(Json& j, const ChatResponse& r);
void from_json(const Json& j, ChatResponse& r);
// Strict: unknown keys are rejected.
void to_json(Json& j, const BackendConfig& c);
void from_json(const Json& j, BackendConfig& c);

// Throws BackendError(InvalidRequest) unless the request has a model, at
// least one user message, a non-negative temperature and positive max_tokens.
void validate_request(const ChatRequest& req);
void validate_config(const BackendConfig& cfg);

// Sorted-key, whitespace-free JSON of (model, messages, temperature,
// max_tokens); absent optionals are omitted.
std::string canonical_request_json(const ChatRequest& req);
// SHA-256 hex of canonical_request_json(req).
std::string cache_key(const ChatRequest& req);

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual Completion complete(const ChatRequest& req) = 0;
  virtual const std::string& id() const = 0;
};

using BackendPtr = std::shared_ptr<ChatBackend>;

// Replays responses keyed by cache_key(req). Misses raise
// MalformedResponse("fixture_miss ...").
class ReplayBackend : public ChatBackend {
 public:
  ReplayBackend(std::string id, std::unordered_map<std::string, ChatResponse> fixtures);
  static std::shared_ptr<ReplayBackend> from_file(std::string id,
                                                  const std::filesystem::path& path);

  Completion complete(const ChatRequest& req) override;
  const std::string& id() const override { return id_; }
  std::size_t size() const { return fixtures_.size(); }

 private:
  std::string id_;
  std::unordered_map<std::string, ChatResponse> fixtures_;
};

// Fixture file line: {"key": <cache_key>, "response": <ChatResponse>}.
// A bare string response is accepted as shorthand for {content: <string>}.
std::unordered_map<std::string, ChatResponse> load_fixtures(
    const std::filesystem::path& path);
std::string fixture_line(const std::string& key, const ChatResponse& response);

// Passes requests through to `inner` and appends each new (key, response)
// pair to a fixture file.
class RecordingBackend : public ChatBackend {
 public:
  RecordingBackend(BackendPtr inner, std::filesystem::path fixture_path);

  Completion complete(const ChatRequest& req) override;
  const std::string& id() const override { return inner_->id(); }

 private:
  BackendPtr inner_;
  std::filesystem::path path_;
  std::mutex mu_;
  std::set<std::string> written_;
};

// One file per request under `dir`: <cache_key>.json holding the
// ChatResponse. Writes go to a temp file and are renamed into place. I/O
// failures degrade to pass-through with a warning.
class CachedBackend : public ChatBackend {
 public:
  CachedBackend(BackendPtr inner, std::filesystem::path dir);

  Completion complete(const ChatRequest& req) override;
  const std::string& id() const override { return inner_->id(); }

 private:
  std::optional<ChatResponse> read_entry(const std::filesystem::path& file) const;
  void write_entry(const std::filesystem::path& file, const ChatResponse& response);

  BackendPtr inner_;
  std::filesystem::path dir_;
  bool usable_ = true;
};

BackendPtr with_cache(BackendPtr inner, const std::filesystem::path& cache_dir);

struct CacheStats {
  std::size_t entries = 0;
  std::uintmax_t bytes = 0;
};

CacheStats cache_stats(const std::filesystem::path& cache_dir);
// Removes cache entries; returns the number removed.
std::size_t cache_clear(const std::filesystem::path& cache_dir);

// Live OpenAI-compatible backend: POST {base_url}/chat/completions with a
// bearer token read from the environment variable named by api_key_env.
// Retries 408/429/5xx/transport failures with exponential backoff and
// jitter; at most max_concurrent requests are in flight at once.
BackendPtr make_http_backend(const BackendConfig& cfg);

// Dispatches on cfg.type.
BackendPtr make_backend(const BackendConfig& cfg);

}  // namespace hallucheck

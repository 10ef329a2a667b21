#include "hallucheck/backend.h"

#include <unistd.h>

#include <atomic>
#include <fstream>
#include <sstream>

#include "hallucheck/log.h"
#include "hallucheck/sha256.h"

namespace hallucheck {
namespace {

template <typename T>
std::optional<T> optional_field(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

std::string string_or_empty(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return {};
  return it->get<std::string>();
}

}  // namespace

std::string_view to_string(Role role) {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "?";
}

std::optional<Role> parse_role(std::string_view name) {
  for (auto r : {Role::System, Role::User, Role::Assistant}) {
    if (to_string(r) == name) return r;
  }
  return std::nullopt;
}

std::string_view to_string(BackendErrc code) {
  switch (code) {
    case BackendErrc::InvalidRequest: return "invalid_request";
    case BackendErrc::AuthError: return "auth_error";
    case BackendErrc::RateLimited: return "rate_limited";
    case BackendErrc::Timeout: return "timeout";
    case BackendErrc::ServerError: return "server_error";
    case BackendErrc::HttpError: return "http_error";
    case BackendErrc::Transport: return "transport_error";
    case BackendErrc::MalformedResponse: return "malformed_response";
    case BackendErrc::RetriesExhausted: return "retries_exhausted";
    case BackendErrc::Config: return "config_error";
  }
  return "?";
}

bool is_retryable(BackendErrc code) {
  switch (code) {
    case BackendErrc::RateLimited:
    case BackendErrc::Timeout:
    case BackendErrc::ServerError:
    case BackendErrc::Transport:
      return true;
    default:
      return false;
  }
}

void to_json(Json& j, const ChatMessage& m) {
  j = Json{{"role", std::string(to_string(m.role))}, {"content", m.content}};
}

void from_json(const Json& j, ChatMessage& m) {
  auto role = parse_role(j.at("role").get<std::string>());
  if (!role) throw std::invalid_argument("unknown chat role");
  m.role = *role;
  m.content = j.at("content").get<std::string>();
}

void to_json(Json& j, const ChatRequest& r) {
  j = Json::object();
  j["model"] = r.model;
  j["messages"] = r.messages;
  if (r.temperature) j["temperature"] = *r.temperature;
  if (r.max_tokens) j["max_tokens"] = *r.max_tokens;
}

void from_json(const Json& j, ChatRequest& r) {
  r.model = j.at("model").get<std::string>();
  r.messages = j.at("messages").get<std::vector<ChatMessage>>();
  r.temperature = optional_field<double>(j, "temperature");
  r.max_tokens = optional_field<int>(j, "max_tokens");
}

void to_json(Json& j, const ChatResponse& r) {
  j = Json{{"content", r.content},
           {"model", r.model},
           {"usage",
            {{"prompt_tokens", r.usage.prompt_tokens},
             {"completion_tokens", r.usage.completion_tokens}}},
           {"finish_reason", r.finish_reason}};
}

void from_json(const Json& j, ChatResponse& r) {
  r.content = j.at("content").get<std::string>();
  r.model = string_or_empty(j, "model");
  r.usage = {};
  if (auto it = j.find("usage"); it != j.end() && it->is_object()) {
    r.usage.prompt_tokens = it->value("prompt_tokens", std::int64_t{0});
    r.usage.completion_tokens = it->value("completion_tokens", std::int64_t{0});
  }
  r.finish_reason = string_or_empty(j, "finish_reason");
}

void to_json(Json& j, const BackendConfig& c) {
  j = Json{{"backend_id", c.backend_id},       {"type", c.type},
           {"base_url", c.base_url},           {"api_key_env", c.api_key_env},
           {"model", c.model},                 {"max_retries", c.max_retries},
           {"backoff_base_ms", c.backoff_base_ms},
           {"max_backoff_ms", c.max_backoff_ms},
           {"max_concurrent", c.max_concurrent}, {"timeout_ms", c.timeout_ms},
           {"fixtures", c.fixtures}};
  j["temperature"] = c.temperature ? Json(*c.temperature) : Json(nullptr);
  j["max_tokens"] = c.max_tokens ? Json(*c.max_tokens) : Json(nullptr);
}

void from_json(const Json& j, BackendConfig& c) {
  static const std::set<std::string> known = {
      "backend_id", "type", "base_url", "api_key_env", "model",
      "max_retries", "backoff_base_ms", "max_backoff_ms", "max_concurrent",
      "timeout_ms", "temperature", "max_tokens", "fixtures"};
  if (!j.is_object()) {
    throw BackendError(BackendErrc::Config, "backend config must be a JSON object");
  }
  for (const auto& [key, _] : j.items()) {
    if (known.count(key) == 0) {
      throw BackendError(BackendErrc::Config, "unknown backend config key '" + key + "'");
    }
  }
  BackendConfig d;
  c.backend_id = j.value("backend_id", d.backend_id);
  c.type = j.value("type", d.type);
  c.base_url = j.value("base_url", d.base_url);
  c.api_key_env = j.value("api_key_env", d.api_key_env);
  c.model = j.value("model", d.model);
  c.max_retries = j.value("max_retries", d.max_retries);
  c.backoff_base_ms = j.value("backoff_base_ms", d.backoff_base_ms);
  c.max_backoff_ms = j.value("max_backoff_ms", d.max_backoff_ms);
  c.max_concurrent = j.value("max_concurrent", d.max_concurrent);
  c.timeout_ms = j.value("timeout_ms", d.timeout_ms);
  c.temperature = optional_field<double>(j, "temperature");
  c.max_tokens = optional_field<int>(j, "max_tokens");
  c.fixtures = j.value("fixtures", d.fixtures);
}

void validate_request(const ChatRequest& req) {
  auto fail = [](const std::string& why) {
    return BackendError(BackendErrc::InvalidRequest, "invalid chat request: " + why);
  };
  bool has_user = false;
  for (const auto& m : req.messages) has_user |= m.role == Role::User;
  if (!has_user) throw fail("at least one user message is required");
  if (req.temperature && !(*req.temperature >= 0.0)) {
    throw fail("temperature must be >= 0");
  }
  if (req.max_tokens && *req.max_tokens <= 0) throw fail("max_tokens must be positive");
}

void validate_config(const BackendConfig& cfg) {
  auto fail = [&](const std::string& why) {
    return BackendError(BackendErrc::Config,
                        "backend '" + cfg.backend_id + "': " + why);
  };
  if (cfg.backend_id.empty()) throw fail("backend_id is empty");
  if (cfg.type == "http") {
    if (cfg.base_url.empty()) throw fail("base_url is required");
    if (cfg.max_concurrent <= 0) throw fail("max_concurrent must be positive");
    if (cfg.max_retries < 0) throw fail("max_retries must be >= 0");
    if (cfg.backoff_base_ms < 0 || cfg.timeout_ms <= 0) {
      throw fail("backoff_base_ms must be >= 0 and timeout_ms positive");
    }
  } else if (cfg.type == "replay") {
    if (cfg.fixtures.empty()) throw fail("replay backend requires a fixtures path");
  } else {
    throw fail("unknown backend type '" + cfg.type + "'");
  }
  if (cfg.temperature && *cfg.temperature < 0.0) throw fail("temperature must be >= 0");
  if (cfg.max_tokens && *cfg.max_tokens <= 0) throw fail("max_tokens must be positive");
}

std::string canonical_request_json(const ChatRequest& req) {
  // nlohmann::json objects are key-ordered and dump() emits no whitespace.
  return dump_compact(Json(req));
}

std::string cache_key(const ChatRequest& req) {
  return sha256_hex(canonical_request_json(req));
}

// --- replay -----------------------------------------------------------------

ReplayBackend::ReplayBackend(std::string id,
                             std::unordered_map<std::string, ChatResponse> fixtures)
    : id_(std::move(id)), fixtures_(std::move(fixtures)) {}

std::shared_ptr<ReplayBackend> ReplayBackend::from_file(
    std::string id, const std::filesystem::path& path) {
  return std::make_shared<ReplayBackend>(std::move(id), load_fixtures(path));
}

Completion ReplayBackend::complete(const ChatRequest& req) {
  validate_request(req);
  auto key = cache_key(req);
  auto it = fixtures_.find(key);
  if (it == fixtures_.end()) {
    throw BackendError(BackendErrc::MalformedResponse,
                       "fixture_miss: no replay fixture for request " + key);
  }
  return Completion{it->second, false, 0, 0};
}

std::unordered_map<std::string, ChatResponse> load_fixtures(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw BackendError(BackendErrc::Config, "cannot read fixtures " + path.string());
  }
  std::unordered_map<std::string, ChatResponse> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = Json::parse(line);
      auto key = j.at("key").get<std::string>();
      const auto& resp = j.at("response");
      ChatResponse r;
      if (resp.is_string()) {
        r.content = resp.get<std::string>();
        r.model = "replay";
        r.finish_reason = "stop";
      } else {
        r = resp.get<ChatResponse>();
      }
      out[key] = std::move(r);
    } catch (const Json::exception& e) {
      throw BackendError(BackendErrc::Config,
                         path.string() + ":" + std::to_string(line_no) +
                             ": bad fixture line: " + e.what());
    }
  }
  return out;
}

std::string fixture_line(const std::string& key, const ChatResponse& response) {
  return dump_compact(Json{{"key", key}, {"response", response}});
}

// --- recording --------------------------------------------------------------

RecordingBackend::RecordingBackend(BackendPtr inner, std::filesystem::path fixture_path)
    : inner_(std::move(inner)), path_(std::move(fixture_path)) {
  if (std::filesystem::exists(path_)) {
    for (const auto& [key, _] : load_fixtures(path_)) written_.insert(key);
  }
}

Completion RecordingBackend::complete(const ChatRequest& req) {
  auto completion = inner_->complete(req);
  auto key = cache_key(req);
  std::lock_guard lock(mu_);
  if (written_.insert(key).second) {
    std::ofstream out(path_, std::ios::app);
    out << fixture_line(key, completion.response) << '\n';
    if (!out) log_warning("failed to append fixture to " + path_.string());
  }
  return completion;
}

// --- cache ------------------------------------------------------------------

CachedBackend::CachedBackend(BackendPtr inner, std::filesystem::path dir)
    : inner_(std::move(inner)), dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec || !std::filesystem::is_directory(dir_)) {
    log_warning("response cache disabled: cannot create " + dir_.string());
    usable_ = false;
  }
}

std::optional<ChatResponse> CachedBackend::read_entry(
    const std::filesystem::path& file) const {
  std::ifstream in(file);
  if (!in) return std::nullopt;
  try {
    return Json::parse(in).get<ChatResponse>();
  } catch (const Json::exception&) {
    log_warning("ignoring unreadable cache entry " + file.string());
    return std::nullopt;
  }
}

void CachedBackend::write_entry(const std::filesystem::path& file,
                                const ChatResponse& response) {
  static std::atomic<std::uint64_t> counter{0};
  auto tmp = file;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << dump_compact(Json(response));
    if (!out) {
      log_warning("cache write failed for " + file.filename().string());
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      return;
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, file, ec);
  if (ec) {
    log_warning("cache rename failed for " + file.filename().string() + ": " +
                ec.message());
    std::filesystem::remove(tmp, ec);
  }
}

Completion CachedBackend::complete(const ChatRequest& req) {
  validate_request(req);
  if (!usable_) return inner_->complete(req);
  auto file = dir_ / (cache_key(req) + ".json");
  if (auto hit = read_entry(file)) return Completion{std::move(*hit), true, 0, 0};
  auto completion = inner_->complete(req);
  write_entry(file, completion.response);
  return completion;
}

BackendPtr with_cache(BackendPtr inner, const std::filesystem::path& cache_dir) {
  return std::make_shared<CachedBackend>(std::move(inner), cache_dir);
}

namespace {

bool is_cache_entry(const std::filesystem::directory_entry& e) {
  const auto name = e.path().filename().string();
  return e.is_regular_file() && name.size() == 64 + 5 &&
         name.compare(64, 5, ".json") == 0;
}

}  // namespace

CacheStats cache_stats(const std::filesystem::path& cache_dir) {
  CacheStats stats;
  std::error_code ec;
  if (!std::filesystem::is_directory(cache_dir, ec)) return stats;
  for (const auto& e : std::filesystem::directory_iterator(cache_dir)) {
    if (!is_cache_entry(e)) continue;
    ++stats.entries;
    stats.bytes += e.file_size();
  }
  return stats;
}

std::size_t cache_clear(const std::filesystem::path& cache_dir) {
  std::size_t removed = 0;
  std::error_code ec;
  if (!std::filesystem::is_directory(cache_dir, ec)) return 0;
  std::vector<std::filesystem::path> doomed;
  for (const auto& e : std::filesystem::directory_iterator(cache_dir)) {
    if (is_cache_entry(e)) doomed.push_back(e.path());
  }
  for (const auto& p : doomed) removed += std::filesystem::remove(p, ec) ? 1 : 0;
  return removed;
}

BackendPtr make_backend(const BackendConfig& cfg) {
  validate_config(cfg);
  if (cfg.type == "replay") return ReplayBackend::from_file(cfg.backend_id, cfg.fixtures);
  return make_http_backend(cfg);
}

}  // namespace hallucheck

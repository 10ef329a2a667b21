#include <chrono>
#include <cstdlib>
#include <random>
#include <semaphore>
#include <thread>

#include "hallucheck/backend.h"
#include "httplib.h"

namespace hallucheck {
namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path without trailing slash
};

SplitUrl split_url(const std::string& url, const std::string& backend_id) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw BackendError(BackendErrc::Config,
                       "backend '" + backend_id + "': base_url needs a scheme");
  }
  auto path_start = url.find('/', scheme_end + 3);
  SplitUrl out;
  if (path_start == std::string::npos) {
    out.origin = url;
  } else {
    out.origin = url.substr(0, path_start);
    out.prefix = url.substr(path_start);
  }
  while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  return out;
}

class SemaphoreGuard {
 public:
  explicit SemaphoreGuard(std::counting_semaphore<>& sem) : sem_(sem) { sem_.acquire(); }
  ~SemaphoreGuard() { sem_.release(); }
  SemaphoreGuard(const SemaphoreGuard&) = delete;
  SemaphoreGuard& operator=(const SemaphoreGuard&) = delete;

 private:
  std::counting_semaphore<>& sem_;
};

class HttpBackend : public ChatBackend {
 public:
  explicit HttpBackend(BackendConfig cfg)
      : cfg_(std::move(cfg)),
        url_(split_url(cfg_.base_url, cfg_.backend_id)),
        in_flight_(cfg_.max_concurrent) {
    if (!cfg_.api_key_env.empty() && std::getenv(cfg_.api_key_env.c_str()) == nullptr) {
      throw BackendError(BackendErrc::AuthError,
                         "backend '" + cfg_.backend_id + "': environment variable " +
                             cfg_.api_key_env + " is not set");
    }
  }

  const std::string& id() const override { return cfg_.backend_id; }

  Completion complete(const ChatRequest& req) override {
    validate_request(req);
    const std::string body = dump_compact(Json(req));
    const auto start = std::chrono::steady_clock::now();
    for (int attempt = 0;; ++attempt) {
      std::optional<std::chrono::milliseconds> retry_after;
      try {
        Completion c;
        {
          SemaphoreGuard guard(in_flight_);
          c.response = post_once(body, retry_after);
        }
        c.retry_count = attempt;
        c.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - start)
                           .count();
        return c;
      } catch (const BackendError& e) {
        if (!is_retryable(e.code())) throw;
        if (attempt >= cfg_.max_retries) {
          throw BackendError(BackendErrc::RetriesExhausted,
                             "backend '" + cfg_.backend_id + "': gave up after " +
                                 std::to_string(attempt + 1) + " attempts; last error " +
                                 std::string(to_string(e.code())) + ": " + e.what());
        }
        std::this_thread::sleep_for(backoff(attempt, retry_after));
      }
    }
  }

 private:
  std::chrono::milliseconds backoff(int attempt,
                                    std::optional<std::chrono::milliseconds> hint) {
    const std::int64_t base = cfg_.backoff_base_ms;
    std::int64_t delay = base << std::min(attempt, 20);
    {
      std::lock_guard lock(rng_mu_);
      if (base > 0) delay += std::uniform_int_distribution<std::int64_t>(0, base)(rng_);
    }
    if (hint) delay = std::max<std::int64_t>(delay, hint->count());
    return std::chrono::milliseconds(std::min<std::int64_t>(delay, cfg_.max_backoff_ms));
  }

  ChatResponse post_once(const std::string& body,
                         std::optional<std::chrono::milliseconds>& retry_after) {
    httplib::Client cli(url_.origin);
    const auto timeout = std::chrono::milliseconds(cfg_.timeout_ms);
    cli.set_connection_timeout(timeout);
    cli.set_read_timeout(timeout);
    cli.set_write_timeout(timeout);
    httplib::Headers headers;
    if (!cfg_.api_key_env.empty()) {
      if (const char* key = std::getenv(cfg_.api_key_env.c_str())) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
      }
    }
    auto res = cli.Post(url_.prefix + "/chat/completions", headers, body,
                        "application/json");
    if (!res) {
      auto err = res.error();
      const auto code = (err == httplib::Error::ConnectionTimeout ||
                         err == httplib::Error::Read)
                            ? BackendErrc::Timeout
                            : BackendErrc::Transport;
      throw BackendError(code, "request to backend '" + cfg_.backend_id +
                                   "' failed: " + httplib::to_string(err));
    }
    const int status = res->status;
    if (status == 429 && res->has_header("Retry-After")) {
      try {
        retry_after = std::chrono::seconds(std::stol(res->get_header_value("Retry-After")));
      } catch (const std::exception&) {
      }
    }
    const std::string where = "backend '" + cfg_.backend_id + "' returned HTTP " +
                              std::to_string(status);
    if (status == 401 || status == 403) throw BackendError(BackendErrc::AuthError, where);
    if (status == 429) throw BackendError(BackendErrc::RateLimited, where);
    if (status == 408) throw BackendError(BackendErrc::Timeout, where);
    if (status >= 500) throw BackendError(BackendErrc::ServerError, where);
    if (status < 200 || status >= 300) {
      throw BackendError(BackendErrc::HttpError, where + ": " + res->body);
    }
    return parse_body(res->body);
  }

  ChatResponse parse_body(const std::string& raw) const {
    try {
      auto j = Json::parse(raw);
      const auto& choice = j.at("choices").at(0);
      ChatResponse r;
      const auto& content = choice.at("message").at("content");
      r.content = content.is_null() ? std::string() : content.get<std::string>();
      r.model = j.value("model", std::string());
      if (auto it = j.find("usage"); it != j.end() && it->is_object()) {
        r.usage.prompt_tokens = it->value("prompt_tokens", std::int64_t{0});
        r.usage.completion_tokens = it->value("completion_tokens", std::int64_t{0});
      }
      auto fr = choice.find("finish_reason");
      r.finish_reason =
          (fr == choice.end() || fr->is_null()) ? std::string() : fr->get<std::string>();
      return r;
    } catch (const Json::exception& e) {
      throw BackendError(BackendErrc::MalformedResponse,
                         "backend '" + cfg_.backend_id + "' sent an unparseable body (" +
                             e.what() + "): " + raw);
    }
  }

  BackendConfig cfg_;
  SplitUrl url_;
  std::counting_semaphore<> in_flight_;
  std::mutex rng_mu_;
  std::mt19937_64 rng_{std::random_device{}()};
};

}  // namespace

BackendPtr make_http_backend(const BackendConfig& cfg) {
  validate_config(cfg);
  return std::make_shared<HttpBackend>(cfg);
}

}  // namespace hallucheck

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>

#include "hallucheck/metrics.h"
#include "httplib.h"

namespace hallucheck {
namespace {

bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string normalize_whitespace(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (char c : s) {
    if (is_ascii_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += c;
  }
  return out;
}

// Malformed sequences decode byte-by-byte.
std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b = static_cast<unsigned char>(s[i]);
    int len = b < 0x80 ? 1 : (b >> 5) == 0x6 ? 2 : (b >> 4) == 0xe ? 3 : (b >> 3) == 0x1e ? 4 : 0;
    if (len == 0 || i + len > s.size()) {
      out += static_cast<char32_t>(b);
      ++i;
      continue;
    }
    char32_t cp = len == 1 ? b : b & (0x7f >> len);
    bool ok = true;
    for (int k = 1; k < len; ++k) {
      const auto cont = static_cast<unsigned char>(s[i + k]);
      if ((cont & 0xc0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (cont & 0x3f);
    }
    if (!ok) {
      out += static_cast<char32_t>(b);
      ++i;
      continue;
    }
    out += cp;
    i += static_cast<std::size_t>(len);
  }
  return out;
}

using Trigram = std::array<char32_t, 3>;

std::vector<Trigram> trigrams(const std::u32string& s) {
  std::vector<Trigram> out;
  if (s.size() < 3) return out;
  out.reserve(s.size() - 2);
  for (std::size_t i = 0; i + 2 < s.size(); ++i) out.push_back({s[i], s[i + 1], s[i + 2]});
  std::sort(out.begin(), out.end());
  return out;
}

class FallbackScorer : public SimilarityScorer {
 public:
  double score(const std::string& candidate, const std::string& reference) override {
    return trigram_f1(candidate, reference);
  }
  std::string id() const override { return "fallback:char-trigram-f1"; }
};

struct Endpoint {
  std::string origin;
  std::string prefix;
};

Endpoint split_endpoint(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw MetricsError(MetricsErrc::ScorerUnavailable, "scorer url needs a scheme: " + url);
  }
  auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  e.origin = path_start == std::string::npos ? url : url.substr(0, path_start);
  e.prefix = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!e.prefix.empty() && e.prefix.back() == '/') e.prefix.pop_back();
  return e;
}

Json post_json(const ScorerConfig& cfg, const std::string& path, const Json& body) {
  auto ep = split_endpoint(cfg.url);
  httplib::Client cli(ep.origin);
  const auto timeout = std::chrono::milliseconds(cfg.timeout_ms);
  cli.set_connection_timeout(timeout);
  cli.set_read_timeout(timeout);
  httplib::Headers headers;
  if (!cfg.api_key_env.empty()) {
    if (const char* key = std::getenv(cfg.api_key_env.c_str())) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }
  auto res = cli.Post(ep.prefix + path, headers, dump_compact(body), "application/json");
  if (!res) {
    throw MetricsError(MetricsErrc::ScorerUnavailable,
                       "scorer request failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw MetricsError(MetricsErrc::ScorerUnavailable,
                       "scorer returned HTTP " + std::to_string(res->status));
  }
  try {
    return Json::parse(res->body);
  } catch (const Json::exception& e) {
    throw MetricsError(MetricsErrc::ScorerUnavailable,
                       "scorer sent invalid JSON: " + std::string(e.what()));
  }
}

// Cosine similarity of embedding vectors, rescaled from [-1, 1] to [0, 1].
class EmbeddingScorer : public SimilarityScorer {
 public:
  explicit EmbeddingScorer(ScorerConfig cfg) : cfg_(std::move(cfg)) {}

  double score(const std::string& candidate, const std::string& reference) override {
    auto reply = post_json(cfg_, "/embeddings",
                           Json{{"model", cfg_.model}, {"input", {candidate, reference}}});
    try {
      const auto& data = reply.at("data");
      auto a = data.at(0).at("embedding").get<std::vector<double>>();
      auto b = data.at(1).at("embedding").get<std::vector<double>>();
      if (a.size() != b.size() || a.empty()) {
        throw MetricsError(MetricsErrc::ScorerUnavailable, "embedding size mismatch");
      }
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
      }
      if (na == 0.0 || nb == 0.0) return 0.5;
      const double cosine = dot / (std::sqrt(na) * std::sqrt(nb));
      return (std::clamp(cosine, -1.0, 1.0) + 1.0) / 2.0;
    } catch (const Json::exception& e) {
      throw MetricsError(MetricsErrc::ScorerUnavailable,
                         "malformed embeddings reply: " + std::string(e.what()));
    }
  }

  std::string id() const override { return "embedding:" + cfg_.model; }

 private:
  ScorerConfig cfg_;
};

// BERTScore F1 from the scorer service.
class RemoteScorer : public SimilarityScorer {
 public:
  explicit RemoteScorer(ScorerConfig cfg) : cfg_(std::move(cfg)) {}

  double score(const std::string& candidate, const std::string& reference) override {
    auto reply = post_json(
        cfg_, "/score",
        Json{{"candidate", candidate}, {"reference", reference}, {"lang", cfg_.lang}});
    try {
      std::lock_guard lock(mu_);
      model_id_ = reply.value("model_id", model_id_);
      return reply.at("f1").get<double>();
    } catch (const Json::exception& e) {
      throw MetricsError(MetricsErrc::ScorerUnavailable,
                         "malformed scorer reply: " + std::string(e.what()));
    }
  }

  std::string id() const override {
    std::lock_guard lock(mu_);
    return "remote:" + (model_id_.empty() ? cfg_.url : model_id_);
  }

 private:
  ScorerConfig cfg_;
  mutable std::mutex mu_;
  std::string model_id_;
};

}  // namespace

std::string_view to_string(ScorerKind kind) {
  switch (kind) {
    case ScorerKind::Fallback: return "fallback";
    case ScorerKind::Embedding: return "embedding";
    case ScorerKind::Remote: return "remote";
  }
  return "?";
}

std::optional<ScorerKind> parse_scorer_kind(std::string_view name) {
  for (auto k : {ScorerKind::Fallback, ScorerKind::Embedding, ScorerKind::Remote}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

void to_json(Json& j, const ScorerConfig& c) {
  j = Json{{"kind", std::string(to_string(c.kind))},
           {"url", c.url},
           {"model", c.model},
           {"api_key_env", c.api_key_env},
           {"lang", c.lang},
           {"timeout_ms", c.timeout_ms}};
}

void from_json(const Json& j, ScorerConfig& c) {
  for (const auto& [key, _] : j.items()) {
    if (key != "kind" && key != "url" && key != "model" && key != "api_key_env" &&
        key != "lang" && key != "timeout_ms") {
      throw MetricsError(MetricsErrc::InvalidArgument,
                         "unknown scorer config key '" + key + "'");
    }
  }
  ScorerConfig d;
  auto kind = parse_scorer_kind(j.value("kind", std::string("fallback")));
  if (!kind) throw MetricsError(MetricsErrc::InvalidArgument, "unknown scorer kind");
  c.kind = *kind;
  c.url = j.value("url", d.url);
  c.model = j.value("model", d.model);
  c.api_key_env = j.value("api_key_env", d.api_key_env);
  c.lang = j.value("lang", d.lang);
  c.timeout_ms = j.value("timeout_ms", d.timeout_ms);
}

double trigram_f1(std::string_view candidate, std::string_view reference) {
  const auto a_text = normalize_whitespace(candidate);
  const auto b_text = normalize_whitespace(reference);
  const auto a = trigrams(decode_utf8(a_text));
  const auto b = trigrams(decode_utf8(b_text));
  if (a.empty() && b.empty()) return a_text == b_text ? 1.0 : 0.0;
  if (a.empty() || b.empty()) return 0.0;
  // Both sorted: multiset intersection by merge.
  std::size_t i = 0, j = 0, overlap = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) {
      ++i;
    } else if (b[j] < a[i]) {
      ++j;
    } else {
      ++overlap;
      ++i;
      ++j;
    }
  }
  return 2.0 * static_cast<double>(overlap) / static_cast<double>(a.size() + b.size());
}

std::unique_ptr<SimilarityScorer> make_scorer(const ScorerConfig& cfg) {
  switch (cfg.kind) {
    case ScorerKind::Fallback:
      return std::make_unique<FallbackScorer>();
    case ScorerKind::Embedding:
      if (cfg.url.empty()) {
        throw MetricsError(MetricsErrc::ScorerUnavailable, "embedding scorer needs a url");
      }
      return std::make_unique<EmbeddingScorer>(cfg);
    case ScorerKind::Remote:
      if (cfg.url.empty()) {
        throw MetricsError(MetricsErrc::ScorerUnavailable, "remote scorer needs a url");
      }
      return std::make_unique<RemoteScorer>(cfg);
  }
  throw MetricsError(MetricsErrc::ScorerUnavailable, "unknown scorer kind");
}

double similarity(const std::string& candidate, const std::string& reference,
                  SimilarityScorer& scorer) {
  if (normalize_whitespace(candidate).empty() || normalize_whitespace(reference).empty()) {
    throw MetricsError(MetricsErrc::EmptyText, "empty_text: similarity needs two texts");
  }
  return std::clamp(scorer.score(candidate, reference), 0.0, 1.0);
}

}  // namespace hallucheck

#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "hallucheck/backend.h"
#include "hallucheck/core.h"
#include "httplib.h"

namespace hallucheck::testing {

inline std::filesystem::path fixture_path(const std::string& name) {
  return std::filesystem::path(HALLUCHECK_TEST_DIR) / "fixtures" / name;
}

inline std::filesystem::path golden_path(const std::string& name) {
  return std::filesystem::path(HALLUCHECK_TEST_DIR) / "golden" / name;
}

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(HALLUCHECK_DATA_DIR) / name;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

inline std::vector<ExampleRecord> read_records(const std::filesystem::path& p) {
  std::vector<ExampleRecord> out;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(record_from_jsonl_line(line));
  }
  return out;
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("hallucheck-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Answers from a callback; records every prompt it sees.
class ScriptedBackend : public ChatBackend {
 public:
  using Responder = std::function<std::string(const std::string& prompt)>;

  ScriptedBackend(std::string id, Responder responder)
      : id_(std::move(id)), responder_(std::move(responder)) {}

  Completion complete(const ChatRequest& req) override {
    validate_request(req);
    const auto& prompt = req.messages.back().content;
    {
      std::lock_guard lock(mu_);
      prompts_.push_back(prompt);
    }
    Completion c;
    c.response.content = responder_(prompt);
    c.response.model = "scripted-model";
    c.response.finish_reason = "stop";
    return c;
  }

  const std::string& id() const override { return id_; }

  std::vector<std::string> prompts() const {
    std::lock_guard lock(mu_);
    return prompts_;
  }

 private:
  std::string id_;
  Responder responder_;
  mutable std::mutex mu_;
  std::vector<std::string> prompts_;
};

inline bool ends_with(const std::string& s, const std::string& tail) {
  return s.size() >= tail.size() && s.compare(s.size() - tail.size(), tail.size(), tail) == 0;
}

// Deterministic stand-in for a model over a known set of records. A prompt
// belongs to the record whose leading and answer slots it quotes, else to
// the record whose scripted revision it quotes.
struct ScriptedModel {
  struct Script {
    bool detect = false;
    std::string analysis;
    std::string revision;  // raw revise output
    bool judge_before = false;
    bool judge_after = false;
    std::string revised_text;  // text the judge sees after revision
  };

  std::vector<ExampleRecord> records;
  std::map<std::string, Script> scripts;

  const ExampleRecord* owner(const std::string& prompt, bool* revised) const {
    for (const auto& r : records) {
      const auto& first = r.fields.at(required_slots(r.kind).front());
      const auto& answer = r.fields.at(answer_slot(r.kind));
      if (prompt.find(first) != std::string::npos && prompt.find(answer) != std::string::npos) {
        *revised = false;
        return &r;
      }
    }
    for (const auto& r : records) {
      const auto& s = scripts.at(r.id);
      if (!s.revised_text.empty() && prompt.find(s.revised_text) != std::string::npos) {
        *revised = true;
        return &r;
      }
    }
    return nullptr;
  }

  std::string respond(const std::string& prompt) const {
    bool revised = false;
    const auto* r = owner(prompt, &revised);
    if (r == nullptr) return "I cannot tell.";
    const auto& s = scripts.at(r->id);
    if (ends_with(prompt, "devise a plan to solve the task.")) {
      return "1. Read the input.\n2. Check each claim.";
    }
    if (ends_with(prompt, "Show the reasoning process.")) return s.analysis;
    if (prompt.rfind("Please only conclude", 0) == 0) {
      return (revised ? s.judge_after : s.judge_before) ? "Yes" : "No";
    }
    if (prompt.find("Please conclude whether") != std::string::npos) {
      return s.detect ? "Yes." : "No.";
    }
    return s.revision;
  }

  ScriptedBackend::Responder responder() const {
    return [this](const std::string& prompt) { return respond(prompt); };
  }
};

// The ten-record mixed fixture and its script: five flagged (one false
// positive), one missed hallucination, one revision that comes back empty.
inline ScriptedModel mixed_model() {
  ScriptedModel m;
  m.records = read_records(data_path("data/samples/mixed.jsonl"));
  auto& s = m.scripts;
  s["halueval_qa-2-neg"] = {false, "The answer matches the knowledge.", "", false, false, ""};
  s["halueval_qa-3-pos"] = {true, "The knowledge says the Danube reaches the Black Sea.",
                            "Revised Answer: The Black Sea", true, false, "The Black Sea"};
  s["halueval_dialogue-2-neg"] = {false, "The response is supported.", "", false, false, ""};
  s["halueval_dialogue-2-pos"] = {true, "Dune was written by Frank Herbert, not Asimov.",
                                  "Revised Response: Frank Herbert wrote Dune.", true, false,
                                  "Frank Herbert wrote Dune."};
  s["halueval_summarization-2-neg"] = {false, "The summary is faithful.", "", false, false, ""};
  s["halueval_summarization-2-pos"] = {
      true, "The document reports first prize for a rye sourdough.",
      "Revised Summary: The bakery entered a bread contest.", true, true,
      "The bakery entered a bread contest."};
  s["umwp-1"] = {false, "All quantities are given.", "", false, false, ""};
  s["umwp-2"] = {true, "The number of apples is unknown: missing key information.",
                 "Revised Problem: Tom has 7 apples and gives 2 to Anna. How many apples does "
                 "Tom have left?",
                 true, false,
                 "Tom has 7 apples and gives 2 to Anna. How many apples does Tom have left?"};
  s["sc-1"] = {false, "Both texts describe the museum.", "", true, true, ""};
  s["sc-2"] = {true, "The wording differs.", "Revised Text 2:", false, false, ""};
  return m;
}

// cpp-httplib server on an ephemeral localhost port.
class StubServer {
 public:
  explicit StubServer(const std::function<void(httplib::Server&)>& setup) {
    setup(server_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int port() const { return port_; }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

inline std::string chat_reply(const std::string& content) {
  return Json{{"id", "stub"},
              {"model", "stub-model"},
              {"choices",
               Json::array({{{"index", 0},
                             {"message", {{"role", "assistant"}, {"content", content}}},
                             {"finish_reason", "stop"}}})},
              {"usage", {{"prompt_tokens", 3}, {"completion_tokens", 1}}}}
      .dump();
}

}  // namespace hallucheck::testing

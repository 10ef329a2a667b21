#pragma once

// Domain types shared by every module: task taxonomy, benchmark records,
// stage transcripts and detection/revision outcomes.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace hallucheck {

using Json = nlohmann::json;

// Compact single-line dump; invalid UTF-8 is replaced rather than thrown.
inline std::string dump_compact(const Json& j) {
  return j.dump(-1, ' ', false, Json::error_handler_t::replace);
}

// Exception carrying a module-specific error code alongside the message.
template <typename Code>
class CodedError : public std::runtime_error {
 public:
  CodedError(Code code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

enum class TaskKind {
  QuestionAnswering,
  Dialogue,
  Summarization,
  MathWordProblem,
  SelfContradiction,
};

inline constexpr std::array<TaskKind, 5> kAllTaskKinds = {
    TaskKind::QuestionAnswering, TaskKind::Dialogue, TaskKind::Summarization,
    TaskKind::MathWordProblem, TaskKind::SelfContradiction};

std::string_view to_string(TaskKind kind);
// Accepts the canonical snake_case names plus the short aliases
// qa, da, sum, mwp, sc.
std::optional<TaskKind> parse_task_kind(std::string_view name);
// Short column label used in reports (QA, DA, SUM, MWPs, SC).
std::string_view short_label(TaskKind kind);

// Slot names that a record of `kind` must carry, in rendering order.
const std::vector<std::string>& required_slots(TaskKind kind);

// The slot holding the model output under test (answer, response, summary,
// problem, text2). Judges and revisions substitute into this slot.
const std::string& answer_slot(TaskKind kind);

struct ExampleRecord {
  std::string id;
  TaskKind kind = TaskKind::QuestionAnswering;
  std::map<std::string, std::string> fields;
  std::optional<std::string> knowledge;
  bool gold_hallucinated = false;
  std::optional<std::string> gold_reference;
  std::optional<std::string> gold_reason_category;
  std::string language = "en";

  bool operator==(const ExampleRecord&) const = default;
};

struct Violation {
  std::string field;
  std::string rule;

  bool operator==(const Violation&) const = default;
};

// Empty iff the record satisfies every record-level invariant.
std::vector<Violation> validate(const ExampleRecord& record);

enum class StageId { Plan, Reason, Judge, Revise };

std::string_view to_string(StageId stage);
std::optional<StageId> parse_stage(std::string_view name);

struct StageTranscript {
  StageId stage = StageId::Plan;
  std::string prompt_text;
  std::string raw_output;
  std::string backend_id;
  std::string model_name;
  std::int64_t latency_ms = 0;
  bool cached = false;
  int retry_count = 0;

  bool operator==(const StageTranscript&) const = default;
};

enum class ParseStatus { Clean, AmbiguousResolved, ParseFailedDefault };

std::string_view to_string(ParseStatus status);
std::optional<ParseStatus> parse_parse_status(std::string_view name);

struct DetectionOutcome {
  bool verdict = false;
  ParseStatus parse_status = ParseStatus::ParseFailedDefault;
  std::vector<StageTranscript> transcripts;
  std::string analysis_text;

  bool operator==(const DetectionOutcome&) const = default;
};

struct RevisionOutcome {
  std::string revised_text;
  std::string source_analysis;
  StageTranscript transcript;

  bool operator==(const RevisionOutcome&) const = default;
};

void to_json(Json& j, const ExampleRecord& r);
void from_json(const Json& j, ExampleRecord& r);
void to_json(Json& j, const Violation& v);
void to_json(Json& j, const StageTranscript& t);
void from_json(const Json& j, StageTranscript& t);
void to_json(Json& j, const DetectionOutcome& d);
void from_json(const Json& j, DetectionOutcome& d);
void to_json(Json& j, const RevisionOutcome& r);
void from_json(const Json& j, RevisionOutcome& r);

// One compact JSON object per line, keys sorted, UTF-8.
std::string to_jsonl_line(const ExampleRecord& record);
ExampleRecord record_from_jsonl_line(std::string_view line);

}  // namespace hallucheck

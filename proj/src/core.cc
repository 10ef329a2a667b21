#include "hallucheck/core.h"

#include <set>

namespace hallucheck {
namespace {

struct KindInfo {
  TaskKind kind;
  std::string_view name;
  std::string_view short_label;
  std::vector<std::string> slots;
  std::string answer_slot;
};

const std::array<KindInfo, 5>& kind_table() {
  static const std::array<KindInfo, 5> table = {{
      {TaskKind::QuestionAnswering, "question_answering", "QA",
       {"question", "answer"}, "answer"},
      {TaskKind::Dialogue, "dialogue", "DA", {"dialogue_history", "response"},
       "response"},
      {TaskKind::Summarization, "summarization", "SUM", {"document", "summary"},
       "summary"},
      {TaskKind::MathWordProblem, "math_word_problem", "MWPs", {"problem"},
       "problem"},
      {TaskKind::SelfContradiction, "self_contradiction", "SC",
       {"text1", "text2"}, "text2"},
  }};
  return table;
}

const KindInfo& info(TaskKind kind) {
  return kind_table()[static_cast<std::size_t>(kind)];
}

template <typename T>
std::optional<T> optional_field(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

template <typename T>
void put_optional(Json& j, const char* key, const std::optional<T>& value) {
  if (value) {
    j[key] = *value;
  } else {
    j[key] = nullptr;
  }
}

}  // namespace

std::string_view to_string(TaskKind kind) { return info(kind).name; }

std::string_view short_label(TaskKind kind) { return info(kind).short_label; }

std::optional<TaskKind> parse_task_kind(std::string_view name) {
  for (const auto& k : kind_table()) {
    if (k.name == name) return k.kind;
  }
  static const std::array<std::pair<std::string_view, TaskKind>, 5> aliases = {{
      {"qa", TaskKind::QuestionAnswering},
      {"da", TaskKind::Dialogue},
      {"sum", TaskKind::Summarization},
      {"mwp", TaskKind::MathWordProblem},
      {"sc", TaskKind::SelfContradiction},
  }};
  for (const auto& [alias, kind] : aliases) {
    if (alias == name) return kind;
  }
  return std::nullopt;
}

const std::vector<std::string>& required_slots(TaskKind kind) {
  return info(kind).slots;
}

const std::string& answer_slot(TaskKind kind) { return info(kind).answer_slot; }

std::vector<Violation> validate(const ExampleRecord& record) {
  std::vector<Violation> out;
  if (record.id.empty()) out.push_back({"id", "empty_id"});
  for (const auto& slot : required_slots(record.kind)) {
    auto it = record.fields.find(slot);
    if (it == record.fields.end()) {
      out.push_back({slot, "missing_slot"});
    } else if (it->second.empty()) {
      out.push_back({slot, "empty_slot"});
    }
  }
  if (record.gold_reason_category && !record.gold_reason_category->empty() &&
      record.kind != TaskKind::MathWordProblem) {
    out.push_back({"gold_reason_category", "reason_category_wrong_kind"});
  }
  return out;
}

std::string_view to_string(StageId stage) {
  switch (stage) {
    case StageId::Plan: return "plan";
    case StageId::Reason: return "reason";
    case StageId::Judge: return "judge";
    case StageId::Revise: return "revise";
  }
  return "?";
}

std::optional<StageId> parse_stage(std::string_view name) {
  for (auto s : {StageId::Plan, StageId::Reason, StageId::Judge, StageId::Revise}) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

std::string_view to_string(ParseStatus status) {
  switch (status) {
    case ParseStatus::Clean: return "clean";
    case ParseStatus::AmbiguousResolved: return "ambiguous_resolved";
    case ParseStatus::ParseFailedDefault: return "parse_failed_default";
  }
  return "?";
}

std::optional<ParseStatus> parse_parse_status(std::string_view name) {
  for (auto s : {ParseStatus::Clean, ParseStatus::AmbiguousResolved,
                 ParseStatus::ParseFailedDefault}) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

void to_json(Json& j, const ExampleRecord& r) {
  j = Json::object();
  j["id"] = r.id;
  j["kind"] = std::string(to_string(r.kind));
  j["fields"] = r.fields;
  put_optional(j, "knowledge", r.knowledge);
  j["gold_hallucinated"] = r.gold_hallucinated;
  put_optional(j, "gold_reference", r.gold_reference);
  put_optional(j, "gold_reason_category", r.gold_reason_category);
  j["language"] = r.language;
}

void from_json(const Json& j, ExampleRecord& r) {
  r.id = j.at("id").get<std::string>();
  auto kind_name = j.at("kind").get<std::string>();
  auto kind = parse_task_kind(kind_name);
  if (!kind) throw std::invalid_argument("unknown task kind: " + kind_name);
  r.kind = *kind;
  r.fields = j.at("fields").get<std::map<std::string, std::string>>();
  r.knowledge = optional_field<std::string>(j, "knowledge");
  r.gold_hallucinated = j.at("gold_hallucinated").get<bool>();
  r.gold_reference = optional_field<std::string>(j, "gold_reference");
  r.gold_reason_category = optional_field<std::string>(j, "gold_reason_category");
  r.language = j.value("language", std::string("en"));
}

void to_json(Json& j, const Violation& v) {
  j = Json{{"field", v.field}, {"rule", v.rule}};
}

void to_json(Json& j, const StageTranscript& t) {
  j = Json{{"stage", std::string(to_string(t.stage))},
           {"prompt_text", t.prompt_text},
           {"raw_output", t.raw_output},
           {"backend_id", t.backend_id},
           {"model_name", t.model_name},
           {"latency_ms", t.latency_ms},
           {"cached", t.cached},
           {"retry_count", t.retry_count}};
}

void from_json(const Json& j, StageTranscript& t) {
  auto stage = parse_stage(j.at("stage").get<std::string>());
  if (!stage) throw std::invalid_argument("unknown stage in transcript");
  t.stage = *stage;
  t.prompt_text = j.at("prompt_text").get<std::string>();
  t.raw_output = j.at("raw_output").get<std::string>();
  t.backend_id = j.at("backend_id").get<std::string>();
  t.model_name = j.at("model_name").get<std::string>();
  t.latency_ms = j.at("latency_ms").get<std::int64_t>();
  t.cached = j.at("cached").get<bool>();
  t.retry_count = j.value("retry_count", 0);
}

void to_json(Json& j, const DetectionOutcome& d) {
  j = Json{{"verdict", d.verdict},
           {"parse_status", std::string(to_string(d.parse_status))},
           {"transcripts", d.transcripts},
           {"analysis_text", d.analysis_text}};
}

void from_json(const Json& j, DetectionOutcome& d) {
  d.verdict = j.at("verdict").get<bool>();
  auto status = parse_parse_status(j.at("parse_status").get<std::string>());
  if (!status) throw std::invalid_argument("unknown parse_status");
  d.parse_status = *status;
  d.transcripts = j.at("transcripts").get<std::vector<StageTranscript>>();
  d.analysis_text = j.at("analysis_text").get<std::string>();
}

void to_json(Json& j, const RevisionOutcome& r) {
  j = Json{{"revised_text", r.revised_text},
           {"source_analysis", r.source_analysis},
           {"transcript", r.transcript}};
}

void from_json(const Json& j, RevisionOutcome& r) {
  r.revised_text = j.at("revised_text").get<std::string>();
  r.source_analysis = j.at("source_analysis").get<std::string>();
  r.transcript = j.at("transcript").get<StageTranscript>();
}

std::string to_jsonl_line(const ExampleRecord& record) {
  return dump_compact(Json(record));
}

ExampleRecord record_from_jsonl_line(std::string_view line) {
  return Json::parse(line).get<ExampleRecord>();
}

}  // namespace hallucheck

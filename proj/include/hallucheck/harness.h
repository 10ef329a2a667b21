#pragma once

// Experiment orchestration: batch runs over a dataset, judge-model
// re-evaluation, metric assembly, paired run comparison and reports.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hallucheck/backend.h"
#include "hallucheck/datasets.h"
#include "hallucheck/metrics.h"
#include "hallucheck/pipeline.h"
#include "hallucheck/prompts.h"

namespace hallucheck {

enum class HarnessErrc { Config, Io, LogFormat, IdSetMismatch, MissingJudgeBackend };
std::string_view to_string(HarnessErrc code);
using HarnessError = CodedError<HarnessErrc>;

enum class KnowledgeMode { Vanilla, RetrievalAugmented };
std::string_view to_string(KnowledgeMode mode);
std::optional<KnowledgeMode> parse_knowledge_mode(std::string_view name);

struct SampleSpec {
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  std::uint64_t seed = 0;

  bool operator==(const SampleSpec&) const = default;
};

struct RunManifest {
  std::string run_id;
  std::string dataset;
  std::string adapter = "canonical";
  std::optional<SampleSpec> sample;
  StrategyId strategy = StrategyId::HalluClean;
  std::string backend_id;
  std::string judge_backend_id;
  ScorerKind scorer = ScorerKind::Fallback;
  bool revise = false;
  KnowledgeMode knowledge_mode = KnowledgeMode::Vanilla;
  // Filled in by execute_run. Never written to the log header; logs of
  // identical runs must be byte-identical. Recorded in <run_id>.meta.json.
  std::string started;
  std::string finished;
};

// Header form: no timestamps.
void to_json(Json& j, const RunManifest& m);
void from_json(const Json& j, RunManifest& m);

struct RunEnvironment {
  const TemplateRegistry* templates = nullptr;
  const AdapterRegistry* adapters = nullptr;
  std::map<std::string, BackendConfig> backend_configs;
  std::map<std::string, BackendPtr> backends;
  std::filesystem::path workdir = ".";
  int concurrency = 4;
  // Set to stop scheduling new records; finished ones are still written.
  const std::atomic<bool>* cancel = nullptr;
};

PipelineOptions pipeline_options_for(const BackendConfig& cfg);

// Loads, samples, runs every record, and writes <workdir>/<run_id>.jsonl
// (manifest header line, then one PipelineResult per record in sample
// order) plus <run_id>.meta.json. Configuration problems throw
// HarnessError(Config) before any backend call; per-record failures are
// embedded in the results.
std::filesystem::path execute_run(RunManifest manifest, const RunEnvironment& env);

struct RunLog {
  Json header;  // {"manifest": {...}, "backend": {...}}
  RunManifest manifest;
  std::vector<PipelineResult> results;
};

RunLog read_run_log(const std::filesystem::path& path);

// Substitutes `text_under_test` into the record's answer slot, renders the
// direct-ask prompt and returns the parsed hallucination verdict.
bool judge(const ExampleRecord& record, const std::string& text_under_test,
           ChatBackend& judge_backend, const TemplateRegistry& templates,
           const PipelineOptions& judge_opts);

// Category label from `labels` mentioned earliest in `text`
// (case-insensitive), or empty.
std::string extract_reason_category(const std::string& text,
                                    const std::vector<std::string>& labels);

struct TaskReport {
  std::string task;  // short label, or "Overall"
  std::string strategy;
  std::int64_t n = 0;
  std::int64_t errors = 0;
  ConfusionCounts counts;
  DetectionScores scores;
  // "absent" (revision not requested), "ok", or an error class such as
  // "division_undefined".
  std::string revision_status = "absent";
  std::optional<RevisionEval> revision;
};

struct EvalReport {
  std::string run_id;
  std::string strategy;
  std::vector<TaskReport> tasks;
  TaskReport overall;
  Json metadata;
};

struct EvalOptions {
  BackendPtr judge;
  PipelineOptions judge_options;
  SimilarityScorer* scorer = nullptr;  // fallback scorer when null
  double threshold = 0.85;
  QDenominator denominator = QDenominator::JudgeConfirmed;
  int concurrency = 4;
};

EvalReport evaluate(const RunLog& log, const TemplateRegistry& templates,
                    const EvalOptions& opts);

Json report_json(const EvalReport& report);
// Column layout: Method, then per-task F1/Acc (and R/Q when revised).
std::string render_table(const EvalReport& report);

struct Comparison {
  McNemarResult mcnemar;
  std::int64_t both_right = 0;
  std::int64_t both_wrong = 0;
};

// Pairs per-record correctness: n01 = A wrong and B right, n10 = A right
// and B wrong.
Comparison compare(const RunLog& a, const RunLog& b);

Json comparison_json(const Comparison& c);

}  // namespace hallucheck

#pragma once

// Detection and revision pipeline: the plan/reason/judge/revise chain, the
// baseline strategies, and verdict/revision output parsing.

#include <optional>
#include <string>
#include <vector>

#include "hallucheck/backend.h"
#include "hallucheck/core.h"
#include "hallucheck/prompts.h"

namespace hallucheck {

struct VerdictParse {
  bool verdict = false;
  ParseStatus status = ParseStatus::ParseFailedDefault;

  bool operator==(const VerdictParse&) const = default;
};

// Total over all inputs. Tokens are lowercased and stripped of adjacent
// punctuation. A single polarity on the final non-empty line is "clean";
// otherwise the last yes/no anywhere in the text wins
// ("ambiguous_resolved"); with neither present the verdict defaults to
// false ("parse_failed_default").
VerdictParse parse_verdict(std::string_view text);

// Drops a leading "Revised <noun>:" label (own line or inline) and trims
// surrounding whitespace.
std::string strip_revision_label(std::string_view text);

struct PipelineOptions {
  std::string model;
  std::optional<double> temperature;
  std::optional<int> max_tokens;
  bool include_knowledge = false;
  bool revise = false;
};

enum class PipelineErrc { Contract, Stage, EmptyRevision };
std::string_view to_string(PipelineErrc code);

// A stage failed. Carries the transcripts completed before the failure.
class StageError : public CodedError<PipelineErrc> {
 public:
  StageError(PipelineErrc code, StageId stage, std::string cause,
             const std::string& what, std::vector<StageTranscript> partial)
      : CodedError(code, what),
        stage_(stage),
        cause_(std::move(cause)),
        partial_(std::move(partial)) {}

  StageId stage() const { return stage_; }
  // Underlying error class, e.g. "rate_limited" or "empty_revision".
  const std::string& cause() const { return cause_; }
  const std::vector<StageTranscript>& partial_transcripts() const { return partial_; }

 private:
  StageId stage_;
  std::string cause_;
  std::vector<StageTranscript> partial_;
};

using ContractError = CodedError<PipelineErrc>;

struct PipelineErrorInfo {
  std::string stage;
  std::string code;
  std::string message;

  bool operator==(const PipelineErrorInfo&) const = default;
};

struct PipelineResult {
  std::string record_id;
  StrategyId strategy = StrategyId::HalluClean;
  ExampleRecord record;
  DetectionOutcome detection;
  std::optional<RevisionOutcome> revision;
  std::optional<PipelineErrorInfo> error;

  bool operator==(const PipelineResult&) const = default;
};

void to_json(Json& j, const PipelineResult& r);
void from_json(const Json& j, PipelineResult& r);

class Pipeline {
 public:
  Pipeline(const TemplateRegistry& registry, BackendPtr backend, PipelineOptions opts);

  DetectionOutcome detect(const ExampleRecord& record, StrategyId strategy) const;
  RevisionOutcome revise(const ExampleRecord& record,
                         const DetectionOutcome& detection) const;
  // Never throws for backend failures: they are recorded in result.error
  // with stage attribution. Contract violations still throw.
  PipelineResult run_full(const ExampleRecord& record, StrategyId strategy) const;

  const PipelineOptions& options() const { return opts_; }

 private:
  StageTranscript call(StageId stage, std::string prompt,
                       const std::vector<StageTranscript>& so_far) const;
  DetectionOutcome detect_structured(const ExampleRecord& record) const;
  DetectionOutcome detect_baseline(const ExampleRecord& record,
                                   StrategyId strategy) const;

  const TemplateRegistry& registry_;
  BackendPtr backend_;
  PipelineOptions opts_;
};

}  // namespace hallucheck

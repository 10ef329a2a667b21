#pragma once

// Template registry and renderer for routing instructions, the four
// structured-reasoning stages and the baseline prompt strategies.
//
// Templates are UTF-8 text files with {{name}} placeholders. Recognised
// names:
//   {{input}}             labeled record slots (plus knowledge block)
//   {{task}}              routing instruction for the record's kind
//   {{plan}}              output of the planning stage
//   {{analysis}}          output of the reasoning stage
//   {{knowledge_prefix}}  "Knowledge: ...\n" or empty
//   {{<slot>}}            a raw record slot, e.g. {{question}}
// Substitution is single-pass: placeholder-like text inside substituted
// values is never expanded.

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hallucheck/core.h"

namespace hallucheck {

enum class StrategyId {
  HalluClean,
  DirectAsk,
  RoutedDirectAsk,
  StepByStep,
  SelfCheckForm,
  PlanAndSolve,
  ChatProtectForm,
};

inline constexpr std::array<StrategyId, 7> kAllStrategies = {
    StrategyId::HalluClean,   StrategyId::DirectAsk,
    StrategyId::RoutedDirectAsk, StrategyId::StepByStep,
    StrategyId::SelfCheckForm, StrategyId::PlanAndSolve,
    StrategyId::ChatProtectForm};

std::string_view to_string(StrategyId strategy);
std::optional<StrategyId> parse_strategy(std::string_view name);
// "halluclean|direct_ask|..." for usage messages.
std::string strategy_names();

// Whether the strategy produces a reasoning trace usable for revision.
bool has_analysis(StrategyId strategy);

struct TemplateKey {
  StrategyId strategy = StrategyId::HalluClean;
  TaskKind kind = TaskKind::QuestionAnswering;
  StageId stage = StageId::Plan;

  auto operator<=>(const TemplateKey&) const = default;
};

std::string to_string(const TemplateKey& key);

struct RenderContext {
  const ExampleRecord& record;
  std::optional<std::string> plan_text;
  std::optional<std::string> analysis_text;
  bool include_knowledge = false;
};

enum class PromptErrc { MissingContext, UnknownTemplate, InvalidStep, Io, Manifest };
using PromptError = CodedError<PromptErrc>;

// "Question: ...\nAnswer: ..." etc., one labeled line per required slot,
// preceded by "Knowledge: ..." when requested and present.
std::string render_input(const ExampleRecord& record, bool include_knowledge);

// Number of backend calls a baseline strategy makes (ChatProtectForm: 2).
int baseline_step_count(StrategyId strategy);
// Stage a baseline step is recorded under in transcripts.
StageId baseline_stage(StrategyId strategy, int step_index);

class TemplateRegistry {
 public:
  // Loads the JSON manifest and every template file it references.
  static TemplateRegistry load(const std::filesystem::path& manifest_path);
  // templates/manifest.json under the source tree.
  static TemplateRegistry load_default();
  static std::filesystem::path default_manifest_path();

  const std::string& routing(TaskKind kind) const;
  bool contains(const TemplateKey& key) const;
  const std::string& raw_template(const TemplateKey& key) const;
  std::vector<TemplateKey> keys() const;

  std::string render_routing(TaskKind kind) const { return routing(kind); }
  std::string render_stage(const TemplateKey& key, const RenderContext& ctx) const;
  // `prior_output` feeds {{analysis}} for multi-step baselines
  // (ChatProtectForm step 1 receives its step-0 explanation).
  std::string render_baseline(StrategyId strategy, const ExampleRecord& record,
                              int step_index, bool include_knowledge = false,
                              std::optional<std::string> prior_output = {}) const;

 private:
  std::map<TaskKind, std::string> routing_;
  std::map<TemplateKey, std::string> templates_;
};

}  // namespace hallucheck

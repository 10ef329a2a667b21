#include "hallucheck/pipeline.h"

namespace hallucheck {
namespace {

std::string describe(const std::vector<Violation>& violations) {
  std::string out;
  for (const auto& v : violations) {
    if (!out.empty()) out += ", ";
    out += v.rule + "(" + v.field + ")";
  }
  return out;
}

void require_valid(const ExampleRecord& record) {
  auto violations = validate(record);
  if (!violations.empty()) {
    throw ContractError(PipelineErrc::Contract,
                        "record '" + record.id + "' is invalid: " + describe(violations));
  }
}

}  // namespace

std::string_view to_string(PipelineErrc code) {
  switch (code) {
    case PipelineErrc::Contract: return "contract_error";
    case PipelineErrc::Stage: return "stage_error";
    case PipelineErrc::EmptyRevision: return "empty_revision";
  }
  return "?";
}

void to_json(Json& j, const PipelineResult& r) {
  j = Json::object();
  j["record_id"] = r.record_id;
  j["strategy"] = std::string(to_string(r.strategy));
  j["record"] = r.record;
  j["detection"] = r.detection;
  j["revision"] = r.revision ? Json(*r.revision) : Json(nullptr);
  if (r.error) {
    j["error"] = Json{{"stage", r.error->stage},
                      {"code", r.error->code},
                      {"message", r.error->message}};
  } else {
    j["error"] = nullptr;
  }
}

void from_json(const Json& j, PipelineResult& r) {
  r.record_id = j.at("record_id").get<std::string>();
  auto strategy = parse_strategy(j.at("strategy").get<std::string>());
  if (!strategy) throw std::invalid_argument("unknown strategy in run log");
  r.strategy = *strategy;
  r.record = j.at("record").get<ExampleRecord>();
  r.detection = j.at("detection").get<DetectionOutcome>();
  r.revision.reset();
  if (auto it = j.find("revision"); it != j.end() && !it->is_null()) {
    r.revision = it->get<RevisionOutcome>();
  }
  r.error.reset();
  if (auto it = j.find("error"); it != j.end() && !it->is_null()) {
    r.error = PipelineErrorInfo{it->at("stage").get<std::string>(),
                                it->at("code").get<std::string>(),
                                it->at("message").get<std::string>()};
  }
}

Pipeline::Pipeline(const TemplateRegistry& registry, BackendPtr backend,
                   PipelineOptions opts)
    : registry_(registry), backend_(std::move(backend)), opts_(std::move(opts)) {}

StageTranscript Pipeline::call(StageId stage, std::string prompt,
                               const std::vector<StageTranscript>& so_far) const {
  ChatRequest req;
  req.model = opts_.model;
  req.messages.push_back({Role::User, prompt});
  req.temperature = opts_.temperature;
  req.max_tokens = opts_.max_tokens;
  try {
    auto completion = backend_->complete(req);
    StageTranscript t;
    t.stage = stage;
    t.prompt_text = std::move(prompt);
    t.raw_output = std::move(completion.response.content);
    t.backend_id = backend_->id();
    t.model_name = completion.response.model.empty() ? opts_.model
                                                     : completion.response.model;
    t.latency_ms = completion.latency_ms;
    t.cached = completion.cached;
    t.retry_count = completion.retry_count;
    return t;
  } catch (const BackendError& e) {
    throw StageError(PipelineErrc::Stage, stage, std::string(to_string(e.code())),
                     std::string(to_string(stage)) + " stage failed: " + e.what(),
                     so_far);
  }
}

DetectionOutcome Pipeline::detect(const ExampleRecord& record, StrategyId strategy) const {
  require_valid(record);
  if (strategy == StrategyId::HalluClean) return detect_structured(record);
  return detect_baseline(record, strategy);
}

DetectionOutcome Pipeline::detect_structured(const ExampleRecord& record) const {
  const auto kind = record.kind;
  DetectionOutcome out;
  RenderContext plan_ctx{record, std::nullopt, std::nullopt, opts_.include_knowledge};
  out.transcripts.push_back(call(
      StageId::Plan,
      registry_.render_stage({StrategyId::HalluClean, kind, StageId::Plan}, plan_ctx),
      out.transcripts));

  RenderContext reason_ctx{record, out.transcripts.back().raw_output, std::nullopt,
                           opts_.include_knowledge};
  out.transcripts.push_back(call(
      StageId::Reason,
      registry_.render_stage({StrategyId::HalluClean, kind, StageId::Reason}, reason_ctx),
      out.transcripts));
  out.analysis_text = out.transcripts.back().raw_output;

  RenderContext judge_ctx{record, std::nullopt, out.analysis_text,
                          opts_.include_knowledge};
  out.transcripts.push_back(call(
      StageId::Judge,
      registry_.render_stage({StrategyId::HalluClean, kind, StageId::Judge}, judge_ctx),
      out.transcripts));

  auto parsed = parse_verdict(out.transcripts.back().raw_output);
  out.verdict = parsed.verdict;
  out.parse_status = parsed.status;
  return out;
}

DetectionOutcome Pipeline::detect_baseline(const ExampleRecord& record,
                                           StrategyId strategy) const {
  DetectionOutcome out;
  const bool knowledge = opts_.include_knowledge;
  auto step = [&](int index, std::optional<std::string> prior = {}) {
    auto prompt = registry_.render_baseline(strategy, record, index, knowledge,
                                            std::move(prior));
    out.transcripts.push_back(
        call(baseline_stage(strategy, index), std::move(prompt), out.transcripts));
    return out.transcripts.back().raw_output;
  };

  VerdictParse parsed;
  switch (strategy) {
    case StrategyId::DirectAsk:
    case StrategyId::RoutedDirectAsk:
      parsed = parse_verdict(step(0));
      break;
    case StrategyId::SelfCheckForm:
      // The question asks whether the sentence is *supported*: "Yes" means
      // no hallucination.
      parsed = parse_verdict(step(0));
      if (parsed.status != ParseStatus::ParseFailedDefault) {
        parsed.verdict = !parsed.verdict;
      }
      break;
    case StrategyId::StepByStep:
      out.analysis_text = step(0);
      parsed = parse_verdict(out.analysis_text);
      break;
    case StrategyId::PlanAndSolve: {
      out.analysis_text = step(0);
      parsed = parse_verdict(out.analysis_text);
      if (parsed.status == ParseStatus::ParseFailedDefault) {
        RenderContext ctx{record, std::nullopt, out.analysis_text, knowledge};
        auto prompt = registry_.render_stage(
            {StrategyId::HalluClean, record.kind, StageId::Judge}, ctx);
        out.transcripts.push_back(call(StageId::Judge, std::move(prompt), out.transcripts));
        parsed = parse_verdict(out.transcripts.back().raw_output);
      }
      break;
    }
    case StrategyId::ChatProtectForm:
      out.analysis_text = step(0);
      parsed = parse_verdict(step(1, out.analysis_text));
      break;
    case StrategyId::HalluClean:
      throw ContractError(PipelineErrc::Contract, "HalluClean is not a baseline");
  }
  out.verdict = parsed.verdict;
  out.parse_status = parsed.status;
  return out;
}

RevisionOutcome Pipeline::revise(const ExampleRecord& record,
                                 const DetectionOutcome& detection) const {
  require_valid(record);
  if (!detection.verdict) {
    throw ContractError(PipelineErrc::Contract,
                        "revise called on record '" + record.id +
                            "' whose detection verdict is negative");
  }
  if (detection.analysis_text.empty()) {
    throw ContractError(PipelineErrc::Contract,
                        "revise requires a non-empty analysis for record '" +
                            record.id + "'");
  }
  RenderContext ctx{record, std::nullopt, detection.analysis_text,
                    opts_.include_knowledge};
  auto prompt =
      registry_.render_stage({StrategyId::HalluClean, record.kind, StageId::Revise}, ctx);
  RevisionOutcome out;
  out.transcript = call(StageId::Revise, std::move(prompt), {});
  out.source_analysis = detection.analysis_text;
  out.revised_text = strip_revision_label(out.transcript.raw_output);
  if (out.revised_text.empty()) {
    throw StageError(PipelineErrc::EmptyRevision, StageId::Revise, "empty_revision",
                     "revise stage returned no text for record '" + record.id + "'",
                     {out.transcript});
  }
  return out;
}

PipelineResult Pipeline::run_full(const ExampleRecord& record, StrategyId strategy) const {
  require_valid(record);
  if (opts_.revise && !has_analysis(strategy)) {
    throw ContractError(PipelineErrc::Contract,
                        "strategy " + std::string(to_string(strategy)) +
                            " produces no analysis and cannot drive revision");
  }
  PipelineResult result;
  result.record_id = record.id;
  result.strategy = strategy;
  result.record = record;
  try {
    result.detection = detect(record, strategy);
  } catch (const StageError& e) {
    result.detection = DetectionOutcome{};
    result.detection.transcripts = e.partial_transcripts();
    result.error = PipelineErrorInfo{std::string(to_string(e.stage())), e.cause(), e.what()};
    return result;
  }
  if (opts_.revise && result.detection.verdict) {
    try {
      result.revision = revise(record, result.detection);
    } catch (const StageError& e) {
      result.error = PipelineErrorInfo{std::string(to_string(e.stage())), e.cause(), e.what()};
    }
  }
  return result;
}

}  // namespace hallucheck

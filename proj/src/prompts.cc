#include "hallucheck/prompts.h"

#include <fstream>
#include <sstream>

namespace hallucheck {
namespace {

struct StrategyInfo {
  StrategyId id;
  std::string_view name;
  bool has_analysis;
};

constexpr std::array<StrategyInfo, 7> kStrategyTable = {{
    {StrategyId::HalluClean, "halluclean", true},
    {StrategyId::DirectAsk, "direct_ask", false},
    {StrategyId::RoutedDirectAsk, "routed_direct_ask", false},
    {StrategyId::StepByStep, "step_by_step", true},
    {StrategyId::SelfCheckForm, "selfcheck", false},
    {StrategyId::PlanAndSolve, "plan_and_solve", true},
    {StrategyId::ChatProtectForm, "chatprotect", true},
}};

const std::map<std::string, std::string>& slot_labels() {
  static const std::map<std::string, std::string> labels = {
      {"question", "Question"},   {"answer", "Answer"},
      {"dialogue_history", "Dialogue history"},
      {"response", "Response"},   {"document", "Document"},
      {"summary", "Summary"},     {"problem", "Problem"},
      {"text1", "Text 1"},        {"text2", "Text 2"},
  };
  return labels;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw PromptError(PromptErrc::Io, "cannot read template file " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  // Files end with a newline by convention; it is not part of the prompt.
  if (!text.empty() && text.back() == '\n') text.pop_back();
  return text;
}

std::string knowledge_prefix(const ExampleRecord& record, bool include_knowledge) {
  if (!include_knowledge || !record.knowledge || record.knowledge->empty()) return {};
  return "Knowledge: " + *record.knowledge + "\n";
}

struct Substitutions {
  const ExampleRecord& record;
  const std::string* task = nullptr;
  const std::optional<std::string>* plan = nullptr;
  const std::optional<std::string>* analysis = nullptr;
  bool include_knowledge = false;
};

std::string lookup(const std::string& name, const Substitutions& subs,
                   const std::string& key_name) {
  auto missing = [&](const std::string& what) {
    return PromptError(PromptErrc::MissingContext,
                       "template " + key_name + " requires " + what);
  };
  if (name == "input") return render_input(subs.record, subs.include_knowledge);
  if (name == "knowledge_prefix") {
    return knowledge_prefix(subs.record, subs.include_knowledge);
  }
  if (name == "task") {
    if (subs.task == nullptr) throw missing("routing text");
    return *subs.task;
  }
  if (name == "plan") {
    if (subs.plan == nullptr || !subs.plan->has_value()) throw missing("plan_text");
    return **subs.plan;
  }
  if (name == "analysis") {
    if (subs.analysis == nullptr || !subs.analysis->has_value()) {
      throw missing("analysis_text");
    }
    return **subs.analysis;
  }
  auto it = subs.record.fields.find(name);
  if (it == subs.record.fields.end()) throw missing("slot '" + name + "'");
  return it->second;
}

std::string substitute(const std::string& tmpl, const Substitutions& subs,
                       const std::string& key_name) {
  std::string out;
  out.reserve(tmpl.size() + 256);
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    auto open = tmpl.find("{{", pos);
    if (open == std::string::npos) {
      out.append(tmpl, pos);
      break;
    }
    auto close = tmpl.find("}}", open + 2);
    if (close == std::string::npos) {
      out.append(tmpl, pos);
      break;
    }
    out.append(tmpl, pos, open - pos);
    out += lookup(tmpl.substr(open + 2, close - open - 2), subs, key_name);
    pos = close + 2;
  }
  return out;
}

}  // namespace

std::string_view to_string(StrategyId strategy) {
  return kStrategyTable[static_cast<std::size_t>(strategy)].name;
}

std::optional<StrategyId> parse_strategy(std::string_view name) {
  for (const auto& s : kStrategyTable) {
    if (s.name == name) return s.id;
  }
  return std::nullopt;
}

std::string strategy_names() {
  std::string out;
  for (const auto& s : kStrategyTable) {
    if (!out.empty()) out += '|';
    out += s.name;
  }
  return out;
}

bool has_analysis(StrategyId strategy) {
  return kStrategyTable[static_cast<std::size_t>(strategy)].has_analysis;
}

std::string to_string(const TemplateKey& key) {
  std::string out(to_string(key.strategy));
  out += '/';
  out += to_string(key.kind);
  out += '/';
  out += to_string(key.stage);
  return out;
}

std::string render_input(const ExampleRecord& record, bool include_knowledge) {
  std::string out = knowledge_prefix(record, include_knowledge);
  const auto& slots = required_slots(record.kind);
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (i > 0) out += '\n';
    auto it = record.fields.find(slots[i]);
    out += slot_labels().at(slots[i]);
    out += ": ";
    if (it != record.fields.end()) out += it->second;
  }
  return out;
}

int baseline_step_count(StrategyId strategy) {
  switch (strategy) {
    case StrategyId::HalluClean: return 0;
    case StrategyId::ChatProtectForm: return 2;
    default: return 1;
  }
}

StageId baseline_stage(StrategyId strategy, int step_index) {
  if (strategy == StrategyId::HalluClean || step_index < 0 ||
      step_index >= baseline_step_count(strategy)) {
    throw PromptError(PromptErrc::InvalidStep,
                      "invalid step " + std::to_string(step_index) + " for strategy " +
                          std::string(to_string(strategy)));
  }
  switch (strategy) {
    case StrategyId::StepByStep:
    case StrategyId::PlanAndSolve:
      return StageId::Reason;
    case StrategyId::ChatProtectForm:
      return step_index == 0 ? StageId::Reason : StageId::Judge;
    default:
      return StageId::Judge;
  }
}

TemplateRegistry TemplateRegistry::load(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) {
    throw PromptError(PromptErrc::Io,
                      "cannot read template manifest " + manifest_path.string());
  }
  Json manifest;
  try {
    manifest = Json::parse(in);
  } catch (const Json::exception& e) {
    throw PromptError(PromptErrc::Manifest,
                      "template manifest is not valid JSON: " + std::string(e.what()));
  }
  const auto base = manifest_path.parent_path();
  TemplateRegistry reg;
  try {
    for (const auto& [kind_name, file] : manifest.at("routing").items()) {
      auto kind = parse_task_kind(kind_name);
      if (!kind) throw PromptError(PromptErrc::Manifest, "unknown kind " + kind_name);
      reg.routing_[*kind] = read_file(base / file.get<std::string>());
    }
    for (const auto& entry : manifest.at("templates")) {
      auto strategy = parse_strategy(entry.at("strategy").get<std::string>());
      auto kind = parse_task_kind(entry.at("kind").get<std::string>());
      auto stage = parse_stage(entry.at("stage").get<std::string>());
      if (!strategy || !kind || !stage) {
        throw PromptError(PromptErrc::Manifest,
                          "bad template manifest entry: " + entry.dump());
      }
      TemplateKey key{*strategy, *kind, *stage};
      if (reg.templates_.count(key) != 0) {
        throw PromptError(PromptErrc::Manifest, "duplicate template " + to_string(key));
      }
      reg.templates_[key] = read_file(base / entry.at("file").get<std::string>());
    }
  } catch (const Json::exception& e) {
    throw PromptError(PromptErrc::Manifest,
                      "malformed template manifest: " + std::string(e.what()));
  }
  for (auto kind : kAllTaskKinds) {
    if (reg.routing_.count(kind) == 0) {
      throw PromptError(PromptErrc::Manifest,
                        "no routing prompt for " + std::string(to_string(kind)));
    }
  }
  return reg;
}

std::filesystem::path TemplateRegistry::default_manifest_path() {
  return std::filesystem::path(HALLUCHECK_DATA_DIR) / "templates" / "manifest.json";
}

TemplateRegistry TemplateRegistry::load_default() {
  return load(default_manifest_path());
}

const std::string& TemplateRegistry::routing(TaskKind kind) const {
  return routing_.at(kind);
}

bool TemplateRegistry::contains(const TemplateKey& key) const {
  return templates_.count(key) != 0;
}

const std::string& TemplateRegistry::raw_template(const TemplateKey& key) const {
  auto it = templates_.find(key);
  if (it == templates_.end()) {
    throw PromptError(PromptErrc::UnknownTemplate, "no template for " + to_string(key));
  }
  return it->second;
}

std::vector<TemplateKey> TemplateRegistry::keys() const {
  std::vector<TemplateKey> out;
  out.reserve(templates_.size());
  for (const auto& [key, _] : templates_) out.push_back(key);
  return out;
}

std::string TemplateRegistry::render_stage(const TemplateKey& key,
                                           const RenderContext& ctx) const {
  if (key.kind != ctx.record.kind) {
    throw PromptError(PromptErrc::UnknownTemplate,
                      "template " + to_string(key) + " does not match record kind " +
                          std::string(to_string(ctx.record.kind)));
  }
  const auto& tmpl = raw_template(key);
  Substitutions subs{ctx.record, &routing(key.kind), &ctx.plan_text,
                     &ctx.analysis_text, ctx.include_knowledge};
  return substitute(tmpl, subs, to_string(key));
}

std::string TemplateRegistry::render_baseline(StrategyId strategy,
                                              const ExampleRecord& record,
                                              int step_index, bool include_knowledge,
                                              std::optional<std::string> prior_output) const {
  TemplateKey key{strategy, record.kind, baseline_stage(strategy, step_index)};
  RenderContext ctx{record, std::nullopt, std::move(prior_output), include_knowledge};
  return render_stage(key, ctx);
}

}  // namespace hallucheck

#include "hallucheck/harness.h"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "hallucheck/log.h"

namespace hallucheck {
namespace {

std::string utc_now() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

HarnessError config_error(const std::string& what) {
  return HarnessError(HarnessErrc::Config, what);
}

// Runs fn(i) for i in [0, n) on up to `workers` threads.
template <typename Fn>
void parallel_for(std::size_t n, int workers, const std::atomic<bool>* cancel, Fn fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (;;) {
      if (cancel != nullptr && cancel->load()) return;
      {
        std::lock_guard lock(failure_mu);
        if (failure) return;
      }
      auto i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const auto count = std::max<std::size_t>(1, std::min<std::size_t>(n, std::max(1, workers)));
  {
    std::vector<std::jthread> threads;
    for (std::size_t t = 0; t < count; ++t) threads.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
}

std::vector<TemplateKey> keys_needed(StrategyId strategy, TaskKind kind, bool revise) {
  std::vector<TemplateKey> keys;
  if (strategy == StrategyId::HalluClean) {
    for (auto s : {StageId::Plan, StageId::Reason, StageId::Judge}) {
      keys.push_back({strategy, kind, s});
    }
  } else {
    for (int i = 0; i < baseline_step_count(strategy); ++i) {
      keys.push_back({strategy, kind, baseline_stage(strategy, i)});
    }
    if (strategy == StrategyId::PlanAndSolve) {
      keys.push_back({StrategyId::HalluClean, kind, StageId::Judge});
    }
  }
  if (revise) keys.push_back({StrategyId::HalluClean, kind, StageId::Revise});
  return keys;
}

bool detection_complete(const PipelineResult& r) {
  return !r.error || r.error->stage == to_string(StageId::Revise);
}

double pct(double x) { return std::round(x * 1000.0) / 10.0; }

}  // namespace

std::string_view to_string(HarnessErrc code) {
  switch (code) {
    case HarnessErrc::Config: return "config_error";
    case HarnessErrc::Io: return "io_error";
    case HarnessErrc::LogFormat: return "log_format_error";
    case HarnessErrc::IdSetMismatch: return "id_set_mismatch";
    case HarnessErrc::MissingJudgeBackend: return "missing_judge_backend";
  }
  return "?";
}

std::string_view to_string(KnowledgeMode mode) {
  return mode == KnowledgeMode::Vanilla ? "vanilla" : "retrieval_augmented";
}

std::optional<KnowledgeMode> parse_knowledge_mode(std::string_view name) {
  if (name == "vanilla") return KnowledgeMode::Vanilla;
  if (name == "retrieval_augmented") return KnowledgeMode::RetrievalAugmented;
  return std::nullopt;
}

void to_json(Json& j, const RunManifest& m) {
  j = Json{{"run_id", m.run_id},
           {"dataset", m.dataset},
           {"adapter", m.adapter},
           {"strategy", std::string(to_string(m.strategy))},
           {"backend_id", m.backend_id},
           {"judge_backend_id", m.judge_backend_id},
           {"scorer", std::string(to_string(m.scorer))},
           {"revise", m.revise},
           {"knowledge_mode", std::string(to_string(m.knowledge_mode))}};
  if (m.sample) {
    j["sample"] = Json{{"n_pos", m.sample->n_pos},
                       {"n_neg", m.sample->n_neg},
                       {"seed", m.sample->seed}};
  } else {
    j["sample"] = nullptr;
  }
}

void from_json(const Json& j, RunManifest& m) {
  static const std::set<std::string> known = {
      "run_id", "dataset", "adapter", "sample", "strategy", "backend_id",
      "judge_backend_id", "scorer", "revise", "knowledge_mode"};
  for (const auto& [key, _] : j.items()) {
    if (known.count(key) == 0) throw config_error("unknown manifest key '" + key + "'");
  }
  m = RunManifest{};
  m.run_id = j.at("run_id").get<std::string>();
  m.dataset = j.at("dataset").get<std::string>();
  m.adapter = j.value("adapter", std::string("canonical"));
  if (auto it = j.find("sample"); it != j.end() && !it->is_null()) {
    m.sample = SampleSpec{it->at("n_pos").get<std::size_t>(),
                          it->at("n_neg").get<std::size_t>(),
                          it->at("seed").get<std::uint64_t>()};
  }
  auto strategy = parse_strategy(j.at("strategy").get<std::string>());
  if (!strategy) throw config_error("unknown strategy in manifest");
  m.strategy = *strategy;
  m.backend_id = j.at("backend_id").get<std::string>();
  m.judge_backend_id = j.value("judge_backend_id", std::string());
  auto scorer = parse_scorer_kind(j.value("scorer", std::string("fallback")));
  if (!scorer) throw config_error("unknown scorer in manifest");
  m.scorer = *scorer;
  m.revise = j.value("revise", false);
  auto mode = parse_knowledge_mode(j.value("knowledge_mode", std::string("vanilla")));
  if (!mode) throw config_error("unknown knowledge_mode in manifest");
  m.knowledge_mode = *mode;
}

PipelineOptions pipeline_options_for(const BackendConfig& cfg) {
  PipelineOptions opts;
  opts.model = cfg.model;
  opts.temperature = cfg.temperature;
  opts.max_tokens = cfg.max_tokens;
  return opts;
}

std::filesystem::path execute_run(RunManifest manifest, const RunEnvironment& env) {
  if (env.templates == nullptr || env.adapters == nullptr) {
    throw config_error("run environment lacks templates or adapters");
  }
  if (manifest.run_id.empty() ||
      manifest.run_id.find_first_of("/\\") != std::string::npos) {
    throw config_error("run_id must be a non-empty file name");
  }
  auto backend_it = env.backends.find(manifest.backend_id);
  if (backend_it == env.backends.end()) {
    throw config_error("unknown backend '" + manifest.backend_id + "'");
  }
  if (!manifest.judge_backend_id.empty() &&
      env.backends.count(manifest.judge_backend_id) == 0) {
    throw config_error("unknown judge backend '" + manifest.judge_backend_id + "'");
  }
  if (manifest.revise && !has_analysis(manifest.strategy)) {
    throw config_error("strategy " + std::string(to_string(manifest.strategy)) +
                       " produces no analysis; revision is unsupported");
  }
  BackendConfig backend_cfg;
  backend_cfg.backend_id = manifest.backend_id;
  if (auto it = env.backend_configs.find(manifest.backend_id);
      it != env.backend_configs.end()) {
    backend_cfg = it->second;
  }

  LoadResult loaded;
  try {
    const auto& adapter = env.adapters->get(manifest.adapter);
    loaded = load(manifest.dataset, adapter);
  } catch (const DatasetError& e) {
    if (e.code() == DatasetErrc::Io || e.code() == DatasetErrc::Parse) {
      throw HarnessError(HarnessErrc::Io, e.what());
    }
    throw config_error(e.what());
  }
  std::vector<ExampleRecord> records = std::move(loaded.records);
  if (manifest.sample) {
    try {
      records = balanced_sample(records, manifest.sample->n_pos, manifest.sample->n_neg,
                                manifest.sample->seed);
    } catch (const DatasetError& e) {
      throw config_error(e.what());
    }
  }
  const bool augmented = manifest.knowledge_mode == KnowledgeMode::RetrievalAugmented;
  std::set<TaskKind> kinds;
  for (const auto& r : records) {
    if (augmented && (!r.knowledge || r.knowledge->empty())) {
      throw config_error("knowledge_mode retrieval_augmented requires non-empty knowledge "
                         "on every record; '" + r.id + "' has none");
    }
    kinds.insert(r.kind);
  }
  for (auto kind : kinds) {
    for (const auto& key : keys_needed(manifest.strategy, kind, manifest.revise)) {
      if (!env.templates->contains(key)) {
        throw config_error("no template for " + to_string(key));
      }
    }
  }

  std::error_code ec;
  std::filesystem::create_directories(env.workdir, ec);
  if (!loaded.rejects.empty()) {
    write_rejects(loaded.rejects, env.workdir / (manifest.run_id + ".rejects.jsonl"));
    log_warning(std::to_string(loaded.rejects.size()) + " dataset rows rejected; see " +
                (env.workdir / (manifest.run_id + ".rejects.jsonl")).string());
  }

  PipelineOptions opts = pipeline_options_for(backend_cfg);
  opts.include_knowledge = augmented;
  opts.revise = manifest.revise;
  Pipeline pipeline(*env.templates, backend_it->second, opts);

  manifest.started = utc_now();
  std::vector<std::optional<PipelineResult>> results(records.size());
  parallel_for(records.size(), env.concurrency, env.cancel, [&](std::size_t i) {
    const auto& record = records[i];
    try {
      results[i] = pipeline.run_full(record, manifest.strategy);
    } catch (const std::exception& e) {
      PipelineResult r;
      r.record_id = record.id;
      r.strategy = manifest.strategy;
      r.record = record;
      r.error = PipelineErrorInfo{"", "internal_error", e.what()};
      results[i] = std::move(r);
    }
  });
  manifest.finished = utc_now();

  const auto log_path = env.workdir / (manifest.run_id + ".jsonl");
  std::ofstream out(log_path, std::ios::binary | std::ios::trunc);
  if (!out) throw HarnessError(HarnessErrc::Io, "cannot write " + log_path.string());
  Json header{{"manifest", manifest}, {"backend", backend_cfg}};
  out << dump_compact(header) << '\n';
  std::size_t written = 0;
  std::size_t errors = 0;
  for (const auto& r : results) {
    if (!r) continue;
    out << dump_compact(Json(*r)) << '\n';
    ++written;
    errors += r->error ? 1 : 0;
  }
  out.close();
  if (!out) throw HarnessError(HarnessErrc::Io, "failed writing " + log_path.string());

  Json meta{{"run_id", manifest.run_id},
            {"log", log_path.filename().string()},
            {"started", manifest.started},
            {"finished", manifest.finished},
            {"records", records.size()},
            {"written", written},
            {"errors", errors},
            {"rejects", loaded.rejects.size()},
            {"cancelled", written < records.size()}};
  std::ofstream meta_out(env.workdir / (manifest.run_id + ".meta.json"),
                         std::ios::binary | std::ios::trunc);
  meta_out << meta.dump(2) << '\n';
  return log_path;
}

RunLog read_run_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw HarnessError(HarnessErrc::Io, "cannot read run log " + path.string());
  RunLog log;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = Json::parse(line);
      if (line_no == 1) {
        if (!j.contains("manifest")) {
          throw HarnessError(HarnessErrc::LogFormat,
                             path.string() + ": first line is not a manifest header");
        }
        log.header = j;
        log.manifest = j.at("manifest").get<RunManifest>();
        continue;
      }
      log.results.push_back(j.get<PipelineResult>());
    } catch (const Json::exception& e) {
      throw HarnessError(HarnessErrc::LogFormat, path.string() + ":" +
                                                     std::to_string(line_no) + ": " +
                                                     e.what());
    } catch (const std::invalid_argument& e) {
      throw HarnessError(HarnessErrc::LogFormat, path.string() + ":" +
                                                     std::to_string(line_no) + ": " +
                                                     e.what());
    }
  }
  if (log.header.is_null()) {
    throw HarnessError(HarnessErrc::LogFormat, path.string() + ": empty run log");
  }
  return log;
}

bool judge(const ExampleRecord& record, const std::string& text_under_test,
           ChatBackend& judge_backend, const TemplateRegistry& templates,
           const PipelineOptions& judge_opts) {
  if (text_under_test.empty()) {
    throw ContractError(PipelineErrc::Contract, "judge needs non-empty text");
  }
  ExampleRecord subject = record;
  subject.fields[answer_slot(record.kind)] = text_under_test;
  ChatRequest req;
  req.model = judge_opts.model;
  req.temperature = judge_opts.temperature;
  req.max_tokens = judge_opts.max_tokens;
  req.messages.push_back(
      {Role::User, templates.render_baseline(StrategyId::DirectAsk, subject, 0)});
  return parse_verdict(judge_backend.complete(req).response.content).verdict;
}

std::string extract_reason_category(const std::string& text,
                                    const std::vector<std::string>& labels) {
  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
  };
  const auto haystack = lower(text);
  std::string best;
  auto best_pos = std::string::npos;
  for (const auto& label : labels) {
    if (label.empty()) continue;
    auto pos = haystack.find(lower(label));
    // Earliest mention wins; longer labels win ties.
    if (pos != std::string::npos &&
        (pos < best_pos || (pos == best_pos && label.size() > best.size()))) {
      best_pos = pos;
      best = label;
    }
  }
  return best;
}

EvalReport evaluate(const RunLog& log, const TemplateRegistry& templates,
                    const EvalOptions& opts) {
  EvalReport report;
  report.run_id = log.manifest.run_id;
  report.strategy = std::string(to_string(log.manifest.strategy));

  // Judge verdicts for every detector-flagged record.
  RevisionEvalInputs inputs;
  inputs.threshold = opts.threshold;
  inputs.denominator = opts.denominator;
  std::unique_ptr<SimilarityScorer> fallback;
  SimilarityScorer* scorer = opts.scorer;
  if (scorer == nullptr) {
    fallback = make_scorer(ScorerConfig{});
    scorer = fallback.get();
  }
  if (log.manifest.revise) {
    std::vector<const PipelineResult*> flagged;
    std::vector<std::string> labels;
    for (const auto& r : log.results) {
      if (r.detection.verdict && detection_complete(r)) flagged.push_back(&r);
      if (r.record.gold_reason_category && !r.record.gold_reason_category->empty()) {
        labels.push_back(*r.record.gold_reason_category);
      }
    }
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    if (!flagged.empty() && !opts.judge) {
      throw HarnessError(HarnessErrc::MissingJudgeBackend,
                         "missing_judge_backend: run has revisions to judge but no judge "
                         "backend is configured");
    }
    std::mutex mu;
    parallel_for(flagged.size(), opts.concurrency, nullptr, [&](std::size_t i) {
      const auto& r = *flagged[i];
      const auto& original = r.record.fields.at(answer_slot(r.record.kind));
      bool before = judge(r.record, original, *opts.judge, templates, opts.judge_options);
      std::optional<bool> after;
      std::optional<double> sim;
      std::optional<bool> category;
      if (r.revision) {
        after = judge(r.record, r.revision->revised_text, *opts.judge, templates,
                      opts.judge_options);
        if (r.record.kind == TaskKind::MathWordProblem) {
          const auto predicted = extract_reason_category(r.detection.analysis_text, labels);
          category = !predicted.empty() && r.record.gold_reason_category &&
                     predicted == *r.record.gold_reason_category;
        } else if (r.record.gold_reference && !r.record.gold_reference->empty()) {
          sim = similarity(r.revision->revised_text, *r.record.gold_reference, *scorer);
        }
      }
      std::lock_guard lock(mu);
      inputs.judge_before[r.record_id] = before;
      if (after) inputs.judge_after[r.record_id] = *after;
      if (sim) inputs.similarity[r.record_id] = *sim;
      if (category) inputs.mwp_category_match[r.record_id] = *category;
    });
  }

  auto build = [&](const std::string& task, const std::vector<PipelineResult>& subset) {
    TaskReport t;
    t.task = task;
    t.strategy = report.strategy;
    std::vector<bool> preds;
    std::vector<bool> golds;
    for (const auto& r : subset) {
      if (r.error) ++t.errors;
      if (!detection_complete(r)) continue;
      preds.push_back(r.detection.verdict);
      golds.push_back(r.record.gold_hallucinated);
    }
    t.n = static_cast<std::int64_t>(preds.size());
    if (!preds.empty()) {
      t.counts = confusion(preds, golds);
      t.scores = f1_accuracy(t.counts);
    }
    if (log.manifest.revise) {
      std::vector<PipelineResult> scored;
      for (const auto& r : subset) {
        if (detection_complete(r)) scored.push_back(r);
      }
      try {
        t.revision = revision_eval(scored, inputs);
        t.revision_status = "ok";
      } catch (const MetricsError& e) {
        t.revision_status = std::string(to_string(e.code()));
      }
    }
    return t;
  };

  for (auto kind : kAllTaskKinds) {
    std::vector<PipelineResult> subset;
    for (const auto& r : log.results) {
      if (r.record.kind == kind) subset.push_back(r);
    }
    if (!subset.empty()) report.tasks.push_back(build(std::string(short_label(kind)), subset));
  }
  report.overall = build("Overall", log.results);

  report.metadata = Json{
      {"judge_prompt", "direct_ask"},
      {"judge_context", "full_task_context"},
      {"judge_backend", opts.judge ? Json(opts.judge->id()) : Json(nullptr)},
      {"scorer", scorer->id()},
      {"threshold", opts.threshold},
      {"q_denominator", std::string(to_string(opts.denominator))},
  };
  return report;
}

namespace {

Json task_json(const TaskReport& t) {
  Json j{{"task", t.task},
         {"strategy", t.strategy},
         {"n", t.n},
         {"errors", t.errors},
         {"tp", t.counts.tp},
         {"fp", t.counts.fp},
         {"tn", t.counts.tn},
         {"fn", t.counts.fn},
         {"f1", t.scores.f1},
         {"acc", t.scores.accuracy},
         {"f1_pct", pct(t.scores.f1)},
         {"acc_pct", pct(t.scores.accuracy)},
         {"revision_status", t.revision_status},
         {"mcnemar", nullptr}};
  if (t.revision) {
    const auto& r = *t.revision;
    j["h_before"] = r.h_before;
    j["h_after"] = r.h_after;
    j["R"] = r.reduction_rate;
    j["R_pct"] = pct(r.reduction_rate);
    j["dominance_violated"] = r.dominance_violated;
    j["detected_before"] = r.detected_before;
    j["accepted"] = r.accepted;
    j["Q"] = r.success_rate;
    j["Q_pct"] = pct(r.success_rate);
    j["q_denominator"] = std::string(to_string(r.denominator));
  } else {
    for (const char* key : {"h_before", "h_after", "R", "R_pct", "dominance_violated",
                            "detected_before", "accepted", "Q", "Q_pct", "q_denominator"}) {
      j[key] = nullptr;
    }
  }
  return j;
}

std::string cell(const std::optional<double>& v) {
  if (!v) return "-";
  std::ostringstream s;
  s << std::fixed << std::setprecision(1) << pct(*v) << '%';
  return s.str();
}

}  // namespace

Json report_json(const EvalReport& report) {
  Json tasks = Json::array();
  for (const auto& t : report.tasks) tasks.push_back(task_json(t));
  return Json{{"run_id", report.run_id},
              {"strategy", report.strategy},
              {"tasks", tasks},
              {"overall", task_json(report.overall)},
              {"metadata", report.metadata}};
}

std::string render_table(const EvalReport& report) {
  std::vector<const TaskReport*> columns;
  for (const auto& t : report.tasks) columns.push_back(&t);
  columns.push_back(&report.overall);

  auto table = [&](const char* title, const char* first, const char* second,
                   auto first_value, auto second_value) {
    std::ostringstream s;
    s << title << '\n';
    s << std::left << std::setw(20) << "Method";
    for (const auto* t : columns) {
      s << std::right << std::setw(12) << (t->task + " " + first) << std::setw(12)
        << (t->task + " " + second);
    }
    s << '\n' << std::left << std::setw(20) << report.strategy;
    for (const auto* t : columns) {
      s << std::right << std::setw(12) << cell(first_value(*t)) << std::setw(12)
        << cell(second_value(*t));
    }
    s << '\n';
    return s.str();
  };

  std::string out = table(
      "Detection", "F1", "Acc",
      [](const TaskReport& t) -> std::optional<double> {
        return t.n > 0 ? std::optional(t.scores.f1) : std::nullopt;
      },
      [](const TaskReport& t) -> std::optional<double> {
        return t.n > 0 ? std::optional(t.scores.accuracy) : std::nullopt;
      });
  bool any_revision = report.overall.revision_status != "absent";
  if (any_revision) {
    out += '\n';
    out += table(
        "Revision", "R", "Q",
        [](const TaskReport& t) -> std::optional<double> {
          return t.revision ? std::optional(t.revision->reduction_rate) : std::nullopt;
        },
        [](const TaskReport& t) -> std::optional<double> {
          return t.revision ? std::optional(t.revision->success_rate) : std::nullopt;
        });
    for (const auto* t : columns) {
      if (t->revision_status != "ok") {
        out += t->task + ": revision metrics " + t->revision_status + "\n";
      }
    }
  }
  return out;
}

Comparison compare(const RunLog& a, const RunLog& b) {
  std::map<std::string, const PipelineResult*> by_id;
  for (const auto& r : a.results) by_id[r.record_id] = &r;
  if (by_id.size() != a.results.size() || a.results.size() != b.results.size()) {
    throw HarnessError(HarnessErrc::IdSetMismatch,
                       "id_set_mismatch: logs cover different record sets");
  }
  Comparison c;
  std::int64_t n01 = 0;
  std::int64_t n10 = 0;
  std::set<std::string> seen;
  for (const auto& rb : b.results) {
    auto it = by_id.find(rb.record_id);
    if (it == by_id.end() || !seen.insert(rb.record_id).second) {
      throw HarnessError(HarnessErrc::IdSetMismatch,
                         "id_set_mismatch: '" + rb.record_id + "' is not in both logs");
    }
    const auto& ra = *it->second;
    if (ra.record.gold_hallucinated != rb.record.gold_hallucinated) {
      throw HarnessError(HarnessErrc::IdSetMismatch,
                         "id_set_mismatch: gold labels differ for '" + rb.record_id + "'");
    }
    const bool a_right = ra.detection.verdict == ra.record.gold_hallucinated;
    const bool b_right = rb.detection.verdict == rb.record.gold_hallucinated;
    if (a_right && b_right) ++c.both_right;
    if (!a_right && !b_right) ++c.both_wrong;
    if (!a_right && b_right) ++n01;
    if (a_right && !b_right) ++n10;
  }
  c.mcnemar = mcnemar(n01, n10, static_cast<std::int64_t>(b.results.size()));
  return c;
}

Json comparison_json(const Comparison& c) {
  const auto& m = c.mcnemar;
  return Json{{"n", m.n},
              {"n01", m.n01},
              {"n10", m.n10},
              {"both_right", c.both_right},
              {"both_wrong", c.both_wrong},
              {"chi2", m.chi2},
              {"p", m.p}};
}

}  // namespace hallucheck

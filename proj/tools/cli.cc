#include "cli.h"

#include <atomic>
#include <csignal>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "hallucheck/datasets.h"
#include "hallucheck/harness.h"
#include "hallucheck/log.h"

namespace hallucheck::cli {
namespace {

std::atomic<bool> g_cancel{false};

extern "C" void on_sigint(int) { g_cancel.store(true); }

struct Failure {
  int exit_code = kConfigError;
  std::string kind;
  std::string message;
};

std::string_view to_string(PromptErrc code) {
  switch (code) {
    case PromptErrc::MissingContext: return "missing_context";
    case PromptErrc::UnknownTemplate: return "unknown_template";
    case PromptErrc::InvalidStep: return "invalid_step";
    case PromptErrc::Io: return "io_error";
    case PromptErrc::Manifest: return "manifest_error";
  }
  return "?";
}

template <typename Code>
Failure coded(const CodedError<Code>& e, int exit_code) {
  return {exit_code, std::string(to_string(e.code())), e.what()};
}


Failure classify(std::exception_ptr ep) {
  try {
    std::rethrow_exception(ep);
  } catch (const HarnessError& e) {
    const bool io = e.code() == HarnessErrc::Io || e.code() == HarnessErrc::LogFormat;
    return coded(e, io ? kIoError : kConfigError);
  } catch (const BackendError& e) {
    const bool config =
        e.code() == BackendErrc::Config || e.code() == BackendErrc::InvalidRequest;
    return coded(e, config ? kConfigError : kBackendFatal);
  } catch (const DatasetError& e) {
    const bool io = e.code() == DatasetErrc::Io || e.code() == DatasetErrc::Parse;
    return coded(e, io ? kIoError : kConfigError);
  } catch (const PromptError& e) {
    return coded(e, e.code() == PromptErrc::Io ? kIoError : kConfigError);
  } catch (const MetricsError& e) {
    return coded(e, e.code() == MetricsErrc::ScorerUnavailable ? kBackendFatal
                                                                : kConfigError);
  } catch (const StageError& e) {
    return {kBackendFatal, e.cause(), e.what()};
  } catch (const ContractError& e) {
    return {kConfigError, std::string(to_string(e.code())), e.what()};
  } catch (const Json::exception& e) {
    return {kConfigError, "invalid_json", e.what()};
  } catch (const std::filesystem::filesystem_error& e) {
    return {kIoError, "io_error", e.what()};
  } catch (const std::exception& e) {
    return {kConfigError, "error", e.what()};
  }
}

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::filesystem::path& p) {
  if (p.empty() || p.is_absolute()) return p;
  return base / p;
}

HarnessError config_error(const std::string& what) {
  return HarnessError(HarnessErrc::Config, what);
}

StrategyId strategy_from(const std::string& name) {
  auto s = parse_strategy(name);
  if (!s) {
    throw config_error("unknown strategy '" + name + "'; expected one of " +
                       strategy_names());
  }
  return *s;
}

template <typename T, typename Parse>
T enum_from(const std::string& what, const std::string& name, Parse parse,
            const std::string& choices) {
  auto v = parse(name);
  if (!v) throw config_error("unknown " + what + " '" + name + "'; expected one of " + choices);
  return *v;
}

struct Common {
  std::string config_path;
  std::string output = "text";
  bool quiet = false;

  bool json() const { return output == "json"; }
};

Config effective_config(const Common& common) {
  if (!common.config_path.empty()) return load_config(common.config_path);
  if (std::filesystem::exists("hallucheck.json")) return load_config("hallucheck.json");
  return Config{};
}

TemplateRegistry templates_for(const Config& cfg) {
  return cfg.templates.empty() ? TemplateRegistry::load_default()
                               : TemplateRegistry::load(cfg.templates);
}

AdapterRegistry adapters_for(const Config& cfg) {
  if (!cfg.adapters.empty()) return AdapterRegistry::load(cfg.adapters);
  const auto builtin = AdapterRegistry::default_manifest_path();
  return std::filesystem::exists(builtin) ? AdapterRegistry::load(builtin)
                                          : AdapterRegistry{};
}

std::string configured_backends(const Config& cfg) {
  std::string names;
  for (const auto& [id, _] : cfg.backends) names += (names.empty() ? "" : "|") + id;
  return names.empty() ? "(none configured)" : names;
}

const BackendConfig& backend_config(const Config& cfg, const std::string& id) {
  auto it = cfg.backends.find(id);
  if (it == cfg.backends.end()) {
    throw config_error("unknown backend '" + id + "'; expected one of " +
                       configured_backends(cfg));
  }
  return it->second;
}

BackendPtr build_backend(const Config& cfg, const std::string& id) {
  const auto& bc = backend_config(cfg, id);
  auto backend = make_backend(bc);
  if (bc.type == "http" && !cfg.cache_dir.empty()) backend = with_cache(backend, cfg.cache_dir);
  return backend;
}

void emit_error(const Common& common, const Failure& f, std::ostream& out,
                std::ostream& err) {
  if (common.json()) {
    out << Json{{"error", {{"class", f.kind}, {"message", f.message}}},
                {"exit_code", f.exit_code}}
               .dump(2)
        << '\n';
  } else {
    err << "error: " << f.message << '\n';
  }
}

struct RunArgs {
  std::string dataset;
  std::string adapter = "canonical";
  std::string strategy;
  std::string backend;
  std::string judge_backend;
  bool revise = false;
  std::string knowledge = "vanilla";
  std::optional<std::size_t> sample_pos;
  std::optional<std::size_t> sample_neg;
  std::optional<std::uint64_t> seed;
  std::string run_id;
  std::string workdir;
  std::optional<int> concurrency;
  std::string record_out;  // record-fixtures only
};

void add_run_options(CLI::App* sub, RunArgs& a) {
  sub->add_option("--dataset", a.dataset, "Dataset file")->required();
  sub->add_option("--adapter", a.adapter, "Dataset adapter name");
  sub->add_option("--strategy", a.strategy, "Detection strategy: " + strategy_names());
  sub->add_option("--backend", a.backend, "Backend id from the config")->required();
  sub->add_option("--judge-backend", a.judge_backend, "Judge backend id for revision eval");
  sub->add_flag("--revise", a.revise, "Revise flagged outputs");
  sub->add_option("--knowledge", a.knowledge, "vanilla|retrieval_augmented");
  sub->add_option("--sample-pos", a.sample_pos, "Hallucinated records to sample");
  sub->add_option("--sample-neg", a.sample_neg, "Faithful records to sample");
  sub->add_option("--seed", a.seed, "Sampling seed (required when sampling)");
  sub->add_option("--run-id", a.run_id, "Run identifier; names the log file");
  sub->add_option("--workdir", a.workdir, "Directory for run logs");
  sub->add_option("--concurrency", a.concurrency, "Records processed in parallel");
}

int do_run(const Common& common, const RunArgs& a, bool recording, std::ostream& out,
           std::ostream& err) {
  const Config cfg = effective_config(common);
  RunManifest m;
  m.dataset = a.dataset;
  m.adapter = a.adapter;
  m.strategy = a.strategy.empty() ? cfg.default_strategy : strategy_from(a.strategy);
  m.backend_id = a.backend;
  m.judge_backend_id = a.judge_backend;
  m.scorer = cfg.scorer.kind;
  m.revise = a.revise;
  m.knowledge_mode = enum_from<KnowledgeMode>("knowledge mode", a.knowledge,
                                              parse_knowledge_mode,
                                              "vanilla|retrieval_augmented");
  if (a.sample_pos || a.sample_neg) {
    if (!a.seed) throw config_error("sampling requires --seed");
    m.sample = SampleSpec{a.sample_pos.value_or(0), a.sample_neg.value_or(0), *a.seed};
  }
  m.run_id = a.run_id.empty()
                 ? std::string(to_string(m.strategy)) + "-" +
                       std::filesystem::path(a.dataset).stem().string()
                 : a.run_id;
  if (m.revise && !has_analysis(m.strategy)) {
    throw config_error("strategy " + std::string(to_string(m.strategy)) +
                       " produces no analysis; --revise is unsupported");
  }
  if (!m.judge_backend_id.empty()) backend_config(cfg, m.judge_backend_id);

  const auto templates = templates_for(cfg);
  const auto adapters = adapters_for(cfg);
  RunEnvironment env;
  env.templates = &templates;
  env.adapters = &adapters;
  env.backend_configs = cfg.backends;
  auto backend = build_backend(cfg, m.backend_id);
  if (recording) {
    if (a.record_out.empty()) throw config_error("record-fixtures requires --out");
    backend = std::make_shared<RecordingBackend>(backend, a.record_out);
  }
  env.backends[m.backend_id] = backend;
  if (!m.judge_backend_id.empty() && m.judge_backend_id != m.backend_id) {
    // Placeholder entry: the judge is only called at evaluation time.
    env.backends[m.judge_backend_id] = nullptr;
  }
  env.workdir = a.workdir.empty() ? cfg.workdir : std::filesystem::path(a.workdir);
  env.concurrency = a.concurrency.value_or(cfg.concurrency);
  env.cancel = &g_cancel;

  const auto log_path = execute_run(m, env);
  const auto log = read_run_log(log_path);
  std::size_t errors = 0;
  bool fatal = false;
  for (const auto& r : log.results) {
    if (!r.error) continue;
    ++errors;
    fatal |= r.error->code == to_string(BackendErrc::AuthError);
  }
  fatal |= !log.results.empty() && errors == log.results.size();
  const bool cancelled = g_cancel.load();

  if (common.json()) {
    Json j{{"log", log_path.string()},
           {"run_id", m.run_id},
           {"records", log.results.size()},
           {"errors", errors},
           {"cancelled", cancelled}};
    if (recording) j["fixtures"] = a.record_out;
    out << j.dump(2) << '\n';
  } else {
    out << "wrote " << log_path.string() << " (" << log.results.size() << " records, "
        << errors << " errors" << (cancelled ? ", cancelled" : "") << ")\n";
    if (recording) out << "fixtures appended to " << a.record_out << '\n';
  }
  if (fatal) {
    err << "error: backend failures on " << errors << " of " << log.results.size()
        << " records; see the run log\n";
    return kBackendFatal;
  }
  return kOk;
}

struct EvalArgs {
  std::string log;
  std::string judge_backend;
  std::string scorer;
  std::optional<double> threshold;
  std::string q_denominator;
  std::string report_out;
};

int do_eval(const Common& common, const EvalArgs& a, std::ostream& out) {
  const Config cfg = effective_config(common);
  const auto log = read_run_log(a.log);
  const auto templates = templates_for(cfg);

  EvalOptions opts;
  opts.threshold = a.threshold.value_or(cfg.threshold);
  opts.denominator = a.q_denominator.empty()
                         ? cfg.q_denominator
                         : enum_from<QDenominator>("q denominator", a.q_denominator,
                                                   parse_q_denominator,
                                                   "judge_confirmed|detector_flagged");
  opts.concurrency = cfg.concurrency;
  ScorerConfig scorer_cfg = cfg.scorer;
  if (!a.scorer.empty()) {
    scorer_cfg.kind = enum_from<ScorerKind>("scorer", a.scorer, parse_scorer_kind,
                                            "fallback|embedding|remote");
  }
  std::unique_ptr<SimilarityScorer> scorer;
  if (log.manifest.revise) {
    const auto judge_id =
        a.judge_backend.empty() ? log.manifest.judge_backend_id : a.judge_backend;
    if (!judge_id.empty()) {
      opts.judge = build_backend(cfg, judge_id);
      opts.judge_options = pipeline_options_for(backend_config(cfg, judge_id));
    }
    scorer = make_scorer(scorer_cfg);
    opts.scorer = scorer.get();
  }
  const auto report = evaluate(log, templates, opts);
  const auto j = report_json(report);
  if (!a.report_out.empty()) {
    std::ofstream f(a.report_out, std::ios::binary | std::ios::trunc);
    if (!f) throw HarnessError(HarnessErrc::Io, "cannot write " + a.report_out);
    f << j.dump(2) << '\n';
  }
  if (common.json()) {
    out << j.dump(2) << '\n';
  } else {
    out << render_table(report);
  }
  return kOk;
}

int do_compare(const Common& common, const std::string& a, const std::string& b,
               std::ostream& out) {
  const auto c = compare(read_run_log(a), read_run_log(b));
  if (common.json()) {
    auto j = comparison_json(c);
    j["a"] = a;
    j["b"] = b;
    out << j.dump(2) << '\n';
    return kOk;
  }
  const auto& m = c.mcnemar;
  std::ostringstream p;
  p << std::setprecision(4) << m.p;
  out << "paired records: " << m.n << '\n'
      << "A wrong, B right (n01): " << m.n01 << '\n'
      << "A right, B wrong (n10): " << m.n10 << '\n'
      << "both right: " << c.both_right << ", both wrong: " << c.both_wrong << '\n'
      << "chi2: " << std::fixed << std::setprecision(4) << m.chi2 << '\n'
      << "p-value: " << p.str() << '\n';
  return kOk;
}

struct SampleArgs {
  std::string dataset;
  std::string adapter = "canonical";
  std::size_t pos = 0;
  std::size_t neg = 0;
  std::uint64_t seed = 0;
  std::string out;
};

int do_sample(const Common& common, const SampleArgs& a, std::ostream& out) {
  const Config cfg = effective_config(common);
  const auto adapters = adapters_for(cfg);
  const auto loaded = load(a.dataset, adapters.get(a.adapter));
  const auto sample = balanced_sample(loaded.records, a.pos, a.neg, a.seed);
  write_jsonl(sample, a.out);
  if (!loaded.rejects.empty()) {
    log_warning(std::to_string(loaded.rejects.size()) + " rows rejected while loading " +
                a.dataset);
  }
  if (common.json()) {
    Json ids = Json::array();
    for (const auto& r : sample) ids.push_back(r.id);
    out << Json{{"out", a.out},
                {"records", sample.size()},
                {"rejects", loaded.rejects.size()},
                {"seed", a.seed},
                {"ids", ids}}
               .dump(2)
        << '\n';
  } else {
    out << "wrote " << sample.size() << " records to " << a.out << '\n';
  }
  return kOk;
}

struct RenderArgs {
  std::string strategy = "halluclean";
  std::string kind;
  std::string stage;
  int step = 0;
  bool routing = false;
  std::string record;
  std::string id;
  std::optional<std::string> plan_text;
  std::optional<std::string> analysis_text;
  std::optional<std::string> prior_output;
  bool knowledge = false;
};

ExampleRecord pick_record(const std::string& path, const std::string& id) {
  std::ifstream in(path);
  if (!in) throw HarnessError(HarnessErrc::Io, "cannot read " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto r = record_from_jsonl_line(line);
    if (id.empty() || r.id == id) return r;
  }
  throw config_error(id.empty() ? path + " holds no records"
                                : "no record '" + id + "' in " + path);
}

int do_render(const Common& common, const RenderArgs& a, std::ostream& out) {
  const Config cfg = effective_config(common);
  const auto templates = templates_for(cfg);
  std::string prompt;
  if (a.routing) {
    if (a.kind.empty()) throw config_error("--routing requires --kind");
    auto kind = enum_from<TaskKind>("task kind", a.kind, parse_task_kind,
                                    "question_answering|dialogue|summarization|"
                                    "math_word_problem|self_contradiction");
    prompt = templates.render_routing(kind);
  } else {
    if (a.record.empty()) throw config_error("--record is required");
    const auto record = pick_record(a.record, a.id);
    const auto strategy = strategy_from(a.strategy);
    if (strategy == StrategyId::HalluClean || a.stage == "revise") {
      if (a.stage.empty()) throw config_error("--stage is required for halluclean");
      auto stage = enum_from<StageId>("stage", a.stage, parse_stage,
                                      "plan|reason|judge|revise");
      RenderContext ctx{record, a.plan_text, a.analysis_text, a.knowledge};
      prompt = templates.render_stage({StrategyId::HalluClean, record.kind, stage}, ctx);
    } else {
      prompt = templates.render_baseline(strategy, record, a.step, a.knowledge,
                                         a.prior_output);
    }
  }
  if (common.json()) {
    out << Json{{"prompt", prompt}}.dump(2) << '\n';
  } else {
    out << prompt << '\n';
  }
  return kOk;
}

int do_cache(const Common& common, bool clear, const std::string& dir_override,
             std::ostream& out) {
  const Config cfg = effective_config(common);
  const std::filesystem::path dir =
      dir_override.empty() ? cfg.cache_dir : std::filesystem::path(dir_override);
  if (dir.empty()) throw config_error("no cache_dir configured; pass --cache-dir");
  if (clear) {
    const auto removed = cache_clear(dir);
    if (common.json()) {
      out << Json{{"cache_dir", dir.string()}, {"removed", removed}}.dump(2) << '\n';
    } else {
      out << "removed " << removed << " entries from " << dir.string() << '\n';
    }
    return kOk;
  }
  const auto s = cache_stats(dir);
  if (common.json()) {
    out << Json{{"cache_dir", dir.string()}, {"entries", s.entries}, {"bytes", s.bytes}}
               .dump(2)
        << '\n';
  } else {
    out << dir.string() << ": " << s.entries << " entries, " << s.bytes << " bytes\n";
  }
  return kOk;
}

}  // namespace

Config parse_config(const Json& j, const std::filesystem::path& base_dir) {
  static const std::set<std::string> known = {
      "backends", "default_strategy", "cache_dir", "scorer", "concurrency",
      "threshold", "q_denominator", "templates", "adapters", "workdir"};
  if (!j.is_object()) throw config_error("config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (known.count(key) == 0) throw config_error("unknown config key '" + key + "'");
  }
  Config c;
  if (auto it = j.find("backends"); it != j.end()) {
    for (const auto& [id, body] : it->items()) {
      auto bc = body.get<BackendConfig>();
      if (bc.backend_id.empty()) bc.backend_id = id;
      if (bc.backend_id != id) {
        throw config_error("backend '" + id + "' declares backend_id '" + bc.backend_id + "'");
      }
      bc.fixtures = resolve(base_dir, bc.fixtures).string();
      validate_config(bc);
      c.backends[id] = bc;
    }
  }
  if (auto it = j.find("default_strategy"); it != j.end()) {
    c.default_strategy = strategy_from(it->get<std::string>());
  }
  if (auto it = j.find("cache_dir"); it != j.end()) {
    c.cache_dir = resolve(base_dir, it->get<std::string>());
  }
  if (auto it = j.find("scorer"); it != j.end()) c.scorer = it->get<ScorerConfig>();
  c.concurrency = j.value("concurrency", c.concurrency);
  if (c.concurrency < 1) throw config_error("concurrency must be >= 1");
  c.threshold = j.value("threshold", c.threshold);
  if (!(c.threshold > 0.0 && c.threshold < 1.0)) {
    throw config_error("threshold must lie in (0, 1)");
  }
  if (auto it = j.find("q_denominator"); it != j.end()) {
    c.q_denominator = enum_from<QDenominator>("q denominator", it->get<std::string>(),
                                              parse_q_denominator,
                                              "judge_confirmed|detector_flagged");
  }
  if (auto it = j.find("templates"); it != j.end()) {
    c.templates = resolve(base_dir, it->get<std::string>());
  }
  if (auto it = j.find("adapters"); it != j.end()) {
    c.adapters = resolve(base_dir, it->get<std::string>());
  }
  if (auto it = j.find("workdir"); it != j.end()) {
    c.workdir = resolve(base_dir, it->get<std::string>());
  }
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw HarnessError(HarnessErrc::Io, "cannot read config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw config_error(path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path().empty() ? "." : path.parent_path());
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hallucination detection and revision experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--config", common.config_path, "JSON config file");
  app.add_option("--output", common.output, "text|json")
      ->check(CLI::IsMember({"text", "json"}));
  app.add_flag("--quiet", common.quiet, "Suppress warnings");

  RunArgs run_args;
  auto* run_cmd = app.add_subcommand("run", "Run a strategy over a dataset");
  add_run_options(run_cmd, run_args);

  RunArgs rec_args;
  auto* rec_cmd = app.add_subcommand(
      "record-fixtures", "Run against a live backend and append replay fixtures");
  add_run_options(rec_cmd, rec_args);
  rec_cmd->add_option("--out", rec_args.record_out, "Fixture JSONL to append to")
      ->required();

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Score a run log");
  eval_cmd->add_option("log", eval_args.log, "Run log")->required();
  eval_cmd->add_option("--judge-backend", eval_args.judge_backend, "Judge backend id");
  eval_cmd->add_option("--scorer", eval_args.scorer, "fallback|embedding|remote");
  eval_cmd->add_option("--threshold", eval_args.threshold, "Similarity acceptance threshold");
  eval_cmd->add_option("--q-denominator", eval_args.q_denominator,
                       "judge_confirmed|detector_flagged");
  eval_cmd->add_option("--report-out", eval_args.report_out, "Also write report JSON here");

  std::string log_a, log_b;
  auto* cmp_cmd = app.add_subcommand("compare", "McNemar test between two runs");
  cmp_cmd->add_option("log_a", log_a, "Run log A")->required();
  cmp_cmd->add_option("log_b", log_b, "Run log B")->required();

  SampleArgs sample_args;
  auto* sample_cmd = app.add_subcommand("sample", "Draw a balanced, seeded sample");
  sample_cmd->add_option("--dataset", sample_args.dataset, "Dataset file")->required();
  sample_cmd->add_option("--adapter", sample_args.adapter, "Dataset adapter name");
  sample_cmd->add_option("--pos", sample_args.pos, "Hallucinated records")->required();
  sample_cmd->add_option("--neg", sample_args.neg, "Faithful records")->required();
  sample_cmd->add_option("--seed", sample_args.seed, "Sampling seed")->required();
  sample_cmd->add_option("--out", sample_args.out, "Output JSONL")->required();

  RenderArgs render_args;
  auto* render_cmd = app.add_subcommand("render-prompt", "Print a rendered prompt");
  render_cmd->add_option("--strategy", render_args.strategy, strategy_names());
  render_cmd->add_option("--kind", render_args.kind, "Task kind (with --routing)");
  render_cmd->add_option("--stage", render_args.stage, "plan|reason|judge|revise");
  render_cmd->add_option("--step", render_args.step, "Baseline step index");
  render_cmd->add_flag("--routing", render_args.routing, "Print the routing sentence");
  render_cmd->add_option("--record", render_args.record, "Canonical JSONL file");
  render_cmd->add_option("--id", render_args.id, "Record id (default: first)");
  render_cmd->add_option("--plan-text", render_args.plan_text, "Plan stage output");
  render_cmd->add_option("--analysis-text", render_args.analysis_text,
                         "Reason stage output");
  render_cmd->add_option("--prior-output", render_args.prior_output,
                         "Previous baseline step output");
  render_cmd->add_flag("--knowledge", render_args.knowledge, "Include knowledge");

  std::string cache_dir;
  auto* cache_cmd = app.add_subcommand("cache", "Inspect the response cache");
  cache_cmd->require_subcommand(1);
  cache_cmd->add_option("--cache-dir", cache_dir, "Cache directory");
  auto* cache_stats_cmd = cache_cmd->add_subcommand("stats", "Entry count and size");
  auto* cache_clear_cmd = cache_cmd->add_subcommand("clear", "Delete cached responses");
  cache_stats_cmd->fallthrough();
  cache_clear_cmd->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    if (auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front()) {
      err << "run '" << sub->get_name() << " --help' for usage\n";
    }
    return kConfigError;
  }
  set_quiet(common.quiet);

  g_cancel.store(false);
  auto previous = std::signal(SIGINT, on_sigint);
  int code = kOk;
  try {
    if (run_cmd->parsed()) {
      code = do_run(common, run_args, false, out, err);
    } else if (rec_cmd->parsed()) {
      code = do_run(common, rec_args, true, out, err);
    } else if (eval_cmd->parsed()) {
      code = do_eval(common, eval_args, out);
    } else if (cmp_cmd->parsed()) {
      code = do_compare(common, log_a, log_b, out);
    } else if (sample_cmd->parsed()) {
      code = do_sample(common, sample_args, out);
    } else if (render_cmd->parsed()) {
      code = do_render(common, render_args, out);
    } else if (cache_cmd->parsed()) {
      code = do_cache(common, cache_clear_cmd->parsed(), cache_dir, out);
    }
  } catch (...) {
    const auto f = classify(std::current_exception());
    emit_error(common, f, out, err);
    code = f.exit_code;
  }
  std::signal(SIGINT, previous);
  return code;
}

}  // namespace hallucheck::cli

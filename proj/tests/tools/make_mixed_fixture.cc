// Usage: make_mixed_fixture <out.jsonl>
// Records every request the mixed-sample runs and their evaluation issue.

#include <iostream>

#include "hallucheck/harness.h"
#include "test_support.h"

using namespace hallucheck;

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_mixed_fixture <out.jsonl>\n";
    return 1;
  }
  const std::filesystem::path out = argv[1];
  std::filesystem::remove(out);
  const auto model = testing::mixed_model();
  auto scripted = std::make_shared<testing::ScriptedBackend>("replay", model.responder());
  auto recorder = std::make_shared<RecordingBackend>(scripted, out);

  const auto templates = TemplateRegistry::load_default();
  const AdapterRegistry adapters;
  testing::TempDir work;
  BackendConfig cfg;
  cfg.backend_id = "replay";
  cfg.type = "replay";
  cfg.model = "fixture-model";
  cfg.temperature = 0.0;
  cfg.fixtures = out.string();

  RunEnvironment env;
  env.templates = &templates;
  env.adapters = &adapters;
  env.backend_configs["replay"] = cfg;
  env.backends["replay"] = recorder;
  env.workdir = work.path();
  env.concurrency = 1;

  for (auto strategy : {StrategyId::HalluClean, StrategyId::DirectAsk}) {
    RunManifest m;
    m.run_id = std::string(to_string(strategy));
    m.dataset = testing::data_path("data/samples/mixed.jsonl").string();
    m.strategy = strategy;
    m.backend_id = "replay";
    m.revise = strategy == StrategyId::HalluClean;
    if (m.revise) m.judge_backend_id = "replay";
    const auto log = read_run_log(execute_run(m, env));
    if (m.revise) {
      EvalOptions opts;
      opts.judge = recorder;
      opts.judge_options = pipeline_options_for(cfg);
      opts.concurrency = 1;
      evaluate(log, templates, opts);
    }
  }
  std::cout << "wrote " << out.string() << '\n';
  return 0;
}

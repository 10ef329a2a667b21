#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>

#include "hallucheck/backend.h"
#include "hallucheck/metrics.h"
#include "hallucheck/prompts.h"

namespace hallucheck::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 1,
  kIoError = 2,
  kBackendFatal = 3,
};

// Relative paths are resolved against the directory of the config file.
struct Config {
  std::map<std::string, BackendConfig> backends;
  StrategyId default_strategy = StrategyId::HalluClean;
  std::filesystem::path cache_dir;  // empty disables the response cache
  ScorerConfig scorer;
  int concurrency = 4;
  double threshold = 0.85;
  QDenominator q_denominator = QDenominator::JudgeConfirmed;
  std::filesystem::path templates;  // template manifest; built-in when empty
  std::filesystem::path adapters;   // adapter manifest; built-in when empty
  std::filesystem::path workdir = "runs";
};

Config parse_config(const Json& j, const std::filesystem::path& base_dir);
Config load_config(const std::filesystem::path& path);

int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace hallucheck::cli

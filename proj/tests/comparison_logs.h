#pragma once

#include <filesystem>
#include <string>

#include "hallucheck/harness.h"
#include "test_support.h"

namespace hallucheck::testing {

// Two run logs over `n` shared ids with exactly `n01` records where A is
// wrong and B right, and `n10` where A is right and B wrong. The rest agree,
// mixing both-right and both-wrong.
inline void write_comparison_logs(const std::filesystem::path& a, const std::filesystem::path& b,
                                  int n01, int n10, int n) {
  const auto header = Json{{"manifest", RunManifest{}}, {"backend", BackendConfig{}}}.dump();
  std::string la = header + "\n", lb = header + "\n";
  for (int i = 0; i < n; ++i) {
    PipelineResult r;
    r.record_id = "id" + std::to_string(i);
    r.record.id = r.record_id;
    r.record.fields = {{"question", "q"}, {"answer", "a"}};
    r.record.gold_hallucinated = i % 2 == 0;
    const bool agree_wrong = i >= n01 + n10 && i % 7 == 0;
    const bool a_right = i >= n01 && !agree_wrong;
    const bool b_right = i < n01 || (i >= n01 + n10 && !agree_wrong);
    r.detection.verdict = a_right == r.record.gold_hallucinated;
    la += Json(r).dump() + "\n";
    r.detection.verdict = b_right == r.record.gold_hallucinated;
    lb += Json(r).dump() + "\n";
  }
  write_file(a, la);
  write_file(b, lb);
}

}  // namespace hallucheck::testing

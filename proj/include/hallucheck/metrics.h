#pragma once

// Detection metrics, revision metrics, McNemar's test and the similarity
// scorers behind the revision-acceptance gate.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hallucheck/core.h"
#include "hallucheck/pipeline.h"

namespace hallucheck {

enum class MetricsErrc {
  LengthMismatch,
  EmptyInput,
  NoDiscordantPairs,
  DivisionUndefined,
  ScorerUnavailable,
  EmptyText,
  InvalidArgument,
};

std::string_view to_string(MetricsErrc code);
using MetricsError = CodedError<MetricsErrc>;

// Positive class = hallucinated.
struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;
  std::int64_t fn = 0;

  std::int64_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

ConfusionCounts confusion(const std::vector<bool>& predictions,
                          const std::vector<bool>& golds);

struct DetectionScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
};

// Zero denominators define the affected term as 0.
DetectionScores f1_accuracy(const ConfusionCounts& c);

struct McNemarResult {
  std::int64_t n = 0;
  std::int64_t n01 = 0;  // A wrong, B right
  std::int64_t n10 = 0;  // A right, B wrong
  double chi2 = 0.0;
  double p = 1.0;
};

// Continuity-corrected: chi2 = max(|n01 - n10| - 1, 0)^2 / (n01 + n10),
// p = erfc(sqrt(chi2 / 2)) (chi-square survival function, 1 dof).
// `n` is the number of paired instances, recorded for reporting only.
McNemarResult mcnemar(std::int64_t n01, std::int64_t n10, std::int64_t n = 0);

double chi2_survival_1dof(double chi2);

// --- similarity -------------------------------------------------------------

enum class ScorerKind { Fallback, Embedding, Remote };

std::string_view to_string(ScorerKind kind);
std::optional<ScorerKind> parse_scorer_kind(std::string_view name);

struct ScorerConfig {
  ScorerKind kind = ScorerKind::Fallback;
  // Embedding: OpenAI-compatible base URL (POST {url}/embeddings).
  // Remote: scorer service base URL (POST {url}/score).
  std::string url;
  std::string model;
  std::string api_key_env;
  std::string lang = "en";
  int timeout_ms = 30000;
};

void to_json(Json& j, const ScorerConfig& c);
void from_json(const Json& j, ScorerConfig& c);

class SimilarityScorer {
 public:
  virtual ~SimilarityScorer() = default;
  // Score in [0, 1]. Both texts must be non-empty.
  virtual double score(const std::string& candidate, const std::string& reference) = 0;
  // Provenance string recorded in reports.
  virtual std::string id() const = 0;
};

// Character-trigram multiset F1 over code points after ASCII whitespace
// runs are collapsed and trimmed. Strings too short for a trigram score 1
// when equal, else 0.
double trigram_f1(std::string_view candidate, std::string_view reference);

std::unique_ptr<SimilarityScorer> make_scorer(const ScorerConfig& cfg);

// Validates inputs (EmptyText) and clamps the scorer output to [0, 1].
double similarity(const std::string& candidate, const std::string& reference,
                  SimilarityScorer& scorer);

// --- revision ---------------------------------------------------------------

enum class QDenominator {
  JudgeConfirmed,  // hallucinations the judge confirmed before revision
  DetectorFlagged, // every record the detector flagged
};

std::string_view to_string(QDenominator d);
std::optional<QDenominator> parse_q_denominator(std::string_view name);

struct RevisionEval {
  std::int64_t flagged = 0;
  std::int64_t revised = 0;
  std::int64_t h_before = 0;
  std::int64_t h_after = 0;
  double reduction_rate = 0.0;  // R; negative when revision added hallucinations
  bool dominance_violated = false;
  std::int64_t detected_before = 0;
  std::int64_t accepted = 0;
  double success_rate = 0.0;  // Q
  QDenominator denominator = QDenominator::JudgeConfirmed;
};

struct RevisionEvalInputs {
  std::map<std::string, bool> judge_before;
  std::map<std::string, bool> judge_after;
  std::map<std::string, double> similarity;
  std::map<std::string, bool> mwp_category_match;
  double threshold = 0.85;
  QDenominator denominator = QDenominator::JudgeConfirmed;
};

// Over detector-flagged results: h_before/h_after count judge-positive
// verdicts before/after revision (unrevised records keep their before
// verdict). A revision is accepted when similarity >= threshold, or for
// math word problems when the reason category matches.
// Throws DivisionUndefined when the denominator is zero.
RevisionEval revision_eval(const std::vector<PipelineResult>& results,
                           const RevisionEvalInputs& inputs);

}  // namespace hallucheck

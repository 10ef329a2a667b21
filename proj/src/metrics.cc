#include "hallucheck/metrics.h"

#include <cmath>
#include <cstdlib>

namespace hallucheck {

std::string_view to_string(MetricsErrc code) {
  switch (code) {
    case MetricsErrc::LengthMismatch: return "length_mismatch";
    case MetricsErrc::EmptyInput: return "empty_input";
    case MetricsErrc::NoDiscordantPairs: return "no_discordant_pairs";
    case MetricsErrc::DivisionUndefined: return "division_undefined";
    case MetricsErrc::ScorerUnavailable: return "scorer_unavailable";
    case MetricsErrc::EmptyText: return "empty_text";
    case MetricsErrc::InvalidArgument: return "invalid_argument";
  }
  return "?";
}

ConfusionCounts confusion(const std::vector<bool>& predictions,
                          const std::vector<bool>& golds) {
  if (predictions.size() != golds.size()) {
    throw MetricsError(MetricsErrc::LengthMismatch,
                       "length_mismatch: " + std::to_string(predictions.size()) +
                           " predictions vs " + std::to_string(golds.size()) + " golds");
  }
  if (predictions.empty()) throw MetricsError(MetricsErrc::EmptyInput, "empty_input");
  ConfusionCounts c;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i]) {
      (golds[i] ? c.tp : c.fp) += 1;
    } else {
      (golds[i] ? c.fn : c.tn) += 1;
    }
  }
  return c;
}

DetectionScores f1_accuracy(const ConfusionCounts& c) {
  auto ratio = [](double num, double den) { return den == 0.0 ? 0.0 : num / den; };
  DetectionScores s;
  s.precision = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp));
  s.recall = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn));
  s.f1 = ratio(2.0 * s.precision * s.recall, s.precision + s.recall);
  s.accuracy = ratio(static_cast<double>(c.tp + c.tn), static_cast<double>(c.total()));
  return s;
}

double chi2_survival_1dof(double chi2) {
  if (chi2 <= 0.0) return 1.0;
  return std::erfc(std::sqrt(chi2 / 2.0));
}

McNemarResult mcnemar(std::int64_t n01, std::int64_t n10, std::int64_t n) {
  if (n01 < 0 || n10 < 0) {
    throw MetricsError(MetricsErrc::InvalidArgument, "discordant counts must be >= 0");
  }
  if (n01 + n10 == 0) {
    throw MetricsError(MetricsErrc::NoDiscordantPairs,
                       "no_discordant_pairs: McNemar's test is undefined");
  }
  McNemarResult r;
  r.n = n;
  r.n01 = n01;
  r.n10 = n10;
  const double corrected =
      std::max<double>(static_cast<double>(std::llabs(n01 - n10)) - 1.0, 0.0);
  r.chi2 = corrected * corrected / static_cast<double>(n01 + n10);
  r.p = chi2_survival_1dof(r.chi2);
  return r;
}

std::string_view to_string(QDenominator d) {
  return d == QDenominator::JudgeConfirmed ? "judge_confirmed" : "detector_flagged";
}

std::optional<QDenominator> parse_q_denominator(std::string_view name) {
  if (name == "judge_confirmed") return QDenominator::JudgeConfirmed;
  if (name == "detector_flagged") return QDenominator::DetectorFlagged;
  return std::nullopt;
}

RevisionEval revision_eval(const std::vector<PipelineResult>& results,
                           const RevisionEvalInputs& in) {
  if (!(in.threshold > 0.0 && in.threshold < 1.0)) {
    throw MetricsError(MetricsErrc::InvalidArgument, "threshold must lie in (0, 1)");
  }
  RevisionEval ev;
  ev.denominator = in.denominator;
  std::int64_t accepted_confirmed = 0;
  std::int64_t accepted_flagged = 0;
  for (const auto& r : results) {
    if (!r.detection.verdict) continue;
    ++ev.flagged;
    auto before_it = in.judge_before.find(r.record_id);
    if (before_it == in.judge_before.end()) {
      throw MetricsError(MetricsErrc::InvalidArgument,
                         "no pre-revision judge verdict for '" + r.record_id + "'");
    }
    const bool before = before_it->second;
    bool after = before;
    bool accepted = false;
    if (r.revision) {
      ++ev.revised;
      auto after_it = in.judge_after.find(r.record_id);
      if (after_it == in.judge_after.end()) {
        throw MetricsError(MetricsErrc::InvalidArgument,
                           "no post-revision judge verdict for '" + r.record_id + "'");
      }
      after = after_it->second;
      if (r.record.kind == TaskKind::MathWordProblem) {
        auto it = in.mwp_category_match.find(r.record_id);
        accepted = it != in.mwp_category_match.end() && it->second;
      } else {
        auto it = in.similarity.find(r.record_id);
        accepted = it != in.similarity.end() && it->second >= in.threshold;
      }
    }
    ev.h_before += before ? 1 : 0;
    ev.h_after += after ? 1 : 0;
    if (accepted) {
      ++accepted_flagged;
      if (before) ++accepted_confirmed;
    }
  }
  if (ev.h_before == 0) {
    throw MetricsError(MetricsErrc::DivisionUndefined,
                       "division_undefined: no judge-confirmed hallucinations before "
                       "revision");
  }
  ev.reduction_rate = static_cast<double>(ev.h_before - ev.h_after) /
                      static_cast<double>(ev.h_before);
  ev.dominance_violated = ev.h_after > ev.h_before;
  if (in.denominator == QDenominator::JudgeConfirmed) {
    ev.detected_before = ev.h_before;
    ev.accepted = accepted_confirmed;
  } else {
    ev.detected_before = ev.flagged;
    ev.accepted = accepted_flagged;
  }
  ev.success_rate =
      static_cast<double>(ev.accepted) / static_cast<double>(ev.detected_before);
  return ev;
}

}  // namespace hallucheck

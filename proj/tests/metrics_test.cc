#include "hallucheck/metrics.h"

#include <gtest/gtest.h>

#include <random>

#include "test_support.h"

namespace hallucheck {
namespace {

struct McNemarRow {
  const char* task;
  std::int64_t n01;
  std::int64_t n10;
  double chi2;
  double p;
};

// Printed values, two to four significant digits.
constexpr McNemarRow kPrinted[] = {
    {"QA", 112, 83, 4.02, 0.045},        {"DA", 84, 71, 0.93, 0.335},
    {"SUM", 94, 40, 20.96, 4.68e-6},     {"MWPs", 121, 33, 49.15, 2.37e-12},
    {"SC", 89, 20, 42.42, 7.36e-11},     {"Overall", 500, 247, 85.01, 3.0e-20},
};

// Full-precision reference values from an independent chi-square survival
// function.
constexpr McNemarRow kReference[] = {
    {"QA", 112, 83, 4.0205128205128205, 0.044950140036516},
    {"DA", 84, 71, 0.9290322580645162, 0.335122897432985},
    {"SUM", 94, 40, 20.962686567164178, 4.68313e-06},
    {"MWPs", 121, 33, 49.14935064935065, 2.37178e-12},
    {"SC", 89, 20, 42.422018348623855, 7.35557e-11},
    {"Overall", 500, 247, 85.01204819277109, 2.96579e-20},
};

TEST(McNemarTest, ReproducesPrintedTable) {
  for (const auto& row : kPrinted) {
    const auto r = mcnemar(row.n01, row.n10);
    EXPECT_NEAR(r.chi2, row.chi2, 0.01) << row.task;
    EXPECT_NEAR(r.p / row.p, 1.0, 0.05) << row.task;
  }
}

TEST(McNemarTest, MatchesReferenceClosely) {
  for (const auto& row : kReference) {
    const auto r = mcnemar(row.n01, row.n10);
    EXPECT_NEAR(r.chi2, row.chi2, 1e-9) << row.task;
    EXPECT_NEAR(r.p / row.p, 1.0, 1e-4) << row.task;
  }
}

TEST(McNemarTest, SymmetricInDiscordantCounts) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 500; ++i) {
    const auto a = static_cast<std::int64_t>(rng() % 300);
    const auto b = static_cast<std::int64_t>(rng() % 300) + 1;
    const auto x = mcnemar(a, b);
    const auto y = mcnemar(b, a);
    EXPECT_EQ(x.chi2, y.chi2);
    EXPECT_EQ(x.p, y.p);
  }
}

TEST(McNemarTest, PValueFallsAsImbalanceGrows) {
  double previous = 2.0;
  for (std::int64_t n01 = 50; n01 <= 200; n01 += 5) {
    const auto r = mcnemar(n01, 50);
    EXPECT_LE(r.p, previous);
    EXPECT_GE(r.p, 0.0);
    EXPECT_LE(r.p, 1.0);
    previous = r.p;
  }
}

TEST(McNemarTest, EdgeCases) {
  try {
    mcnemar(0, 0);
    FAIL();
  } catch (const MetricsError& e) {
    EXPECT_EQ(e.code(), MetricsErrc::NoDiscordantPairs);
  }
  EXPECT_EQ(mcnemar(1, 0).chi2, 0.0);
  EXPECT_EQ(mcnemar(1, 0).p, 1.0);
  EXPECT_EQ(mcnemar(5, 5).p, 1.0);
  EXPECT_THROW(mcnemar(-1, 3), MetricsError);
  EXPECT_EQ(mcnemar(3, 1, 400).n, 400);
}

TEST(DetectionMetricsTest, MatchesBruteForceRecount) {
  std::mt19937_64 rng(1234);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 60;
    std::vector<bool> pred(n), gold(n);
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = rng() % 2;
      gold[i] = rng() % 3 != 0;
    }
    std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (pred[i] && gold[i]) ++tp;
      if (pred[i] && !gold[i]) ++fp;
      if (!pred[i] && !gold[i]) ++tn;
      if (!pred[i] && gold[i]) ++fn;
    }
    const auto c = confusion(pred, gold);
    ASSERT_EQ(c, (ConfusionCounts{tp, fp, tn, fn}));
    const double precision = tp + fp == 0 ? 0.0 : double(tp) / double(tp + fp);
    const double recall = tp + fn == 0 ? 0.0 : double(tp) / double(tp + fn);
    const double f1 =
        precision + recall == 0.0 ? 0.0 : 2 * precision * recall / (precision + recall);
    const auto s = f1_accuracy(c);
    ASSERT_EQ(s.precision, precision);
    ASSERT_EQ(s.recall, recall);
    ASSERT_EQ(s.f1, f1);
    ASSERT_EQ(s.accuracy, double(tp + tn) / double(n));
  }
}

TEST(DetectionMetricsTest, ZeroDenominatorsAndErrors) {
  const auto s = f1_accuracy(confusion({false, false}, {false, false}));
  EXPECT_EQ(s.f1, 0.0);
  EXPECT_EQ(s.accuracy, 1.0);
  EXPECT_THROW(confusion({true}, {true, false}), MetricsError);
  EXPECT_THROW(confusion({}, {}), MetricsError);
}

TEST(TrigramTest, MatchesStandaloneOracle) {
  const auto pairs = Json::parse(testing::read_file(testing::fixture_path("trigram_pairs.json")));
  ASSERT_EQ(pairs.size(), 50u);
  for (const auto& p : pairs) {
    const auto a = p.at("a").get<std::string>();
    const auto b = p.at("b").get<std::string>();
    EXPECT_NEAR(trigram_f1(a, b), p.at("f1").get<double>(), 1e-12) << a << " | " << b;
  }
}

TEST(TrigramTest, Properties) {
  EXPECT_EQ(trigram_f1("the cat sat", "the cat sat"), 1.0);
  EXPECT_EQ(trigram_f1("  the\tcat \n sat ", "the cat sat"), 1.0);
  EXPECT_EQ(trigram_f1("ab", "ab"), 1.0);
  EXPECT_EQ(trigram_f1("ab", "abc"), 0.0);
  EXPECT_EQ(trigram_f1("abc", "xyz"), 0.0);
  EXPECT_EQ(trigram_f1("日本語", "日本語"), 1.0);
  EXPECT_EQ(trigram_f1("abcd", "dcba"), trigram_f1("dcba", "abcd"));
}

TEST(SimilarityTest, FallbackScorerValidatesInput) {
  auto scorer = make_scorer(ScorerConfig{});
  EXPECT_EQ(scorer->id(), "fallback:char-trigram-f1");
  EXPECT_EQ(similarity("Warsaw", "Warsaw", *scorer), 1.0);
  try {
    similarity("  ", "Warsaw", *scorer);
    FAIL();
  } catch (const MetricsError& e) {
    EXPECT_EQ(e.code(), MetricsErrc::EmptyText);
  }
}

TEST(SimilarityTest, RemoteScorerSpeaksScoreProtocol) {
  Json seen;
  std::mutex mu;
  testing::StubServer server([&](httplib::Server& s) {
    s.Post("/score", [&](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mu);
      seen = Json::parse(req.body);
      res.set_content(R"({"f1":0.91,"precision":0.9,"recall":0.92,"model_id":"enc-v1"})",
                      "application/json");
    });
  });
  ScorerConfig cfg;
  cfg.kind = ScorerKind::Remote;
  cfg.url = server.url();
  cfg.lang = "zh";
  auto scorer = make_scorer(cfg);
  EXPECT_DOUBLE_EQ(similarity("cand", "ref", *scorer), 0.91);
  EXPECT_EQ(seen, (Json{{"candidate", "cand"}, {"reference", "ref"}, {"lang", "zh"}}));
  EXPECT_EQ(scorer->id(), "remote:enc-v1");
}

TEST(SimilarityTest, RemoteScorerFailuresAreTyped) {
  testing::StubServer server([&](httplib::Server& s) {
    s.Post("/score", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  });
  ScorerConfig cfg;
  cfg.kind = ScorerKind::Remote;
  cfg.url = server.url();
  auto scorer = make_scorer(cfg);
  try {
    scorer->score("a", "b");
    FAIL();
  } catch (const MetricsError& e) {
    EXPECT_EQ(e.code(), MetricsErrc::ScorerUnavailable);
  }
  cfg.url.clear();
  EXPECT_THROW(make_scorer(cfg), MetricsError);
}

TEST(SimilarityTest, EmbeddingScorerRescalesCosine) {
  testing::StubServer server([&](httplib::Server& s) {
    s.Post("/v1/embeddings", [](const httplib::Request& req, httplib::Response& res) {
      const auto body = Json::parse(req.body);
      const bool same = body["input"][0] == body["input"][1];
      Json data = Json::array({{{"embedding", {1.0, 0.0}}},
                               {{"embedding", same ? Json{1.0, 0.0} : Json{0.0, 1.0}}}});
      res.set_content(Json{{"data", data}}.dump(), "application/json");
    });
  });
  ScorerConfig cfg;
  cfg.kind = ScorerKind::Embedding;
  cfg.url = server.url() + "/v1";
  cfg.model = "embed-small";
  auto scorer = make_scorer(cfg);
  EXPECT_DOUBLE_EQ(scorer->score("x", "x"), 1.0);
  EXPECT_DOUBLE_EQ(scorer->score("x", "y"), 0.5);
  EXPECT_EQ(scorer->id(), "embedding:embed-small");
}

PipelineResult Flagged(const std::string& id, TaskKind kind, bool revised, bool flagged = true) {
  PipelineResult r;
  r.record_id = id;
  r.record.id = id;
  r.record.kind = kind;
  r.detection.verdict = flagged;
  if (revised) r.revision = RevisionOutcome{"revised " + id, "analysis", StageTranscript{}};
  return r;
}

// Hand-enumerated sheet:
//   r1 QA  flagged revised   before T after F sim 0.90 -> accepted
//   r2 QA  flagged unrevised before T (after carries T)
//   r3 SUM flagged revised   before T after F sim 0.85 -> accepted (boundary)
//   r4 MWP flagged revised   before T after F category match -> accepted
//   r5 DA  flagged revised   before F after T sim 0.95 -> accepted, not confirmed
//   r6 QA  not flagged
// h_before = 4 (r1..r4), h_after = 2 (r2, r5), R = 0.5.
// judge_confirmed: accepted {r1, r3, r4} / 4 = 0.75.
// detector_flagged: accepted {r1, r3, r4, r5} / 5 = 0.8.
struct MicroFixture {
  std::vector<PipelineResult> results = {
      Flagged("r1", TaskKind::QuestionAnswering, true),
      Flagged("r2", TaskKind::QuestionAnswering, false),
      Flagged("r3", TaskKind::Summarization, true),
      Flagged("r4", TaskKind::MathWordProblem, true),
      Flagged("r5", TaskKind::Dialogue, true),
      Flagged("r6", TaskKind::QuestionAnswering, false, false),
  };
  RevisionEvalInputs inputs;

  MicroFixture() {
    inputs.judge_before = {{"r1", true}, {"r2", true}, {"r3", true}, {"r4", true}, {"r5", false}};
    inputs.judge_after = {{"r1", false}, {"r3", false}, {"r4", false}, {"r5", true}};
    inputs.similarity = {{"r1", 0.90}, {"r3", 0.85}, {"r5", 0.95}};
    inputs.mwp_category_match = {{"r4", true}};
  }
};

TEST(RevisionEvalTest, MicroFixtureJudgeConfirmed) {
  MicroFixture f;
  const auto ev = revision_eval(f.results, f.inputs);
  EXPECT_EQ(ev.flagged, 5);
  EXPECT_EQ(ev.revised, 4);
  EXPECT_EQ(ev.h_before, 4);
  EXPECT_EQ(ev.h_after, 2);
  EXPECT_EQ(ev.reduction_rate, 0.5);
  EXPECT_FALSE(ev.dominance_violated);
  EXPECT_EQ(ev.detected_before, 4);
  EXPECT_EQ(ev.accepted, 3);
  EXPECT_EQ(ev.success_rate, 0.75);
}

TEST(RevisionEvalTest, MicroFixtureDetectorFlagged) {
  MicroFixture f;
  f.inputs.denominator = QDenominator::DetectorFlagged;
  const auto ev = revision_eval(f.results, f.inputs);
  EXPECT_EQ(ev.detected_before, 5);
  EXPECT_EQ(ev.accepted, 4);
  EXPECT_EQ(ev.success_rate, 0.8);
  EXPECT_EQ(ev.reduction_rate, 0.5);
}

TEST(RevisionEvalTest, ThresholdIsInclusive) {
  MicroFixture f;
  f.inputs.threshold = 0.86;
  EXPECT_EQ(revision_eval(f.results, f.inputs).accepted, 2);
}

TEST(RevisionEvalTest, NegativeReductionIsReported) {
  MicroFixture f;
  f.inputs.judge_after = {{"r1", true}, {"r3", true}, {"r4", true}, {"r5", true}};
  f.inputs.judge_before["r2"] = false;
  f.inputs.judge_before["r3"] = false;
  const auto ev = revision_eval(f.results, f.inputs);
  EXPECT_EQ(ev.h_before, 2);
  EXPECT_EQ(ev.h_after, 4);
  EXPECT_EQ(ev.reduction_rate, -1.0);
  EXPECT_TRUE(ev.dominance_violated);
}

TEST(RevisionEvalTest, NoConfirmedHallucinationsIsUndefined) {
  MicroFixture f;
  for (auto& [id, v] : f.inputs.judge_before) v = false;
  try {
    revision_eval(f.results, f.inputs);
    FAIL();
  } catch (const MetricsError& e) {
    EXPECT_EQ(e.code(), MetricsErrc::DivisionUndefined);
  }
}

TEST(RevisionEvalTest, MissingJudgeVerdictIsAnError) {
  MicroFixture f;
  f.inputs.judge_after.erase("r1");
  EXPECT_THROW(revision_eval(f.results, f.inputs), MetricsError);
}

}  // namespace
}  // namespace hallucheck

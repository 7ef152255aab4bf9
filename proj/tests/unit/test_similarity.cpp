#include <gtest/gtest.h>

#include <thread>

#include "revbench/similarity.hpp"
#include "test_util.hpp"

using namespace revbench;

namespace {

ItemId id(const std::string& reviewer, int index, const std::string& paper = "p") {
  return ItemId{paper, reviewer, index};
}

const JudgeCalibration kReferenceCounts{61, 9, 3, 91};

}  // namespace

TEST(VerdictTable, UnorderedAndIdempotent) {
  VerdictTable t;
  t.insert(id("a", 1), id("b", 1), {2, VerdictSource::Judge});
  EXPECT_EQ(t.ordinal(id("b", 1), id("a", 1)), 2);
  EXPECT_NO_THROW(t.insert(id("b", 1), id("a", 1), {2, VerdictSource::Judge}));
  EXPECT_EQ(t.size(), 1u);
  EXPECT_THROW_CODE(t.insert(id("a", 1), id("b", 1), {3, VerdictSource::Judge}), ErrorCode::ConflictingVerdict);
  EXPECT_THROW_CODE(t.insert(id("a", 1), id("a", 1), {3, VerdictSource::Judge}), ErrorCode::SchemaError);
  EXPECT_THROW_CODE(t.insert(id("a", 1), id("c", 1), {4, VerdictSource::Judge}), ErrorCode::SchemaError);
  EXPECT_THROW_CODE(t.ordinal(id("a", 1), id("c", 1)), ErrorCode::MissingVerdict);
}

TEST(VerdictTable, ConcurrentInserts) {
  VerdictTable t;
  std::vector<std::thread> pool;
  for (int w = 0; w < 4; ++w) {
    pool.emplace_back([&t] {
      for (int i = 1; i <= 200; ++i) t.insert(id("a", i), id("b", i), {i % 4, VerdictSource::Judge});
    });
  }
  for (auto& th : pool) th.join();
  EXPECT_EQ(t.size(), 200u);
}

TEST(VerdictTable, JsonlRoundTrip) {
  VerdictTable t;
  t.insert(id("h1", 1), id("ai", 2), {3, VerdictSource::Reference});
  t.insert(id("h1", 1, "q"), id("h2", 1, "q"), {0, VerdictSource::Judge});
  const std::string text = serialize_verdicts(t);
  const VerdictTable back = parse_verdicts(text);
  EXPECT_EQ(serialize_verdicts(back), text);
  EXPECT_EQ(back.find(id("ai", 2), id("h1", 1))->source, VerdictSource::Reference);
  EXPECT_THROW_CODE(parse_verdicts("{\"paper_id\":\"p\"}\n"), ErrorCode::SchemaError);
}

TEST(Calibration, ErrorRatesFromReferenceCounts) {
  const ErrorRates r = error_rates(kReferenceCounts);
  EXPECT_NEAR(r.sensitivity, 0.8714, 1e-4);
  EXPECT_NEAR(r.specificity, 0.9681, 1e-4);
  EXPECT_THROW_CODE(error_rates({0, 0, 1, 1}), ErrorCode::EmptyPositiveClass);
  EXPECT_THROW_CODE(error_rates({1, 1, 0, 0}), ErrorCode::EmptyNegativeClass);
}

TEST(Calibration, Parse) {
  const auto c = parse_calibration("{\"tp\": 61, \"fn\": 9, \"fp\": 3, \"tn\": 91}");
  EXPECT_EQ(c.tp, 61u);
  EXPECT_EQ(c.tn, 91u);
  EXPECT_THROW_CODE(parse_calibration("{\"tp\": -1, \"fn\": 9, \"fp\": 3, \"tn\": 91}"), ErrorCode::SchemaError);
  EXPECT_THROW_CODE(parse_calibration("{\"tp\": 1}"), ErrorCode::SchemaError);
  EXPECT_THROW_CODE(parse_calibration("[1,2]"), ErrorCode::SchemaError);
}

TEST(RoganGladen, FormulaAndClipping) {
  const ErrorRates r = error_rates(kReferenceCounts);
  const double expected = (0.075 + r.specificity - 1) / (r.sensitivity + r.specificity - 1);
  EXPECT_NEAR(rogan_gladen(0.075, r.sensitivity, r.specificity), expected, 1e-15);
  EXPECT_NEAR(rogan_gladen(0.075, r.sensitivity, r.specificity), 0.051322, 1e-6);
  EXPECT_DOUBLE_EQ(rogan_gladen(0.01, r.sensitivity, r.specificity), 0.0);
  EXPECT_DOUBLE_EQ(rogan_gladen(0.999, r.sensitivity, r.specificity), 1.0);
  EXPECT_DOUBLE_EQ(rogan_gladen(0.3, 1.0, 1.0), 0.3);
  EXPECT_THROW_CODE(rogan_gladen(0.3, 0.5, 0.5), ErrorCode::UninformativeJudge);
}

TEST(RoganGladen, ProportionalSplit) {
  const ErrorRates r = error_rates(kReferenceCounts);
  const auto d = corrected_distribution({78.1, 14.4, 7.1, 0.4}, r.sensitivity, r.specificity);
  EXPECT_NEAR(d[2] + d[3], 0.051322, 1e-6);
  EXPECT_NEAR(d[3], 0.002737, 1e-6);
  EXPECT_NEAR(d[2], 0.048584, 1e-6);
  EXPECT_NEAR(d[0] / d[1], 78.1 / 14.4, 1e-9);
  EXPECT_NEAR(d[0] + d[1] + d[2] + d[3], 1.0, 1e-12);
}

TEST(RoganGladen, EmptySidesStayEmpty) {
  const auto d = corrected_distribution({3, 7, 0, 0}, 0.9, 0.8);
  EXPECT_DOUBLE_EQ(d[2] + d[3], 0.0);
  EXPECT_NEAR(d[0], 0.3, 1e-12);
  const auto g = corrected_distribution({0, 0, 4, 6}, 0.5, 0.9);
  EXPECT_DOUBLE_EQ(g[0] + g[1], 0.0);
  EXPECT_NEAR(g[3], 0.6, 1e-12);
  EXPECT_THROW_CODE(corrected_distribution({0, 0, 0, 0}, 0.9, 0.9), ErrorCode::EmptyInput);
}

TEST(PrevalenceCi, PerfectJudgeKeepsRawAndDeterminism) {
  std::vector<PaperPairCounts> papers;
  Rng rng(1);
  for (int p = 0; p < 30; ++p) {
    PaperPairCounts c;
    c.paper_id = "p" + std::to_string(p);
    for (auto& k : c.counts) k = rng.below(10);
    papers.push_back(c);
  }
  BootstrapConfig cfg;
  cfg.iterations = 1000;
  cfg.seed = 4;
  const auto perfect = corrected_distribution_ci(papers, {50, 0, 0, 50}, cfg);
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(perfect.corrected[k].point, perfect.raw[k], 1e-12);
  EXPECT_NEAR(perfect.similar.corrected, perfect.similar.raw, 1e-12);

  const auto a = corrected_distribution_ci(papers, kReferenceCounts, cfg);
  const auto b = corrected_distribution_ci(papers, kReferenceCounts, cfg);
  cfg.seed = 5;
  const auto c = corrected_distribution_ci(papers, kReferenceCounts, cfg);
  EXPECT_EQ(a.similar.ci.lower, b.similar.ci.lower);
  EXPECT_EQ(a.similar.ci.upper, b.similar.ci.upper);
  EXPECT_EQ(a.similar.corrected, c.similar.corrected);
  EXPECT_NE(a.similar.ci.lower, c.similar.ci.lower);
  for (int k = 0; k < 4; ++k) {
    EXPECT_LE(a.corrected[k].lower, a.corrected[k].point);
    EXPECT_GE(a.corrected[k].upper, a.corrected[k].point);
  }
  const auto single = corrected_prevalence_ci(papers, kReferenceCounts, cfg);
  EXPECT_EQ(single.ci.lower, c.similar.ci.lower);
}

TEST(PrevalenceCi, Errors) {
  BootstrapConfig cfg;
  cfg.iterations = 10;
  EXPECT_THROW_CODE(corrected_prevalence_ci({}, kReferenceCounts, cfg), ErrorCode::EmptyClusters);
  PaperPairCounts c{"p", {1, 1, 1, 1}};
  EXPECT_THROW_CODE(corrected_prevalence_ci({c}, {5, 5, 5, 5}, cfg), ErrorCode::UninformativeJudge);
}

TEST(Coverage, FractionOfCoveredItems) {
  VerdictTable t;
  t.insert(id("h", 1), id("ai", 1), {3, VerdictSource::Judge});
  t.insert(id("h", 1), id("ai", 2), {0, VerdictSource::Judge});
  t.insert(id("h", 2), id("ai", 1), {1, VerdictSource::Judge});
  t.insert(id("h", 2), id("ai", 2), {1, VerdictSource::Judge});
  const auto c = coverage(std::vector<ItemId>{id("h", 1), id("h", 2)}, {id("ai", 1), id("ai", 2)}, t);
  EXPECT_DOUBLE_EQ(c.fraction, 0.5);
  ASSERT_EQ(c.covered.size(), 1u);
  EXPECT_EQ(c.covered[0], id("h", 1));
  const auto loose = coverage(std::vector<ItemId>{id("h", 1), id("h", 2)}, {id("ai", 1), id("ai", 2)}, t, 1);
  EXPECT_DOUBLE_EQ(loose.fraction, 1.0);
  EXPECT_THROW_CODE(coverage(std::vector<ItemId>{}, {id("ai", 1)}, t), ErrorCode::EmptySideA);
  EXPECT_THROW_CODE(coverage(std::vector<ItemId>{id("h", 3)}, {id("ai", 1)}, t), ErrorCode::MissingVerdict);
}

TEST(PairTypes, Classification) {
  using K = ReviewerKind;
  EXPECT_EQ(pair_type(id("h1", 1), K::Human, id("h1", 2), K::Human), PairType::HumanHumanSame);
  EXPECT_EQ(pair_type(id("h1", 1), K::Human, id("h2", 1), K::Human), PairType::HumanHumanDiff);
  EXPECT_EQ(pair_type(id("a1", 1), K::Ai, id("a1", 2), K::Ai), PairType::AiAiSame);
  EXPECT_EQ(pair_type(id("a1", 1), K::Ai, id("a2", 1), K::Ai), PairType::AiAiDiff);
  EXPECT_EQ(pair_type(id("a1", 1), K::Ai, id("h1", 1), K::Human), PairType::HumanAi);
}

TEST(PairTypes, GroupsByPaper) {
  VerdictTable t;
  t.insert(id("h1", 1), id("h2", 1), {2, VerdictSource::Judge});
  t.insert(id("h1", 1), id("ai", 1), {0, VerdictSource::Judge});
  t.insert(id("h1", 1, "q"), id("ai", 1, "q"), {3, VerdictSource::Judge});
  auto kind = [](const std::string&, const std::string& r) -> std::optional<ReviewerKind> {
    if (r == "zz") return std::nullopt;
    return r[0] == 'h' ? ReviewerKind::Human : ReviewerKind::Ai;
  };
  const auto g = pair_counts_by_type(t, kind);
  ASSERT_EQ(g.at(PairType::HumanAi).size(), 2u);
  EXPECT_EQ(g.at(PairType::HumanAi)[1].counts[3], 1u);
  EXPECT_EQ(g.at(PairType::HumanHumanDiff)[0].counts[2], 1u);
  EXPECT_FALSE(g.count(PairType::AiAiSame));
  t.insert(id("zz", 1), id("h1", 1), {0, VerdictSource::Judge});
  EXPECT_THROW_CODE(pair_counts_by_type(t, kind), ErrorCode::SchemaError);
}

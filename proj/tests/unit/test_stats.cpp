#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "revbench/stats.hpp"
#include "test_util.hpp"

using namespace revbench;

namespace {

ContingencyTable table2(double a, double b, double c, double d) {
  ContingencyTable t(2);
  t.counts = {{a, b}, {c, d}};
  return t;
}

struct Oracle {
  double po, kappa, ac1;
};

// Straight from the definitions, kept separate from the library code.
Oracle oracle(const ContingencyTable& t, std::size_t k_vocab) {
  const std::size_t k = t.categories();
  double n = 0, diag = 0;
  std::vector<double> row(k, 0), col(k, 0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      n += t.counts[i][j];
      row[i] += t.counts[i][j];
      col[j] += t.counts[i][j];
    }
    diag += t.counts[i][i];
  }
  const double po = diag / n;
  double pe_k = 0, pe_g = 0;
  for (std::size_t i = 0; i < k; ++i) {
    pe_k += row[i] * col[i] / (n * n);
    const double pi = (row[i] + col[i]) / (2 * n);
    pe_g += pi * (1 - pi);
  }
  const double kk = static_cast<double>(std::max(k, k_vocab));
  pe_g /= (kk - 1);
  return {po, (po - pe_k) / (1 - pe_k), (po - pe_g) / (1 - pe_g)};
}

}  // namespace

TEST(Agreement, HandComputedTwoByTwo) {
  const auto t = table2(40, 9, 6, 45);
  EXPECT_NEAR(percent_agreement(t), 0.85, 1e-12);
  EXPECT_NEAR(cohen_kappa(t), 0.6995192307692307, 1e-12);
  EXPECT_NEAR(gwet_ac1(t), 0.7007481296758106, 1e-12);
}

TEST(Agreement, MatchesOracleOnRandomTables) {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 2 + rng.below(3);
    ContingencyTable t(k);
    for (auto& r : t.counts) {
      for (auto& c : r) c = static_cast<double>(1 + rng.below(30));
    }
    const Oracle o = oracle(t, k);
    EXPECT_NEAR(percent_agreement(t), o.po, 1e-12);
    EXPECT_NEAR(cohen_kappa(t), o.kappa, 1e-12);
    EXPECT_NEAR(gwet_ac1(t, k), o.ac1, 1e-12);
  }
}

TEST(Agreement, VocabularyWidensAc1ChanceTerm) {
  ContingencyTable t(2);
  t.counts = {{30, 2}, {3, 5}};
  const Oracle o3 = oracle(t, 3);
  EXPECT_NEAR(gwet_ac1(t, 3), o3.ac1, 1e-12);
  EXPECT_NE(gwet_ac1(t, 3), gwet_ac1(t, 2));
}

TEST(Agreement, PerfectAgreement) {
  const auto t = table2(10, 0, 0, 7);
  EXPECT_DOUBLE_EQ(cohen_kappa(t), 1.0);
  EXPECT_DOUBLE_EQ(gwet_ac1(t), 1.0);
}

TEST(Agreement, DegenerateCases) {
  EXPECT_THROW_CODE(cohen_kappa(table2(10, 0, 0, 0)), ErrorCode::DegenerateMarginals);
  ContingencyTable one(1);
  one.counts = {{5}};
  EXPECT_THROW_CODE(gwet_ac1(one, 1), ErrorCode::SingleCategoryVocabulary);
  EXPECT_NEAR(gwet_ac1(one, 2), 1.0, 1e-12);
  using P = std::pair<int, int>;
  EXPECT_THROW_CODE(cohen_kappa(std::vector<P>{}), ErrorCode::EmptyInput);
}

TEST(Agreement, KappaParadox) {
  // High prevalence of one label: agreement high, kappa low, AC1 high.
  const auto t = table2(85, 5, 5, 5);
  EXPECT_NEAR(percent_agreement(t), 0.90, 1e-12);
  EXPECT_LT(cohen_kappa(t), 0.5);
  EXPECT_GT(gwet_ac1(t), 0.85);
}

TEST(Agreement, TabulatesLabelPairs) {
  std::vector<std::pair<std::string, std::string>> pairs{{"a", "a"}, {"a", "b"}, {"b", "b"}, {"b", "b"}};
  const auto t = tabulate(pairs);
  EXPECT_EQ(t.categories(), 2u);
  EXPECT_DOUBLE_EQ(percent_agreement(pairs), 0.75);
}

TEST(Intervals, WilsonMatchesReference) {
  const auto a = wilson_ci(8, 10);
  EXPECT_NEAR(a.lower, 0.49016247153664183, 1e-6);
  EXPECT_NEAR(a.upper, 0.9433178485456247, 1e-6);
  const auto b = wilson_ci(152, 164);
  EXPECT_NEAR(b.lower, 0.8764697885530747, 1e-6);
  EXPECT_NEAR(b.upper, 0.9576507021986335, 1e-6);
  EXPECT_EQ(b.method, IntervalMethod::Wilson);
  EXPECT_DOUBLE_EQ(wilson_ci(0, 5).lower, 0.0);
  EXPECT_DOUBLE_EQ(wilson_ci(5, 5).upper, 1.0);
  EXPECT_THROW_CODE(wilson_ci(0, 0), ErrorCode::EmptyInput);
  EXPECT_THROW_CODE(wilson_ci(3, 2), ErrorCode::InvariantViolation);
}

TEST(Intervals, ZForLevel) {
  EXPECT_DOUBLE_EQ(z_for_level(0.95), 1.959964);
  EXPECT_NEAR(z_for_level(0.90), 1.6448536269514722, 1e-9);
}

TEST(PairedTests, TMatchesReference) {
  const auto r = paired_t({2, 0, 2, 0});
  EXPECT_NEAR(r.t, 1.7320508075688774, 1e-9);
  EXPECT_NEAR(r.p_value, 0.18169011381620923, 1e-9);
  EXPECT_DOUBLE_EQ(r.df, 3.0);
  EXPECT_NEAR(r.cohen_d, r.mean_diff / r.sd_diff, 1e-12);
  EXPECT_THROW_CODE(paired_t({1.0}), ErrorCode::EmptyInput);
  EXPECT_THROW_CODE(paired_t({1.0, 1.0, 1.0}), ErrorCode::ZeroVariance);
}

TEST(PairedTests, WilcoxonExact) {
  const auto r = wilcoxon_signed_rank({3, -1, 2});
  EXPECT_TRUE(r.exact);
  EXPECT_DOUBLE_EQ(r.w_plus, 5.0);
  EXPECT_DOUBLE_EQ(r.w_minus, 1.0);
  EXPECT_NEAR(r.p_value, 0.5, 1e-12);
  EXPECT_NEAR(r.rank_biserial_r, 4.0 / 6.0, 1e-12);
  EXPECT_NEAR(wilcoxon_signed_rank({1, 2, 3}).p_value, 0.25, 1e-12);
  const std::vector<double> d12{0.5, 1.2, -0.3, 2.2, 1.1, 0.9, -0.4, 1.5, 0.7, 2.0, 1.3, 0.2};
  EXPECT_NEAR(wilcoxon_signed_rank(d12).p_value, 0.0048828125, 1e-12);
}

TEST(PairedTests, WilcoxonDropsZeros) {
  const auto r = wilcoxon_signed_rank({0, 0, 3, -1, 2});
  EXPECT_EQ(r.n, 3u);
  EXPECT_EQ(r.dropped, 2u);
  EXPECT_NEAR(r.p_value, 0.5, 1e-12);
  EXPECT_THROW_CODE(wilcoxon_signed_rank({0, 0}), ErrorCode::AllZeroDiffs);
}

TEST(PairedTests, WilcoxonNormalApproximationWithTies) {
  const std::vector<double> d{0.5, 1.2, -0.3, 2.2, 1.1, 0.9, -0.4, 1.5, 0.7, 2.0, 1.3, 0.2, -0.1, 0.8, 1.6,
                              1.9, -0.6, 1.0, 0.4, 1.4, 2.5, 0.3, -0.2, 1.7, 0.6, 1.8, 2.1, -0.5, 1.2, 0.9};
  const auto r = wilcoxon_signed_rank(d);
  EXPECT_FALSE(r.exact);
  EXPECT_DOUBLE_EQ(std::min(r.w_plus, r.w_minus), 33.5);
  EXPECT_NEAR(r.p_value, 4.242554365404999e-05, 1e-9);
}

TEST(Bootstrap, SortedQuantileInterpolates) {
  const std::vector<double> v{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(sorted_quantile(v, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(sorted_quantile(v, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(sorted_quantile(v, 0.5), 2.5);
}

TEST(Bootstrap, PercentileIntervalContainsPoint) {
  std::vector<double> reps(100);
  for (int i = 0; i < 100; ++i) reps[static_cast<std::size_t>(i)] = i;
  const auto ci = percentile_interval(reps, 500.0, 0.95);
  EXPECT_DOUBLE_EQ(ci.upper, 500.0);
  EXPECT_NEAR(ci.lower, 2.475, 1e-12);
}

TEST(Bootstrap, IndependentOfThreadCount) {
  std::vector<double> clusters;
  Rng rng(5);
  for (int i = 0; i < 40; ++i) clusters.push_back(rng.uniform01());
  auto stat = [](const std::vector<const double*>& s) {
    double m = 0;
    for (auto* p : s) m += *p;
    return m / static_cast<double>(s.size());
  };
  BootstrapConfig cfg;
  cfg.iterations = 3000;
  cfg.seed = 99;
  cfg.threads = 1;
  const auto one = cluster_bootstrap_ci(clusters, stat, cfg);
  cfg.threads = 4;
  const auto four = cluster_bootstrap_ci(clusters, stat, cfg);
  EXPECT_EQ(one.lower, four.lower);
  EXPECT_EQ(one.upper, four.upper);
  cfg.seed = 100;
  const auto other = cluster_bootstrap_ci(clusters, stat, cfg);
  EXPECT_EQ(one.point, other.point);
  EXPECT_NE(one.lower, other.lower);
}

TEST(Bootstrap, Validation) {
  BootstrapConfig cfg;
  cfg.iterations = 0;
  EXPECT_THROW_CODE(validate(cfg), ErrorCode::InvariantViolation);
  cfg.iterations = 10;
  cfg.level = 1.0;
  EXPECT_THROW_CODE(validate(cfg), ErrorCode::InvariantViolation);
  const std::vector<double> none;
  EXPECT_THROW_CODE(cluster_bootstrap_ci(none, [](const std::vector<const double*>&) { return 0.0; }, BootstrapConfig{}),
                    ErrorCode::EmptyClusters);
}

TEST(PerPaper, RatesAndEmptyGroups) {
  std::map<std::string, std::vector<int>> groups{{"a", {1, 0, 1, 1}}, {"b", {0, 0}}};
  const auto rates = per_paper_rates(groups, [](int v) { return v == 1; });
  ASSERT_EQ(rates.size(), 2u);
  EXPECT_DOUBLE_EQ(rates[0].second, 0.75);
  EXPECT_DOUBLE_EQ(rates[1].second, 0.0);
  groups["c"] = {};
  EXPECT_THROW_CODE(per_paper_rates(groups, [](int v) { return v == 1; }), ErrorCode::EmptyGroup);
}

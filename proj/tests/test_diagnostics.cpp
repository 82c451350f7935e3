#include "oracles.hpp"

#include <netdiff/diagnostics.hpp>
#include <netdiff/io.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace netdiff;

namespace {

const std::string kData = NETDIFF_DATA_DIR;

Village load(const std::string& file) { return load_villages(kData + "/" + file).front().village; }

}  // namespace

TEST(LogDiffExp, Examples) {
  EXPECT_NEAR(log_diff_exp(std::log(0.5), std::log(0.2)), std::log(0.3), 1e-15);
  EXPECT_EQ(log_diff_exp(-1.0, kNegInf), -1.0);
  EXPECT_EQ(log_diff_exp(-1.0, -1.0), kNegInf);
}

TEST(Betweenness, SubgraphValues) {
  const auto left = load("subgraph_left.json");
  const auto bl = ip_betweenness(left.network, left.seeds, {2}, {3, 4, 5, 6});
  EXPECT_DOUBLE_EQ(bl.b[0], 4.0);
  const auto right = load("subgraph_right.json");
  const auto br = ip_betweenness(right.network, right.seeds, {3, 4, 5}, {6});
  for (double b : br.b) EXPECT_NEAR(b, 1.0 / 3.0, 1e-15);
}

TEST(Betweenness, StarAndUnroutedFinals) {
  // IP 0 with intermediates 1, 2; node 3 is reached only through 4, which does not touch an IP
  const auto net = VillageNetwork::from_edges(5, {{0, 1}, {0, 2}, {1, 3}, {2, 3}, {4, 3}});
  const auto s0 = SeedVector::from_indices(5, {0});
  const auto b = ip_betweenness(net, s0, {1, 2, 4}, {3});
  EXPECT_DOUBLE_EQ(b.b[0], 0.5);
  EXPECT_DOUBLE_EQ(b.b[1], 0.5);
  EXPECT_DOUBLE_EQ(b.b[2], 0.0);
  const auto star = VillageNetwork::from_edges(4, {{0, 1}, {0, 2}, {0, 3}});
  const auto bs = ip_betweenness(star, SeedVector::from_indices(4, {0}), {1, 2, 3}, {});
  for (double x : bs.b) EXPECT_EQ(x, 0.0);
  const auto lonely = ip_betweenness(net, s0, {1}, {4});
  EXPECT_EQ(lonely.excluded_finals, (std::vector<std::size_t>{4}));
}

TEST(MistakeAudit, FirstKindOnLeftSubgraph) {
  const auto v = load("subgraph_left.json");
  VillageEvaluator ev(v);
  const auto audits = mistake_audit(ev, {0.5, 0.5}, 0, 1'000'000);
  ASSERT_EQ(audits.size(), 1u);
  const auto& a = audits[0];
  EXPECT_TRUE(a.chose_a);
  EXPECT_NEAR(a.single_chosen, 0.375 * std::pow(0.75, 4), 1e-12);
  EXPECT_NEAR(a.single_alternative, 0.25 * 0.625, 1e-12);
  EXPECT_EQ(a.verdict, Verdict::mistake1);
  EXPECT_EQ(a.in_degree, 2u);
  EXPECT_EQ(a.out_degree, 4u);
  EXPECT_EQ(mistake_count(audits), 1u);
}

TEST(MistakeAudit, SecondKindOnRightSubgraph) {
  const auto v = load("subgraph_right.json");
  VillageEvaluator ev(v);
  const double p = 0.4, q = 0.6;
  const auto audits = mistake_audit(ev, {p, q}, 0, 1'000'000);
  ASSERT_EQ(audits.size(), 3u);
  const double chosen = std::pow((1 - q) * (1 - p * q), 3);  // all three trimmed to B
  const double r = 1 - std::pow(1 - q, 3);
  const double alternative = std::pow(q * (1 - p), 3) * (1 - p * r);
  for (const auto& a : audits) {
    EXPECT_FALSE(a.chose_a);
    EXPECT_EQ(a.group.size(), 3u);
    EXPECT_NEAR(a.group_chosen, chosen, 1e-12);
    EXPECT_NEAR(a.group_alternative, alternative, 1e-12);
    EXPECT_GT(a.single_chosen, a.single_alternative);  // a single flip would not reveal it
    EXPECT_EQ(a.verdict, Verdict::mistake2);
  }
}

TEST(MistakeAudit, NoMistakesWhenNothingTrimmed) {
  const auto v = load("subgraph_right.json");
  VillageEvaluator ev(v);
  EXPECT_EQ(mistake_count(mistake_audit(ev, {0.4, 0.6}, 3, 1'000'000)), 0u);
}

TEST(ErrorCurve, EndsAtZeroAndMatchesEvaluator) {
  std::mt19937_64 gen(71);
  for (int rep = 0; rep < 10; ++rep) {
    const auto v = oracle::random_village(gen, 9, 4, 0.25, 1);
    VillageEvaluator ev(v);
    const auto c = error_curve(ev, {0.45, 0.55});
    ASSERT_EQ(c.max_d(), ev.max_pii_count());
    EXPECT_NEAR(c.epsilon.back(), 0.0, 1e-12);
    for (std::size_t d = 0; d <= c.max_d(); ++d) {
      EXPECT_EQ(c.loglik[d], ev.evaluate({0.45, 0.55}, d).log_likelihood);
      EXPECT_GE(c.epsilon[d], -1e-12);
    }
    // new masses add up to the exact likelihood
    LogSumExp acc;
    for (double m : c.new_mass) acc.add(m);
    EXPECT_NEAR(acc.value(), c.exact, 1e-10);
  }
}

TEST(ErrorCurve, SlopeIdentity) {
  std::mt19937_64 gen(73);
  for (int rep = 0; rep < 10; ++rep) {
    const auto v = oracle::random_village(gen, 9, 4, 0.3, 2);
    const auto c = error_curve(v, {0.3, 0.7});
    if (c.max_d() == 0 || c.new_mass[0] == kNegInf) continue;
    EXPECT_LE(slope_identity_check(c).max_discrepancy, 1e-10);
  }
}

TEST(ErrorCurve, PredictedSlope) {
  EXPECT_NEAR(predicted_slope(std::log(2.0), std::log(1.0)), std::log(1.5), 1e-15);
  EXPECT_EQ(predicted_slope(std::log(2.0), kNegInf), 0.0);
}

TEST(Convexity, RatiosViolationsAndKinks) {
  // masses 1, 1, 4, 1: ratios 1, 2, 1/6
  const std::vector<double> lm{0.0, 0.0, std::log(4.0), 0.0};
  const auto r = convexity_report(lm);
  EXPECT_NEAR(r.ratio[1], 1.0, 1e-15);
  EXPECT_NEAR(r.ratio[2], 2.0, 1e-15);
  EXPECT_NEAR(r.ratio[3], 1.0 / 6.0, 1e-15);
  EXPECT_EQ(r.violations, (std::vector<std::size_t>{2}));
  EXPECT_EQ(r.kinks, (std::vector<std::size_t>{2}));
  EXPECT_FALSE(r.convex());
  EXPECT_TRUE(convexity_report({0.0, std::log(0.5), std::log(0.25)}).convex());
}

TEST(Interpolation, EstimateAndCurvature) {
  const auto lin = interpolated_error_estimate({-5.0, -4.0, -3.0}, 5);
  EXPECT_DOUBLE_EQ(lin.estimate, 5.0);
  EXPECT_EQ(lin.curvature, Curvature::linear);
  EXPECT_TRUE(lin.conservative);
  const auto cvx = interpolated_error_estimate({-5.0, -3.0, -2.5}, 3);
  EXPECT_EQ(cvx.curvature, Curvature::convex);
  EXPECT_TRUE(cvx.conservative);
  const auto ccv = interpolated_error_estimate({-5.0, -4.5, -3.0}, 3);
  EXPECT_EQ(ccv.curvature, Curvature::concave);
  EXPECT_FALSE(ccv.conservative);
  EXPECT_EQ(interpolated_error_estimate({-2.0, -1.0}, 2).curvature, Curvature::unknown);
  EXPECT_THROW(interpolated_error_estimate({-1.0}, 2), InputError);
}

TEST(ErrorBound, DroppedBranchCountBoundHoldsWithoutMistakes) {
  // with one trimmed exchange, every dropped branch is at most the lightest retained one
  std::mt19937_64 gen(79);
  std::size_t checked = 0;
  for (int rep = 0; rep < 40; ++rep) {
    const auto v = oracle::random_village(gen, 5 + rep % 4, 3, 0.3, 2);
    VillageEvaluator ev(v);
    for (ParamPoint th : {ParamPoint{0.3, 0.4}, ParamPoint{0.6, 0.6}, ParamPoint{0.1, 0.9}}) {
      const auto e1 = eligible_piis(initial_state(v, th), v, th).size();
      for (std::size_t d = 0; d < e1; ++d) {
        if (mistake_count(mistake_audit(ev, th, d)) != 0) continue;
        const auto b = error_bound(ev, th, d);
        EXPECT_EQ(b.e1, e1);
        EXPECT_LE(log_missing_mass(ev, th, d), b.log_count_bound + 1e-9);
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 20u);
}

TEST(ErrorBound, PaperFactorAgainstBranchCount) {
  const auto v = load("toy_village2.json");
  VillageEvaluator ev(v);
  const auto b = error_bound(ev, {0.5, 0.5}, 1);
  EXPECT_NEAR(b.log_bound - b.log_min_mass, 3.0 * std::log(2.0), 1e-12);
  EXPECT_NEAR(b.log_count_bound - b.log_min_mass, std::log(14.0), 1e-12);
}

TEST(ErrorBound, ZeroWhenNothingDropped) {
  const auto v = load("toy_village2.json");
  VillageEvaluator ev(v);
  const auto b = error_bound(ev, {0.5, 0.5}, 4);
  EXPECT_EQ(b.e1, 4u);
  EXPECT_EQ(b.log_count_bound, kNegInf);
  EXPECT_THROW(error_bound(ev, {0.5, 0.5}, 5), InputError);
}

TEST(Budget, GuardsExactDiagnostics) {
  const auto v = load("toy_village1.json");
  EXPECT_THROW(error_curve(v, {0.5, 0.5}, std::nullopt, 3), BudgetError);
}

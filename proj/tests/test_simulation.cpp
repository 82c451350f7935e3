#include "oracles.hpp"

#include <netdiff/simulation.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <map>

using namespace netdiff;

namespace {

VillageNetwork single_edge() { return VillageNetwork::from_edges(2, {{0, 1}}); }

std::vector<std::size_t> informing_times(const SeedVector& s0, const InfoScenario& info) {
  std::vector<std::size_t> tau(s0.size(), oracle::kNever);
  for (std::size_t i = 0; i < s0.size(); ++i) {
    if (s0.is_ip(i)) {
      tau[i] = 0;
      continue;
    }
    for (std::size_t t = 1; t <= info.exchanges(); ++t)
      if (info.at(i, t)) {
        tau[i] = t;
        break;
      }
  }
  return tau;
}

}  // namespace

TEST(Rng, CounterBasedAndSplittable) {
  const CounterRng a(5), b(5);
  EXPECT_EQ(a.bits({1, 2, 3}), b.bits({1, 2, 3}));
  EXPECT_NE(a.bits({1, 2, 3}), a.bits({1, 3, 2}));
  EXPECT_NE(a.split(1).bits({0}), a.split(2).bits({0}));
  for (std::uint64_t k = 0; k < 1000; ++k) {
    const double u = a.uniform({k});
    EXPECT_GT(u, 0.0);
    EXPECT_LE(u, 1.0);
    EXPECT_LT(a.below(7, {k}), 7u);
  }
}

TEST(Simulator, NoTransmissionWhenQIsZero) {
  const auto net = VillageNetwork::from_edges(4, {{0, 1}, {1, 2}, {2, 3}});
  const auto s0 = SeedVector::from_indices(4, {0});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto sim = simulate_adoption(net, s0, 0.7, 0.0, 4, CounterRng(seed));
    for (std::size_t i = 1; i < 4; ++i) EXPECT_EQ(sim.outcomes.first_participation(i), 0u);
  }
}

TEST(Simulator, CertainSpreadFollowsDistance) {
  const auto net = VillageNetwork::from_edges(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}});
  const auto sim = simulate_adoption(net, SeedVector::from_indices(5, {0}), 1.0, 1.0, 4, CounterRng(1));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(sim.outcomes.first_participation(i), i + 1);
  EXPECT_EQ(sim.outcomes.first_participation(4), 0u);
  EXPECT_TRUE(sim.info.at(3, 3));
}

TEST(Simulator, SingleEdgeFrequency) {
  const auto net = single_edge();
  const auto s0 = SeedVector::from_indices(2, {0});
  const CounterRng root(99);
  const std::size_t reps = 100000;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < reps; ++r)
    if (simulate_adoption(net, s0, 0.5, 0.5, 2, root.split(r)).outcomes.at(1, 2)) ++hits;
  const double freq = static_cast<double>(hits) / reps;
  EXPECT_NEAR(freq, 0.25, 4.0 * std::sqrt(0.25 * 0.75 / reps));
}

TEST(Simulator, OutputsValidate) {
  std::mt19937_64 gen(3);
  for (int rep = 0; rep < 50; ++rep) EXPECT_NO_THROW(validate(oracle::random_village(gen, 9, 4, 0.2)));
}

TEST(Simulator, JointFrequencyMatchesModel) {
  // 4-node village, T = 3: empirical frequency of (Y, informing times) against the generative formula
  const auto net = VillageNetwork::from_edges(4, {{0, 1}, {0, 2}, {1, 3}, {2, 3}});
  const auto s0 = SeedVector::from_indices(4, {0});
  const ParamPoint th{0.6, 0.45};
  const CounterRng root(2024);
  const std::size_t reps = 60000;
  std::map<std::pair<std::vector<std::vector<int>>, std::vector<std::size_t>>, std::size_t> counts;
  for (std::size_t r = 0; r < reps; ++r) {
    const auto sim = simulate_adoption(net, s0, th.p, th.q, 3, root.split(r));
    ++counts[{sim.outcomes.to_rows(), informing_times(s0, sim.info)}];
  }
  double total = 0.0;
  for (const auto& [key, count] : counts) {
    const Village v{"v", net, s0, OutcomeMatrix::from_rows(key.first)};
    const double prob = oracle::generative_probability(v, th, key.second);
    total += prob;
    const double freq = static_cast<double>(count) / reps;
    EXPECT_NEAR(freq, prob, 5.0 * std::sqrt(prob * (1.0 - prob) / reps) + 1e-4);
  }
  // every observed event has positive model probability, and together they cover nearly all mass
  EXPECT_GT(total, 0.99);
}

TEST(DrawIp, RoughlyUniform) {
  const CounterRng root(8);
  std::vector<std::size_t> hits(5, 0);
  const std::size_t reps = 50000;
  for (std::size_t r = 0; r < reps; ++r) {
    const auto s0 = draw_ip(5, root.split(r));
    EXPECT_EQ(s0.bits().count(), 1u);
    for (std::size_t i = 0; i < 5; ++i)
      if (s0.is_ip(i)) ++hits[i];
  }
  for (auto h : hits) EXPECT_NEAR(static_cast<double>(h) / reps, 0.2, 4.0 * std::sqrt(0.16 / reps));
}

TEST(Submatrix, ExtractAndOffsets) {
  const auto full = VillageNetwork::from_edges(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 4}});
  const auto sub = extract_submatrix(full, 1, 3);
  EXPECT_EQ(sub, VillageNetwork::from_edges(3, {{0, 1}, {1, 2}}));
  EXPECT_THROW(extract_submatrix(full, 3, 3), InputError);
  EXPECT_EQ(submatrix_offset(0, 0, 2, 10, 4), 0u);
  EXPECT_EQ(submatrix_offset(0, 2, 2, 10, 4), 4u);
  EXPECT_EQ(submatrix_offset(9, 0, 2, 10, 4), 2u);
}

TEST(Generators, Shapes) {
  const auto ws = small_world(30, 2, 0.0, CounterRng(1));
  for (std::size_t i = 0; i < 30; ++i) EXPECT_EQ(ws.degree(i), 4u);
  const auto er = erdos_renyi(40, 0.0, CounterRng(1));
  EXPECT_EQ(er.edge_count(), 0u);
  EXPECT_EQ(erdos_renyi(6, 1.0, CounterRng(1)).edge_count(), 15u);
}

TEST(MeanAndSe, Examples) {
  const auto m = mean_and_se({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_NEAR(m.se, std::sqrt(5.0 / 3.0), 1e-15);
  EXPECT_TRUE(std::isnan(mean_and_se({1.0}).se));
  EXPECT_EQ(mean_and_se({}).count, 0u);
}

TEST(MonteCarlo, SmallRunIsReproducible) {
  MCConfig cfg;
  cfg.submatrix_size = 8;
  cfg.villages = 2;
  cfg.replications = 2;
  cfg.grid = Grid(Grid::axis(0.1, 0.9, 0.2), Grid::axis(0.1, 0.9, 0.2));
  cfg.sources = {small_world(20, 2, 0.2, CounterRng(4))};
  const auto a = run_monte_carlo(cfg), b = run_monte_carlo(cfg);
  ASSERT_EQ(a.size(), 2u);
  for (std::size_t r = 0; r < 2; ++r) {
    ASSERT_TRUE(a[r].ok) << a[r].error;
    EXPECT_EQ(a[r].offsets, b[r].offsets);
    ASSERT_EQ(a[r].trimmed.size(), b[r].trimmed.size());
    for (std::size_t d = 0; d < a[r].trimmed.size(); ++d) EXPECT_EQ(a[r].trimmed[d].loglik, b[r].trimmed[d].loglik);
  }
  const auto rows = summarize(a);
  ASSERT_FALSE(rows.empty());
  EXPECT_EQ(rows.back().label, "two-period");
  EXPECT_EQ(rows[rows.size() - 2].mean_abs_gap_p, 0.0);
}

TEST(MonteCarlo, SummarySkipsMissingEstimates) {
  ReplicationResult a, b;
  a.trimmed = {{0, 0.3, 0.4, -1.0, false}, {1, 0.5, 0.5, -0.5, false}};
  b.trimmed = {{0, std::nan(""), std::nan(""), kNegInf, false}, {1, 0.7, 0.3, -0.7, false}};
  a.two_period = {0, 0.4, 0.4, -1.0, false};
  b.two_period = {0, 0.6, 0.2, -1.0, false};
  const auto rows = summarize({a, b});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].p.count, 1u);
  EXPECT_NEAR(rows[0].mean_abs_gap_p, 0.2, 1e-15);
  EXPECT_EQ(rows[1].p.count, 2u);
  EXPECT_DOUBLE_EQ(rows[2].q.mean, 0.3);
}

TEST(MonteCarlo, ConfigChecks) {
  MCConfig cfg;
  EXPECT_THROW(cfg.check(), InputError);
  cfg.sources = {small_world(10, 2, 0.1, CounterRng(1))};
  EXPECT_THROW(cfg.check(), InputError);  // N = 20 exceeds the source size
  cfg.submatrix_size = 10;
  EXPECT_NO_THROW(cfg.check());
}

#include <netdiff/model.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace netdiff;

namespace {

VillageNetwork path3() { return VillageNetwork::from_dense({{0, 1, 0}, {1, 0, 1}, {0, 1, 0}}); }

Village make_village(VillageNetwork net, std::vector<std::size_t> ips, std::vector<std::vector<int>> rows) {
  const auto n = net.size();
  return Village{"v", std::move(net), SeedVector::from_indices(n, ips), OutcomeMatrix::from_rows(rows)};
}

}  // namespace

TEST(Network, DenseAndEdgeListAgree) {
  const auto a = path3();
  const auto b = VillageNetwork::from_edges(3, {{0, 1}, {1, 2}});
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.degree(1), 2u);
  EXPECT_EQ(a.edge_count(), 2u);
  EXPECT_EQ(a.max_degree(), 2u);
  EXPECT_EQ(a.to_dense(), (std::vector<std::vector<int>>{{0, 1, 0}, {1, 0, 1}, {0, 1, 0}}));
}

TEST(Network, RejectsAsymmetryAndDiagonal) {
  EXPECT_THROW(VillageNetwork::from_dense({{0, 1}, {0, 0}}), InputError);
  EXPECT_THROW(VillageNetwork::from_dense({{1, 0}, {0, 0}}), InputError);
  EXPECT_THROW(VillageNetwork::from_dense({{0, 2}, {2, 0}}), InputError);
  EXPECT_THROW(VillageNetwork::from_dense({{0, 1, 0}, {1, 0}}), InputError);
}

TEST(Network, Distances) {
  const auto net = path3();
  StatusSet src(3);
  src.set(0);
  const auto d = net.distances_from(src);
  EXPECT_EQ(d[0], 0u);
  EXPECT_EQ(d[1], 1u);
  EXPECT_EQ(d[2], 2u);
}

TEST(Seeds, NeedsAnInjectionPoint) {
  EXPECT_THROW(SeedVector(StatusSet(3)), InputError);
  EXPECT_THROW(SeedVector::from_indices(3, {3}), InputError);
  EXPECT_TRUE(SeedVector::from_indices(3, {2}).is_ip(2));
}

TEST(Outcomes, RowsAndFirstParticipation) {
  const auto y = OutcomeMatrix::from_rows({{0, 1, 1}, {0, 0, 0}});
  EXPECT_EQ(y.periods(), 3u);
  EXPECT_EQ(y.first_participation(0), 2u);
  EXPECT_EQ(y.first_participation(1), 0u);
  EXPECT_FALSE(y.at(0, 0));
  EXPECT_EQ(y.truncated(2).to_rows(), (std::vector<std::vector<int>>{{0, 1}, {0, 0}}));
  EXPECT_THROW(OutcomeMatrix::from_rows({{0, 1}, {0}}), InputError);
  EXPECT_THROW(OutcomeMatrix::from_rows({{0, 2}}), InputError);
}

TEST(Validation, AcceptsConsistentData) {
  EXPECT_NO_THROW(validate(make_village(path3(), {0}, {{1, 1, 1}, {0, 1, 1}, {0, 0, 1}})));
  EXPECT_NO_THROW(validate(make_village(path3(), {0}, {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}})));
}

TEST(Validation, RejectsImpossibleData) {
  // dropping out
  EXPECT_THROW(validate(make_village(path3(), {0}, {{1, 0, 0}, {0, 0, 0}, {0, 0, 0}})), ValidationError);
  // period-1 participation by a non-IP
  EXPECT_THROW(validate(make_village(path3(), {0}, {{1, 1, 1}, {1, 1, 1}, {0, 0, 0}})), ValidationError);
  // IP opting out and joining later
  EXPECT_THROW(validate(make_village(path3(), {0}, {{0, 1, 1}, {0, 0, 0}, {0, 0, 0}})), ValidationError);
  // too far from the IP: distance 2 cannot participate before period 3
  try {
    validate(make_village(path3(), {0}, {{1, 1, 1}, {0, 0, 0}, {0, 1, 1}}));
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.individual(), 2u);
    EXPECT_EQ(e.period(), 2u);
  }
}

TEST(Params, CheckedRange) {
  EXPECT_NO_THROW(ParamPoint::checked(0.0, 1.0));
  EXPECT_THROW(ParamPoint::checked(-0.1, 0.5), InputError);
  EXPECT_THROW(ParamPoint::checked(0.5, 1.5), InputError);
}

TEST(Reception, Examples) {
  EXPECT_DOUBLE_EQ(reception_probability(1, 0.5), 0.5);
  EXPECT_DOUBLE_EQ(reception_probability(0, 0.7), 0.0);
  for (double q : {0.1, 0.5, 0.83}) {
    const double quartic = 4 * q - 6 * q * q + 4 * q * q * q - q * q * q * q;
    EXPECT_NEAR(reception_probability(4, q), quartic, 1e-15);
  }
  EXPECT_DOUBLE_EQ(reception_probability(4, 0.5), 0.9375);
}

TEST(Reception, VectorForm) {
  const auto net = VillageNetwork::from_edges(4, {{0, 1}, {0, 2}, {1, 2}, {2, 3}});
  StatusSet s(4);
  s.set(0);
  s.set(1);
  const auto r = reception_probabilities(net, s, 0.5);
  EXPECT_DOUBLE_EQ(r.r[2], 0.75);
  EXPECT_DOUBLE_EQ(r.r[3], 0.0);
  EXPECT_DOUBLE_EQ(reception_probabilities(net, s, 0.0).r[2], 0.0);
  EXPECT_DOUBLE_EQ(reception_probabilities(net, s, 1.0).r[2], 1.0);
  EXPECT_THROW(reception_probabilities(net, StatusSet(3), 0.5), InputError);
}

TEST(Reception, MonotoneInInformedNeighbours) {
  for (double q : {0.05, 0.3, 0.9})
    for (std::size_t k = 0; k < 8; ++k) EXPECT_LE(reception_probability(k, q), reception_probability(k + 1, q));
}

TEST(Densities, OutcomeExamples) {
  EXPECT_DOUBLE_EQ(outcome_density(true, true, true, true, 0.3), 1.0);
  EXPECT_DOUBLE_EQ(outcome_density(true, false, true, false, 0.3), 0.3);
  EXPECT_DOUBLE_EQ(first_outcome_density(true, false, 0.4), 0.0);
  EXPECT_DOUBLE_EQ(first_outcome_density(true, true, 0.4), 0.4);
  EXPECT_DOUBLE_EQ(first_outcome_density(false, true, 0.4), 0.6);
  EXPECT_DOUBLE_EQ(first_outcome_density(false, false, 0.4), 1.0);
}

TEST(Densities, InfoExamples) {
  EXPECT_DOUBLE_EQ(info_density(true, false, 0.3, true), 1.0);
  EXPECT_DOUBLE_EQ(info_density(true, false, 0.25, false), 0.25);
  EXPECT_DOUBLE_EQ(info_density(false, true, 0.25, false), 0.0);
  EXPECT_DOUBLE_EQ(info_density(false, false, 0.25, false), 0.75);
}

TEST(Densities, AreConditionalDistributions) {
  for (double p : {0.0, 0.2, 0.7, 1.0})
    for (int yp = 0; yp < 2; ++yp)
      for (int sp = 0; sp < 2; ++sp)
        for (int sp2 = 0; sp2 < 2; ++sp2) {
          const double a = outcome_density(false, yp, sp, sp2, p), b = outcome_density(true, yp, sp, sp2, p);
          EXPECT_GE(a, 0.0);
          EXPECT_GE(b, 0.0);
          EXPECT_NEAR(a + b, 1.0, 1e-15);
        }
  for (double r : {0.0, 0.4, 1.0})
    for (int sp = 0; sp < 2; ++sp)
      EXPECT_NEAR(info_density(false, sp, r, false) + info_density(true, sp, r, false), 1.0, 1e-15);
}

TEST(Threshold, Examples) {
  EXPECT_DOUBLE_EQ(trim_threshold(0.5), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(trim_threshold(0.0), 0.5);
  EXPECT_DOUBLE_EQ(trim_threshold(1.0), 1.0);
  for (double p : {0.1, 0.45, 0.8}) {
    const auto c = PIIContribution::from(trim_threshold(p), p);
    EXPECT_NEAR(c.a, c.b, 1e-15);
  }
}

TEST(Threshold, EquivalenceCurve) {
  EXPECT_DOUBLE_EQ(equivalence_curve(1, 0.8), 2.0 - 1.0 / 0.8);
  EXPECT_NEAR(equivalence_curve(2, 0.5), 2.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(equivalence_curve(1, 0.5), 0.0);
  EXPECT_LT(equivalence_curve(1, 0.3), 0.0);
  EXPECT_THROW(equivalence_curve(0, 0.5), InputError);
  // on the curve the threshold reception probability is reached exactly
  const double q = 0.35, p = equivalence_curve(3, q);
  EXPECT_NEAR(reception_probability(3, q), trim_threshold(p), 1e-14);
}

TEST(Contribution, SumAndMonotonicity) {
  const double p = 0.3;
  double prev = 2.0;
  for (double r = 0.0; r <= 1.0; r += 0.125) {
    const auto c = PIIContribution::from(r, p);
    EXPECT_NEAR(c.total(), 1.0 - p * r, 1e-15);
    EXPECT_LT(c.total(), prev);
    prev = c.total();
    EXPECT_DOUBLE_EQ(c.c, 1.0);
  }
}

TEST(Classify, Kinds) {
  const auto y = OutcomeMatrix::from_rows({{1, 1}, {0, 1}, {0, 0}, {0, 0}, {0, 0}});
  ReceptionVector r{{0.0, 0.5, 0.0, 0.5, 0.5}, 1};
  StatusSet opted(5);
  opted.set(4);
  const auto c = classify(y, 2, r, opted);
  EXPECT_EQ(c[0].kind, IndividualKind::FormerParticipant);
  EXPECT_EQ(c[1].kind, IndividualKind::NewParticipant);
  EXPECT_EQ(c[2].kind, IndividualKind::OutOfReach);
  EXPECT_EQ(c[3], (IndividualClass{IndividualKind::PII, PIIState::Free}));
  EXPECT_EQ(c[4], (IndividualClass{IndividualKind::PII, PIIState::PrevInformed}));
}

TEST(Classify, ImpossibleNewParticipant) {
  const auto y = OutcomeMatrix::from_rows({{1, 1}, {0, 1}});
  EXPECT_THROW(classify(y, 2, ReceptionVector{{0.0, 0.0}, 1}, StatusSet(2)), ValidationError);
  EXPECT_THROW(classify(y, 1, ReceptionVector{{0.0, 0.5}, 1}, StatusSet(2)), InputError);
}

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "srst/oracle.hpp"

using namespace srst::oracle;

namespace {

constexpr double kTol = 1e-12;

// Robust accuracy at x is p(Y = c | x) when every ball point is labelled c,
// and zero otherwise. Independent of the implementation's max-over-ball loop.
double robust_risk_by_monochrome(const FiniteInstance& inst) {
  double acc = 0.0;
  for (std::size_t x = 0; x < inst.size(); ++x) {
    std::set<int> labels;
    for (std::size_t j : inst.neighborhood[x]) labels.insert(inst.classifier[j]);
    if (labels.size() == 1) acc += inst.marginal[x] * inst.conditionals[x][static_cast<std::size_t>(*labels.begin())];
  }
  return 1.0 - acc;
}

FiniteInstance two_point_instance() {
  FiniteInstance inst;
  inst.num_classes = 2;
  inst.neighborhood = {{0, 1}, {1}};
  inst.classifier = {0, 1};
  inst.conditionals = {{1.0, 0.0}, {1.0, 0.0}};
  inst.marginal = {0.5, 0.5};
  return inst;
}

// Three classes A=0, B=1, C=2. Point 0 (F=A) sees point 1 (F=B) and point 2 (F=C); Y = B surely.
FiniteInstance two_flip_targets() {
  FiniteInstance inst;
  inst.num_classes = 3;
  inst.neighborhood = {{0, 1, 2}, {1}, {2}};
  inst.classifier = {0, 1, 2};
  inst.conditionals = {{0, 1, 0}, {0, 1, 0}, {0, 0, 1}};
  inst.marginal = {1.0, 0.0, 0.0};
  return inst;
}

}  // namespace

TEST(WorstCasePoint, Examples) {
  FiniteInstance inst;
  inst.num_classes = 2;
  inst.neighborhood = {{0}, {1, 0}};
  inst.classifier = {0, 1};
  inst.conditionals = {{0.5, 0.5}, {0.5, 0.5}};
  inst.marginal = {0.5, 0.5};
  EXPECT_EQ(worst_case_point(inst, 0), 0u);
  EXPECT_EQ(worst_case_point(inst, 1), 0u);

  FiniteInstance big;
  big.num_classes = 2;
  big.neighborhood.resize(8);
  for (std::size_t i = 0; i < 8; ++i) big.neighborhood[i] = {i};
  big.neighborhood[0] = {0, 7, 5, 3};
  big.classifier = {0, 0, 0, 1, 0, 0, 0, 1};
  big.conditionals.assign(8, {0.5, 0.5});
  big.marginal.assign(8, 0.125);
  EXPECT_EQ(worst_case_point(big, 0), 3u);
  EXPECT_EQ(worst_case_point(big, 0, TieBreak::highest_id), 7u);
  EXPECT_THROW(worst_case_point(big, 8), std::out_of_range);
}

TEST(ExactRisks, HandEnumeratedTwoPointInstance) {
  const RiskReport r = exact_risks(two_point_instance());
  EXPECT_NEAR(r.r_nat, 0.5, kTol);
  EXPECT_NEAR(r.r_bdy, 0.5, kTol);
  EXPECT_NEAR(r.r_rob, 1.0, kTol);
  EXPECT_NEAR(r.bound_thm31, 1.0, kTol);
  EXPECT_NEAR(r.bound_thm32, 1.0, kTol);
}

TEST(ExactRisks, ConstantClassifierOverBallsHasNoBoundaryRisk) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    FiniteInstance inst = random_instance(seed, 8, 3, 0.5);
    for (int& c : inst.classifier) c = 1;
    const RiskReport r = exact_risks(inst);
    EXPECT_EQ(r.r_bdy, 0.0);
    EXPECT_NEAR(r.r_rob, r.r_nat, kTol);
  }
}

TEST(ExactRisks, PerfectClassifierWithoutFlipsHasZeroRisk) {
  FiniteInstance inst;
  inst.num_classes = 3;
  inst.neighborhood = {{0, 1}, {1, 0}, {2}};
  inst.classifier = {2, 2, 0};
  inst.conditionals = {{0, 0, 1}, {0, 0, 1}, {1, 0, 0}};
  inst.marginal = {0.2, 0.3, 0.5};
  const RiskReport r = exact_risks(inst);
  EXPECT_EQ(r.r_nat, 0.0);
  EXPECT_EQ(r.r_bdy, 0.0);
  EXPECT_EQ(r.r_rob, 0.0);
  EXPECT_EQ(r.bound_thm31, 0.0);
  EXPECT_EQ(r.bound_thm32, 0.0);
}

TEST(ExactRisks, RejectsInvalidInstances) {
  FiniteInstance inst = two_point_instance();
  inst.neighborhood[1] = {0};
  EXPECT_THROW(exact_risks(inst), std::invalid_argument);
  inst = two_point_instance();
  inst.marginal = {0.5, 0.6};
  EXPECT_THROW(exact_risks(inst), std::invalid_argument);
  inst = two_point_instance();
  inst.conditionals[0] = {0.7, 0.7};
  EXPECT_THROW(exact_risks(inst), std::invalid_argument);
  inst = two_point_instance();
  inst.classifier[0] = 2;
  EXPECT_THROW(exact_risks(inst), std::invalid_argument);
}

// Decomposition, monochrome cross-check and both theorem bounds, under both
// tie rules, over seeded random instances.
TEST(ExactRisks, DecompositionAndBoundsOnRandomInstances) {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const FiniteInstance inst = sweep_instance(seed);
    for (TieBreak tie : {TieBreak::lowest_id, TieBreak::highest_id}) {
      const RiskReport r = exact_risks(inst, tie);
      EXPECT_NEAR(r.r_rob, r.r_nat + r.r_bdy, kTol) << "seed " << seed;
      EXPECT_NEAR(r.r_rob, robust_risk_by_monochrome(inst), kTol) << "seed " << seed;
      EXPECT_LE(r.r_rob, r.bound_thm31 + kTol) << "seed " << seed;
      EXPECT_LE(r.r_rob, r.bound_thm32 + kTol) << "seed " << seed;
    }
  }
}

TEST(LemmaA1, BinaryInstancesGiveEquality) {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const FiniteInstance inst = random_instance(seed, 1 + seed % 12, 2, 0.1 + 0.7 * static_cast<double>(seed % 10) / 10);
    for (TieBreak tie : {TieBreak::lowest_id, TieBreak::highest_id}) {
      const LemmaReport rep = lemma_a1_check(inst, tie);
      EXPECT_EQ(rep.lhs, rep.rhs) << "seed " << seed;
      for (const LemmaPoint& p : rep.per_point) EXPECT_EQ(p.lhs, p.rhs);
    }
  }
}

TEST(LemmaA1, NoFlipsGivesZeroPair) {
  FiniteInstance inst = random_instance(3, 6, 4, 0.6);
  for (int& c : inst.classifier) c = 2;
  const LemmaReport rep = lemma_a1_check(inst);
  for (const LemmaPoint& p : rep.per_point) {
    EXPECT_EQ(p.lhs, 0.0);
    EXPECT_EQ(p.rhs, 0.0);
  }
}

// Flips to two different classes: z is the lower-id flip (class B = Y), so the
// right side is 0 while the C-labelled neighbour makes the left side 1.
TEST(LemmaA1, ThreeClassTwoFlipTargetsReportsBothValues) {
  const LemmaReport low = lemma_a1_check(two_flip_targets(), TieBreak::lowest_id);
  EXPECT_EQ(low.per_point[0].lhs, 1.0);
  EXPECT_EQ(low.per_point[0].rhs, 0.0);
  const LemmaReport high = lemma_a1_check(two_flip_targets(), TieBreak::highest_id);
  EXPECT_EQ(high.per_point[0].lhs, 1.0);
  EXPECT_EQ(high.per_point[0].rhs, 1.0);
}

// z itself witnesses the left event whenever the right one fires.
TEST(LemmaA1, RightSideNeverExceedsLeftSide) {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const FiniteInstance inst = sweep_instance(seed);
    for (TieBreak tie : {TieBreak::lowest_id, TieBreak::highest_id}) {
      for (const LemmaPoint& p : lemma_a1_check(inst, tie).per_point) EXPECT_LE(p.rhs, p.lhs + kTol);
    }
  }
}

TEST(BinarySurrogate, DominatesZeroOneLoss) {
  EXPECT_DOUBLE_EQ(binary_surrogate(0.0), 1.0);
  EXPECT_NEAR(binary_surrogate(2.0), std::log1p(std::exp(-2.0)) / std::log(2.0), 1e-15);
  EXPECT_TRUE(std::isfinite(binary_surrogate(-1000.0)));
  for (double t = -20.0; t <= 20.0; t += 0.01) {
    EXPECT_GE(binary_surrogate(t), t <= 0.0 ? 1.0 : 0.0);
  }
}

TEST(BinaryBounds, SameSignBallsUseSelfAsZ) {
  BinaryInstance inst;
  inst.score = {1.5, 0.5, -2.0};
  inst.neighborhood = {{0, 1}, {1, 0}, {2}};
  inst.p_positive = {0.9, 0.4, 0.2};
  inst.marginal = {0.5, 0.25, 0.25};
  inst.lambda = 2.0;
  const BinaryBounds b = binary_bounds(inst);
  auto phi = [](double t) { return std::log1p(std::exp(-t)) / std::log(2.0); };
  double first = 0.0, trades = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double f = inst.score[i], p = inst.p_positive[i];
    first += inst.marginal[i] * (p * phi(f) + (1 - p) * phi(-f));
    trades += inst.marginal[i] * phi(f * f / inst.lambda);
  }
  // no flips: z = x, so F(x) = F(z) and the arow factor p(Y != F(z)) matches r_nat's weight
  double arow = 0.0, cow = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double f = inst.score[i], p = inst.p_positive[i];
    const double p_fx = f >= 0 ? p : 1 - p;
    arow += inst.marginal[i] * phi(f * f / inst.lambda) * (1 - p_fx);
    cow += inst.marginal[i] * phi(f * f / inst.lambda) * p_fx;
  }
  EXPECT_NEAR(b.rhs_trades, first + trades, 1e-12);
  EXPECT_NEAR(b.rhs_semiarow, first + arow, 1e-12);
  EXPECT_NEAR(b.rhs_semicow, first + cow, 1e-12);
}

TEST(BinaryBounds, RobustRiskBelowEveryBoundAndCorollariesBelowTrades) {
  for (double lambda : {0.5, 1.0, 5.0}) {
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      const BinaryInstance inst = sweep_binary_instance(seed, lambda);
      for (TieBreak tie : {TieBreak::lowest_id, TieBreak::highest_id}) {
        const BinaryBounds b = binary_bounds(inst, tie);
        EXPECT_LE(b.r_rob, b.rhs_semiarow + kTol) << "seed " << seed;
        EXPECT_LE(b.r_rob, b.rhs_semicow + kTol) << "seed " << seed;
        EXPECT_LE(b.r_rob, b.rhs_trades + kTol) << "seed " << seed;
        EXPECT_LE(b.rhs_semiarow, b.rhs_trades + kTol);
        EXPECT_LE(b.rhs_semicow, b.rhs_trades + kTol);
      }
    }
  }
}

TEST(BinaryInstance, SignZeroIsPositiveClass) {
  BinaryInstance inst;
  inst.score = {0.0, -0.1};
  inst.neighborhood = {{0}, {1}};
  inst.p_positive = {0.5, 0.5};
  inst.marginal = {0.5, 0.5};
  EXPECT_EQ(inst.as_finite().classifier, (std::vector<int>{1, 0}));
  inst.lambda = 0.0;
  EXPECT_THROW(inst.validate(), std::invalid_argument);
}

TEST(RandomInstance, DeterministicAndDensityExtremes) {
  const FiniteInstance a = random_instance(17, 9, 3, 0.4), b = random_instance(17, 9, 3, 0.4);
  EXPECT_EQ(a.neighborhood, b.neighborhood);
  EXPECT_EQ(a.classifier, b.classifier);
  EXPECT_EQ(a.conditionals, b.conditionals);
  EXPECT_EQ(a.marginal, b.marginal);

  const FiniteInstance lone = random_instance(4, 7, 3, 0.0);
  for (std::size_t i = 0; i < lone.size(); ++i) EXPECT_EQ(lone.neighborhood[i], std::vector<std::size_t>{i});
  EXPECT_EQ(exact_risks(lone).r_bdy, 0.0);

  const FiniteInstance full = random_instance(4, 7, 3, 1.0);
  for (const auto& ball : full.neighborhood) {
    EXPECT_EQ(std::set<std::size_t>(ball.begin(), ball.end()).size(), 7u);
  }
  EXPECT_THROW(random_instance(1, 0, 2, 0.5), std::invalid_argument);
  EXPECT_THROW(random_instance(1, 3, 1, 0.5), std::invalid_argument);
  EXPECT_THROW(random_instance(1, 3, 2, 1.5), std::invalid_argument);
}

TEST(RandomInstance, SymmetricBallsAreSymmetric) {
  const FiniteInstance inst = random_instance(8, 10, 2, 0.4, true);
  for (std::size_t i = 0; i < inst.size(); ++i) {
    for (std::size_t j : inst.neighborhood[i]) {
      const auto& back = inst.neighborhood[j];
      EXPECT_NE(std::find(back.begin(), back.end(), i), back.end());
    }
  }
}

TEST(SweepShape, WithinRequestedRanges) {
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    const SweepShape s = sweep_shape(seed, 12, 4);
    EXPECT_GE(s.n_points, 1u);
    EXPECT_LE(s.n_points, 12u);
    EXPECT_GE(s.num_classes, 2u);
    EXPECT_LE(s.num_classes, 4u);
    EXPECT_GE(s.ball_density, 0.05);
    EXPECT_LE(s.ball_density, 0.8);
  }
}

#include "crlmix/priorspec.hpp"
#include "crlmix/state.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace crlmix;

TEST(Variant, NamesRoundTrip) {
  for (Variant v : {Variant::General, Variant::CommonWeights, Variant::CommonAtoms}) {
    EXPECT_EQ(parse_variant(variant_name(v)), v);
  }
  EXPECT_EQ(parse_variant("cw"), Variant::CommonWeights);
  EXPECT_EQ(parse_variant("common_atoms"), Variant::CommonAtoms);
  EXPECT_THROW(parse_variant("mixture"), std::invalid_argument);
  EXPECT_TRUE(uses_lsbp(Variant::CommonAtoms));
  EXPECT_FALSE(uses_lsbp(Variant::CommonWeights));
  EXPECT_FALSE(uses_regression_atoms(Variant::CommonAtoms));
}

TEST(BaselinePrior, GeneralDefaults) {
  const auto spec = baseline_prior(4, 3, Variant::General);
  EXPECT_EQ(spec.truncation, kConservativeTruncation);
  ASSERT_EQ(spec.regression_atoms.size(), 3u);
  for (const auto& a : spec.regression_atoms) {
    EXPECT_TRUE(a.mu0.isZero());
    EXPECT_TRUE(a.lambda0.isApprox(100.0 * MatrixXd::Identity(3, 3)));
    EXPECT_DOUBLE_EQ(a.kappa0, 5.0);
    EXPECT_DOUBLE_EQ(a.nu0, 5.0);
  }
  ASSERT_TRUE(spec.lsbp.has_value());
  EXPECT_FALSE(spec.dp.has_value());
  EXPECT_TRUE(spec.lsbp->cov0.isApprox(100.0 * MatrixXd::Identity(3, 3)));
}

TEST(BaselinePrior, OtherVariants) {
  const auto cw = baseline_prior(3, 2, Variant::CommonWeights, 10);
  ASSERT_TRUE(cw.dp.has_value());
  EXPECT_DOUBLE_EQ(cw.dp->a_alpha, 2.0);
  EXPECT_DOUBLE_EQ(cw.dp->b_alpha, 1.0);
  EXPECT_FALSE(cw.lsbp.has_value());

  const auto ca = baseline_prior(3, 2, Variant::CommonAtoms, 10);
  ASSERT_EQ(ca.scalar_atoms.size(), 2u);
  EXPECT_TRUE(ca.regression_atoms.empty());
  EXPECT_DOUBLE_EQ(ca.scalar_atoms[0].b0, 5.0);
  EXPECT_THROW(baseline_prior(1, 2, Variant::General), std::invalid_argument);
}

TEST(ModelSpec, ValidationCatchesInconsistentBlocks) {
  auto spec = baseline_prior(3, 2, Variant::General, 5);
  auto bad = spec;
  bad.regression_atoms[1].nu0 = 3.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = spec;
  bad.regression_atoms[0].lambda0(0, 1) = 5.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = spec;
  bad.dp = DpWeightPrior{1.0, 1.0};
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = spec;
  bad.truncation = 0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = spec;
  bad.lsbp->gamma0 = VectorXd::Zero(3);
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  spec.truncation = 1;
  EXPECT_NO_THROW(spec.validate());
}

TEST(MonotonePrior, WorkedExampleExact) {
  const auto mp = monotone_prior_solve(10, 10, 6, 2, Monotonicity::Decreasing, 4, 4, 2);
  EXPECT_EQ(mp.mu0(0), -2.0);
  EXPECT_EQ(mp.mu0(1), -0.9);
  EXPECT_EQ(mp.lambda0(0, 0), 0.8);
  EXPECT_EQ(mp.lambda0(1, 1), 0.072);
  EXPECT_EQ(mp.lambda0(0, 1), 0.0);
  EXPECT_EQ(mp.lambda0(1, 0), 0.0);
}

TEST(MonotonePrior, IncreasingFlipsSlope) {
  const auto mp = monotone_prior_solve(10, 10, 6, 2, Monotonicity::Increasing, 4, 4, 2);
  EXPECT_EQ(mp.mu0(1), 0.9);
  EXPECT_EQ(mp.mu0(0), -2.0);
}

TEST(MonotonePrior, Constraints) {
  EXPECT_THROW(monotone_prior_solve(10, 8, 6, 2, Monotonicity::Decreasing, 4, 4, 2), std::invalid_argument);
  EXPECT_THROW(monotone_prior_solve(-1, 10, 6, 2, Monotonicity::Decreasing, 4, 4, 2), std::invalid_argument);
  EXPECT_THROW(monotone_prior_solve(10, 10, 6, 2, Monotonicity::Decreasing, 4, 3, 2), std::invalid_argument);
  EXPECT_THROW(monotone_prior_solve(10, 10, 6, 2, Monotonicity::Decreasing, 4, 4, 3), std::invalid_argument);
}

TEST(MonotonePrior, ImpliedSlopeVarianceIsConsistent) {
  // Prior expected variance of the slope, Lambda0 (kappa0 + 1) / (kappa0 (nu0 - p - 1)),
  // equals the half-width fraction of the parabola gap.
  const double kappa0 = 4.0;
  const double nu0 = 6.0;
  const auto mp = monotone_prior_solve(5, 12, 3, 4, Monotonicity::Decreasing, kappa0, nu0, 2);
  const double scale = (kappa0 + 1.0) / (kappa0 * (nu0 - 3.0));
  EXPECT_NEAR(mp.lambda0(0, 0) * scale, (12.0 - 3.0 - 4.0) / 2.0, 1e-12);
  EXPECT_NEAR(mp.lambda0(1, 1) * scale, (12.0 + 3.0 + 4.0) / (2.0 * 25.0), 1e-12);
  EXPECT_NEAR(mp.mu0(0), 0.5, 1e-15);
}

TEST(ChooseTruncation, ZeroMeanWeightPrior) {
  RngStream rng(1, 1);
  const std::vector<VectorXd> reps{(VectorXd(2) << 1.0, -2.0).finished(),
                                   (VectorXd(2) << 1.0, 2.0).finished()};
  const VectorXd g0 = VectorXd::Zero(2);
  const MatrixXd cov = 100.0 * MatrixXd::Identity(2, 2);
  EXPECT_EQ(choose_truncation(g0, cov, reps, 0.99, rng), 7);
  EXPECT_EQ(choose_truncation(g0, cov, reps, 1.0 - 1e-6, rng), 20);
}

TEST(ChooseTruncation, PositiveMeanNeedsFewer) {
  RngStream rng(1, 2);
  const std::vector<VectorXd> reps{(VectorXd(1) << 1.0).finished()};
  const VectorXd g0 = (VectorXd(1) << 2.0).finished();
  const MatrixXd cov = MatrixXd::Zero(1, 1);
  // E(V) = logistic(2) exactly; (1 - 0.8808)^L <= 1e-6 first at L = 7.
  EXPECT_EQ(choose_truncation(g0, cov, reps, 1.0 - 1e-6, rng), 7);
  EXPECT_THROW(choose_truncation(g0, cov, {}, 0.99, rng), std::invalid_argument);
  EXPECT_THROW(choose_truncation(g0, cov, reps, 1.0, rng), std::invalid_argument);
}

TEST(PriorExpectedProbs, BaselineHalvesMass) {
  RngStream rng(2, 1);
  const auto spec = baseline_prior(4, 2, Variant::General, 5);
  const VectorXd x = (VectorXd(2) << 1.0, 0.7).finished();
  const auto [mean, se] = prior_expected_probs(spec, x, 40000, rng);
  const double target[4] = {0.5, 0.25, 0.125, 0.125};
  for (int j = 0; j < 4; ++j) {
    EXPECT_NEAR(mean(j), target[j], 4.0 * se(j) + 1e-12);
  }
}

TEST(PriorExpectedProbs, ScalarAtomsHalveMass) {
  RngStream rng(2, 2);
  const auto spec = baseline_prior(3, 2, Variant::CommonAtoms, 5);
  const auto [mean, se] = prior_expected_probs(spec, VectorXd::Ones(2), 40000, rng);
  EXPECT_NEAR(mean(0), 0.5, 4.0 * se(0));
  EXPECT_NEAR(mean(1), 0.25, 4.0 * se(1));
}

TEST(SampleNiw, MeanOfSigma) {
  RngStream rng(3, 1);
  RegressionAtomPrior prior{VectorXd::Ones(2), MatrixXd::Identity(2, 2) * 6.0, 2.0, 8.0};
  MatrixXd sum = MatrixXd::Zero(2, 2);
  VectorXd msum = VectorXd::Zero(2);
  const int n = 50000;
  for (int k = 0; k < n; ++k) {
    const auto [mu, sigma] = sample_niw(prior, rng);
    sum += sigma;
    msum += mu;
  }
  EXPECT_LT((sum / n - MatrixXd::Identity(2, 2) * 6.0 / 5.0).cwiseAbs().maxCoeff(), 0.03);
  EXPECT_LT((msum / n - VectorXd::Ones(2)).cwiseAbs().maxCoeff(), 0.02);
}

TEST(Weights, StickBreakingSumsToOne) {
  const VectorXd breaks = (VectorXd(3) << 0.5, 0.5, 0.5).finished();
  const VectorXd w = weights_from_breaks(breaks);
  EXPECT_DOUBLE_EQ(w(0), 0.5);
  EXPECT_DOUBLE_EQ(w(3), 0.125);
  EXPECT_NEAR(w.sum(), 1.0, 1e-15);
  EXPECT_LT((stick_log_weights(breaks).array().exp().matrix() - w).norm(), 1e-15);
  const VectorXd eta = (VectorXd(2) << 0.3, -1.2).finished();
  const VectorXd lw = lsbp_log_weights(eta);
  EXPECT_NEAR(std::exp(lw(0)), logistic(0.3), 1e-15);
  EXPECT_NEAR(lw.array().exp().sum(), 1.0, 1e-15);
}

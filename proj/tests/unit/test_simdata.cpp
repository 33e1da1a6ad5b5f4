#include "crlmix/ingest.hpp"
#include "crlmix/simdata.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace crlmix;

TEST(Example1, TruthIsProbitWeightedMixture) {
  const Example1Params prm;
  for (double x : {-9.0, -3.0, 0.0, 4.5, 10.0}) {
    const auto w = example1_weights(prm, x);
    EXPECT_NEAR(w[0] + w[1] + w[2], 1.0, 1e-15);
    VectorXd mix = VectorXd::Zero(3);
    for (int k = 0; k < 3; ++k) {
      VectorXd theta(2);
      theta << prm.b[k][0][0] + prm.b[k][0][1] * x, prm.b[k][1][0] + prm.b[k][1][1] * x;
      mix += w[static_cast<std::size_t>(k)] * oracle::crl_probs(theta);
    }
    EXPECT_LT((example1_truth(prm, x) - mix).cwiseAbs().maxCoeff(), 1e-14);
  }
  // p_1(x) = Phi(-5 - x): at x = -5 the first component holds half the mass.
  EXPECT_NEAR(example1_weights(prm, -5.0)[0], 0.5, 1e-15);
}

TEST(Example2, TruthIsOrdinalProbit) {
  const Example2Params prm;
  const VectorXd pi = example2_truth(prm, 0.0);
  EXPECT_NEAR(pi(0), 0.15865525393145705, 1e-15);
  EXPECT_NEAR(pi(1), 0.6826894921370859, 1e-15);
  EXPECT_NEAR(pi(2), 0.15865525393145705, 1e-15);
  const VectorXd shifted = example2_truth(prm, 2.5);
  EXPECT_NEAR(shifted(0), std_normal_cdf(-1.0 - 1.0), 1e-15);
  Example2Params bad;
  bad.cutoffs = {1.0, -1.0};
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Example3, TruthAtOrigin) {
  const VectorXd pi = example3_truth(Example3Params{}, 0.0, 0.0);
  VectorXd theta(2);
  theta << 0.5, -0.5;
  EXPECT_LT((pi - oracle::crl_probs(theta)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Generators, ResponseFrequenciesFollowTruth) {
  RngStream rng(42, 1);
  const Example2Params prm;
  const auto sim = gen_example2(20000, prm, rng);
  VectorXd expected = VectorXd::Zero(3);
  VectorXd observed = VectorXd::Zero(3);
  for (Index i = 0; i < sim.data.n(); ++i) {
    expected += sim.truth(sim.raw_x.row(i).transpose());
    observed(sim.data.y()[static_cast<std::size_t>(i)] - 1) += 1.0;
  }
  double chi2 = 0.0;
  for (int j = 0; j < 3; ++j) {
    chi2 += (observed(j) - expected(j)) * (observed(j) - expected(j)) / expected(j);
  }
  EXPECT_LT(chi2, 13.8); // 0.999 quantile of chi-square with 2 df
  EXPECT_GE(sim.raw_x.minCoeff(), prm.x_lo);
  EXPECT_LE(sim.raw_x.maxCoeff(), prm.x_hi);
}

TEST(Generators, Example1And3Frequencies) {
  RngStream rng(43, 1);
  const auto s1 = gen_example1(20000, Example1Params{}, rng);
  const auto s3 = gen_example3(20000, Example3Params{}, rng);
  for (const SimTruth* sim : {&s1, &s3}) {
    VectorXd expected = VectorXd::Zero(3);
    VectorXd observed = VectorXd::Zero(3);
    for (Index i = 0; i < sim->data.n(); ++i) {
      expected += sim->truth(sim->raw_x.row(i).transpose());
      observed(sim->data.y()[static_cast<std::size_t>(i)] - 1) += 1.0;
    }
    double chi2 = 0.0;
    for (int j = 0; j < 3; ++j) {
      chi2 += (observed(j) - expected(j)) * (observed(j) - expected(j)) / expected(j);
    }
    EXPECT_LT(chi2, 13.8) << sim->id;
  }
  EXPECT_EQ(s3.data.p(), 3);
}

TEST(Generators, SeedDeterminesData) {
  RngStream a(7, 3);
  RngStream b(7, 3);
  const auto s1 = gen_example1(50, Example1Params{}, a);
  const auto s2 = gen_example1(50, Example1Params{}, b);
  EXPECT_EQ(s1.raw_x, s2.raw_x);
  EXPECT_EQ(s1.data.y(), s2.data.y());
  EXPECT_THROW(gen_example1(0, Example1Params{}, a), std::invalid_argument);
}

TEST(Generators, CsvRoundTripThroughIngest) {
  RngStream rng(9, 1);
  const auto sim = gen_example3(40, Example3Params{}, rng);
  std::ostringstream os;
  write_dataset_csv(os, sim);
  std::istringstream is(os.str());
  const auto in = ingest_csv(is);
  EXPECT_EQ(in.covariates.names, sim.covariates.names);
  EXPECT_EQ(in.data.x(), sim.data.x());
  // Categories that never occur would be relabelled, so compare through levels.
  for (Index i = 0; i < in.data.n(); ++i) {
    EXPECT_EQ(in.levels[static_cast<std::size_t>(in.data.y()[static_cast<std::size_t>(i)] - 1)],
              sim.data.y()[static_cast<std::size_t>(i)]);
  }
}

TEST(TruthCurves, DegenerateBands) {
  const TruthFunction truth = [](const VectorXd& x) { return example2_truth(Example2Params{}, x(0)); };
  const auto grid = first_order_grid(plain_covariates(2), 0, -10.0, 10.0, 50);
  const auto est = truth_curves(truth, grid);
  EXPECT_EQ(est.mean, est.lo);
  EXPECT_EQ(est.mean, est.hi);
  EXPECT_EQ(est.mean.rows(), 50);
  EXPECT_LT((est.mean.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-15);
}

#include "crlmix/draws_io.hpp"
#include "crlmix/sampler.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace crlmix;

namespace {

OrdinalDataset small_data(int n, int categories, std::uint64_t seed) {
  RngStream rng(seed, 0);
  MatrixXd x(n, 2);
  std::vector<int> y(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = 2.0 * rng.uniform() - 1.0;
    y[static_cast<std::size_t>(i)] = 1 + static_cast<int>(rng.uniform() * categories);
  }
  return OrdinalDataset(std::move(y), std::move(x), categories);
}

// Log posterior kernel of a logistic regression coefficient on a grid of
// scalar values, normalized to a probability vector.
template <typename LogLik>
std::pair<double, double> grid_moments(double lo, double hi, int points, LogLik loglik) {
  std::vector<double> lp(static_cast<std::size_t>(points));
  double top = -INFINITY;
  for (int k = 0; k < points; ++k) {
    const double t = lo + (hi - lo) * k / (points - 1.0);
    lp[static_cast<std::size_t>(k)] = loglik(t);
    top = std::max(top, lp[static_cast<std::size_t>(k)]);
  }
  double z = 0.0;
  double m1 = 0.0;
  double m2 = 0.0;
  for (int k = 0; k < points; ++k) {
    const double t = lo + (hi - lo) * k / (points - 1.0);
    const double w = std::exp(lp[static_cast<std::size_t>(k)] - top);
    z += w;
    m1 += w * t;
    m2 += w * t * t;
  }
  return {m1 / z, m2 / z - (m1 / z) * (m1 / z)};
}

double log_sigmoid(double t) { return -std::log1p(std::exp(-t)); }

} // namespace

TEST(NiwPosterior, MatchesSufficientStatisticForm) {
  RegressionAtomPrior prior{(VectorXd(2) << 0.5, -1.0).finished(), 3.0 * MatrixXd::Identity(2, 2), 2.0, 6.0};
  const std::vector<VectorXd> atoms{(VectorXd(2) << 1.0, 2.0).finished(), (VectorXd(2) << -0.5, 0.3).finished(),
                                    (VectorXd(2) << 2.0, -1.0).finished()};
  const auto post = niw_posterior(prior, atoms);
  const double kn = prior.kappa0 + 3.0;
  VectorXd sum = VectorXd::Zero(2);
  MatrixXd outer = MatrixXd::Zero(2, 2);
  for (const auto& b : atoms) {
    sum += b;
    outer += b * b.transpose();
  }
  const VectorXd mun = (prior.kappa0 * prior.mu0 + sum) / kn;
  const MatrixXd lam = prior.lambda0 + outer + prior.kappa0 * prior.mu0 * prior.mu0.transpose() -
                       kn * mun * mun.transpose();
  EXPECT_DOUBLE_EQ(post.kappa, 5.0);
  EXPECT_DOUBLE_EQ(post.nu, 9.0);
  EXPECT_LT((post.mu - mun).norm(), 1e-14);
  EXPECT_LT((post.lambda - lam).cwiseAbs().maxCoeff(), 1e-12);

  const auto empty = niw_posterior(prior, {});
  EXPECT_EQ(empty.mu, prior.mu0);
  EXPECT_DOUBLE_EQ(empty.nu, prior.nu0);
}

TEST(NigPosterior, MatchesSufficientStatisticForm) {
  ScalarAtomPrior prior{1.0, 2.0, 3.0, 4.0};
  const std::vector<double> atoms{0.5, -1.5, 2.0, 3.0};
  const auto post = nig_posterior(prior, atoms);
  double sum = 0.0;
  double sq = 0.0;
  for (double t : atoms) {
    sum += t;
    sq += t * t;
  }
  const double nun = prior.nu0 + 4.0;
  const double mun = (prior.nu0 * prior.mu0 + sum) / nun;
  const double bn = prior.b0 + 0.5 * (sq + prior.nu0 * prior.mu0 * prior.mu0 - nun * mun * mun);
  EXPECT_NEAR(post.mu, mun, 1e-14);
  EXPECT_NEAR(post.b, bn, 1e-12);
  EXPECT_DOUBLE_EQ(post.a, 5.0);
  EXPECT_DOUBLE_EQ(post.nu, 6.0);
}

TEST(Labels, LogProbsMatchWeightTimesKernel) {
  const auto data = small_data(12, 4, 3);
  const auto spec = baseline_prior(4, 2, Variant::General, 5);
  const ChainState s = init_state(data, spec, 21);
  for (Index i = 0; i < data.n(); ++i) {
    const VectorXd lp = label_log_probs(s, data, i);
    const VectorXd x = data.row(i).transpose();
    const VectorXd w = lsbp_weights(s.gamma, x);
    VectorXd direct(5);
    for (int l = 0; l < 5; ++l) {
      VectorXd theta(3);
      for (int j = 0; j < 3; ++j) {
        theta(j) = x.dot(s.beta[j].col(l));
      }
      direct(l) = w(l) * oracle::crl_probs(theta)(data.y()[static_cast<std::size_t>(i)] - 1);
    }
    const VectorXd a = (lp.array() - lp.maxCoeff()).exp();
    EXPECT_LT((a / a.sum() - direct / direct.sum()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Labels, CommonWeightsUseSticks) {
  const auto data = small_data(5, 3, 4);
  const auto spec = baseline_prior(3, 2, Variant::CommonWeights, 4);
  const ChainState s = init_state(data, spec, 5);
  const VectorXd w = weights_from_breaks(s.stick);
  const VectorXd lp = label_log_probs(s, data, 0);
  VectorXd direct(4);
  for (int l = 0; l < 4; ++l) {
    VectorXd theta(2);
    for (int j = 0; j < 2; ++j) {
      theta(j) = data.row(0).dot(s.beta[j].col(l));
    }
    direct(l) = w(l) * oracle::crl_probs(theta)(data.y()[0] - 1);
  }
  const VectorXd a = (lp.array() - lp.maxCoeff()).exp();
  EXPECT_LT((a / a.sum() - direct / direct.sum()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Labels, CategoricalFrequencies) {
  RngStream rng(8, 1);
  const VectorXd lp = (VectorXd(3) << std::log(0.2), std::log(0.5), std::log(0.3)).finished();
  std::array<int, 3> counts{};
  const int n = 100000;
  for (int k = 0; k < n; ++k) {
    ++counts[static_cast<std::size_t>(sample_log_categorical(lp.array() + 700.0, rng))];
  }
  EXPECT_NEAR(counts[0] / double(n), 0.2, 0.006);
  EXPECT_NEAR(counts[1] / double(n), 0.5, 0.006);
  const VectorXd dead = VectorXd::Constant(3, -INFINITY);
  EXPECT_THROW(sample_log_categorical(dead, rng), NumericError);
}

TEST(AtomStep, ScalarAtomMatchesQuadrature) {
  // One component, two categories, hyperparameters held fixed: the atom
  // conditional is N(mu, s2) times a binomial logistic likelihood.
  const int n = 20;
  MatrixXd x = MatrixXd::Ones(n, 1);
  std::vector<int> y(n, 2);
  for (int i = 0; i < 14; ++i) {
    y[static_cast<std::size_t>(i)] = 1;
  }
  const OrdinalDataset data(y, x, 2);
  auto spec = baseline_prior(2, 1, Variant::CommonAtoms, 1);
  ChainState s = init_state(data, spec, 3);
  s.mu_scalar(0) = -0.5;
  s.sigma2(0) = 2.0;
  std::vector<double> draws;
  for (int t = 1; t <= 40000; ++t) {
    step_atoms_common(s, data, spec, SweepContext{3, static_cast<std::uint64_t>(t), 1, false});
    if (t > 1000) {
      draws.push_back(s.theta_atoms(0, 0));
    }
  }
  const auto [mean, var] = grid_moments(-10.0, 10.0, 20001, [](double t) {
    return -0.25 * (t + 0.5) * (t + 0.5) + 14.0 * log_sigmoid(t) + 6.0 * log_sigmoid(-t);
  });
  EXPECT_NEAR(oracle::mean(draws), mean, 4.0 * oracle::batch_means_se(draws));
  double v = 0.0;
  const double m = oracle::mean(draws);
  for (double d : draws) {
    v += (d - m) * (d - m);
  }
  EXPECT_NEAR(v / draws.size(), var, 0.1 * var);
}

TEST(AtomStep, RegressionAtomMatchesQuadrature) {
  // Intercept-only regression atom with a fixed N(mu, Sigma) prior.
  const int n = 30;
  MatrixXd x = MatrixXd::Ones(n, 1);
  std::vector<int> y(n, 2);
  for (int i = 0; i < 9; ++i) {
    y[static_cast<std::size_t>(i)] = 1;
  }
  const OrdinalDataset data(y, x, 2);
  auto spec = baseline_prior(2, 1, Variant::General, 1);
  ChainState s = init_state(data, spec, 4);
  s.mu[0] = VectorXd::Constant(1, 1.0);
  s.sigma[0] = MatrixXd::Constant(1, 1, 0.5);
  std::vector<double> draws;
  for (int t = 1; t <= 40000; ++t) {
    step_atoms_general(s, data, spec, SweepContext{4, static_cast<std::uint64_t>(t), 1, false});
    if (t > 1000) {
      draws.push_back(s.beta[0](0, 0));
    }
  }
  const auto [mean, var] = grid_moments(-10.0, 10.0, 20001, [](double t) {
    return -(t - 1.0) * (t - 1.0) + 9.0 * log_sigmoid(t) + 21.0 * log_sigmoid(-t);
  });
  EXPECT_NEAR(oracle::mean(draws), mean, 4.0 * oracle::batch_means_se(draws));
  (void)var;
}

TEST(WeightStep, LsbpUsesAtRiskSet) {
  // Labels fixed: 6 in component 1, 3 in component 2, 5 in component 3. The
  // first break sees all 14 (6 successes); the second sees the 8 with
  // label >= 2 (3 successes).
  const int n = 14;
  MatrixXd x = MatrixXd::Ones(n, 1);
  const OrdinalDataset data(std::vector<int>(n, 1), x, 2);
  auto spec = baseline_prior(2, 1, Variant::General, 3);
  spec.lsbp->cov0 = MatrixXd::Constant(1, 1, 4.0);
  ChainState s = init_state(data, spec, 5);
  for (int i = 0; i < n; ++i) {
    s.labels[static_cast<std::size_t>(i)] = i < 6 ? 0 : (i < 9 ? 1 : 2);
  }
  s.xi = MatrixXd::Zero(n, 2);
  std::vector<double> g1;
  std::vector<double> g2;
  for (int t = 1; t <= 40000; ++t) {
    step_weights_lsbp(s, data, spec, SweepContext{5, static_cast<std::uint64_t>(t), 1, false});
    if (t > 1000) {
      g1.push_back(s.gamma(0, 0));
      g2.push_back(s.gamma(0, 1));
    }
  }
  const auto m1 = grid_moments(-15.0, 15.0, 30001, [](double t) {
    return -t * t / 8.0 + 6.0 * log_sigmoid(t) + 8.0 * log_sigmoid(-t);
  });
  const auto m2 = grid_moments(-15.0, 15.0, 30001, [](double t) {
    return -t * t / 8.0 + 3.0 * log_sigmoid(t) + 5.0 * log_sigmoid(-t);
  });
  EXPECT_NEAR(oracle::mean(g1), m1.first, 4.0 * oracle::batch_means_se(g1));
  EXPECT_NEAR(oracle::mean(g2), m2.first, 4.0 * oracle::batch_means_se(g2));
}

TEST(WeightStep, DirichletSticksGivenCounts) {
  // With alpha resampled each step the joint (V, alpha) chain has the
  // Beta-Gamma conjugate structure; check E(V_1) against a direct
  // simulation of the same two-block Gibbs sampler written out by hand.
  const OrdinalDataset data(std::vector<int>(10, 1), MatrixXd::Ones(10, 1), 2);
  auto spec = baseline_prior(2, 1, Variant::CommonWeights, 2);
  ChainState s = init_state(data, spec, 6);
  for (int i = 0; i < 10; ++i) {
    s.labels[static_cast<std::size_t>(i)] = i < 7 ? 0 : 1;
  }
  std::vector<double> v;
  for (int t = 1; t <= 40000; ++t) {
    step_weights_dp(s, spec, SweepContext{6, static_cast<std::uint64_t>(t), 1, false});
    v.push_back(s.stick(0));
  }
  std::mt19937_64 gen(12);
  double alpha = 1.0;
  std::vector<double> ref;
  for (int t = 0; t < 40000; ++t) {
    std::gamma_distribution<double> ga(8.0, 1.0);
    std::gamma_distribution<double> gb(alpha + 3.0, 1.0);
    const double a = ga(gen);
    const double vv = a / (a + gb(gen));
    ref.push_back(vv);
    std::gamma_distribution<double> gal(2.0 + 1.0, 1.0 / (1.0 - std::log1p(-vv)));
    alpha = gal(gen);
  }
  EXPECT_NEAR(oracle::mean(v), oracle::mean(ref),
              4.0 * std::hypot(oracle::batch_means_se(v), oracle::batch_means_se(ref)));
}

TEST(RunChain, RetentionSchedule) {
  const auto data = small_data(15, 3, 1);
  const auto spec = baseline_prior(3, 2, Variant::General, 4);
  RunConfig run;
  run.n_iter = 50;
  run.burn_in = 10;
  run.thin = 4;
  run.seed = 9;
  const auto draws = run_chain(data, spec, run);
  ASSERT_EQ(draws.draws.size(), 10u);
  EXPECT_EQ(draws.draws.front().iteration, 14);
  EXPECT_EQ(draws.draws.back().iteration, 50);
  EXPECT_EQ(draws.meta.n_obs, 15);
  EXPECT_EQ(draws.meta.spec_hash, spec_hash(spec));
  int total = 0;
  for (int c : draws.draws.front().counts) {
    total += c;
  }
  EXPECT_EQ(total, 15);
}

TEST(RunChain, ThreadCountDoesNotChangeDraws) {
  const auto data = small_data(40, 3, 2);
  for (Variant v : {Variant::General, Variant::CommonWeights, Variant::CommonAtoms}) {
    const auto spec = baseline_prior(3, 2, v, 6);
    RunConfig run;
    run.n_iter = 30;
    run.burn_in = 10;
    run.thin = 2;
    run.seed = 77;
    std::ostringstream a;
    std::ostringstream b;
    write_draws(a, run_chain(data, spec, run));
    run.threads = 4;
    write_draws(b, run_chain(data, spec, run));
    EXPECT_EQ(a.str(), b.str()) << variant_name(v);
  }
}

TEST(RunChain, SeedsDiffer) {
  const auto data = small_data(20, 3, 2);
  const auto spec = baseline_prior(3, 2, Variant::CommonAtoms, 3);
  RunConfig run;
  run.n_iter = 5;
  run.burn_in = 0;
  run.thin = 1;
  run.seed = 1;
  const auto a = run_chain(data, spec, run);
  run.seed = 2;
  const auto b = run_chain(data, spec, run);
  EXPECT_NE(a.draws.back().theta_atoms, b.draws.back().theta_atoms);
}

TEST(RunChain, DimensionMismatchRejected) {
  const auto data = small_data(5, 3, 2);
  RunConfig run;
  run.n_iter = 2;
  run.burn_in = 0;
  EXPECT_THROW(run_chain(data, baseline_prior(4, 2, Variant::General, 3), run), std::invalid_argument);
  EXPECT_THROW(run_chain(data, baseline_prior(3, 3, Variant::General, 3), run), std::invalid_argument);
  run.burn_in = 5;
  EXPECT_THROW(run_chain(data, baseline_prior(3, 2, Variant::General, 3), run), std::invalid_argument);
}

TEST(RunChain, EmptyDataAndSingleComponent) {
  const auto data = OrdinalDataset::empty(3, 2);
  RunConfig run;
  run.n_iter = 20;
  run.burn_in = 5;
  run.thin = 5;
  for (Variant v : {Variant::General, Variant::CommonWeights, Variant::CommonAtoms}) {
    EXPECT_EQ(run_chain(data, baseline_prior(3, 2, v, 4), run).draws.size(), 3u);
    EXPECT_EQ(run_chain(small_data(10, 3, 1), baseline_prior(3, 2, v, 1), run).draws.size(), 3u);
  }
}

TEST(DrawsIo, RoundTripAllVariants) {
  const auto data = small_data(10, 3, 5);
  for (Variant v : {Variant::General, Variant::CommonWeights, Variant::CommonAtoms}) {
    const auto spec = baseline_prior(3, 2, v, 3);
    RunConfig run;
    run.n_iter = 6;
    run.burn_in = 2;
    run.thin = 2;
    auto draws = run_chain(data, spec, run);
    draws.meta.covariates.names = {"x"};
    draws.meta.covariates.center = VectorXd::Constant(1, 0.25);
    draws.meta.covariates.scale = VectorXd::Constant(1, 2.0);
    draws.meta.covariates.observed_mean = VectorXd::Constant(1, 0.1);
    draws.meta.covariates.observed_min = VectorXd::Constant(1, -1.0);
    draws.meta.covariates.observed_max = VectorXd::Constant(1, 1.0);
    std::ostringstream os;
    write_draws(os, draws);
    std::istringstream is(os.str());
    const auto back = read_draws(is);
    std::ostringstream again;
    write_draws(again, back);
    EXPECT_EQ(os.str(), again.str());
    ASSERT_EQ(back.draws.size(), draws.draws.size());
    const VectorXd x = (VectorXd(2) << 1.0, 0.3).finished();
    EXPECT_EQ(draw_probs(back.draws[0], back.meta, x), draw_probs(draws.draws[0], draws.meta, x));
    EXPECT_EQ(back.meta.spec_hash, spec_hash(spec));
    EXPECT_EQ(spec_from_json(spec_to_json(spec)).truncation, 3);
    EXPECT_EQ(spec_hash(spec_from_json(spec_to_json(spec))), spec_hash(spec));
  }
}

TEST(DrawsIo, MalformedInputReportsLine) {
  std::istringstream is("{\"format\":\"crlmix-draws\",\"version\":1}\nnot json\n");
  try {
    read_draws(is, "mem");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("mem"), std::string::npos);
  }
  std::istringstream wrong("{\"format\":\"other\"}\n");
  EXPECT_THROW(read_draws(wrong), DataError);
}

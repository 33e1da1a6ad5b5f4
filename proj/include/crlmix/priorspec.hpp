#pragma once

// Model specification and hyperparameter construction.

#include "crlmix/core.hpp"
#include "crlmix/randvar.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace crlmix {

enum class Variant { General, CommonWeights, CommonAtoms };

inline std::string_view variant_name(Variant v) {
  switch (v) {
  case Variant::General:
    return "general";
  case Variant::CommonWeights:
    return "common-weights";
  case Variant::CommonAtoms:
    return "common-atoms";
  }
  return "unknown";
}

inline Variant parse_variant(std::string_view s) {
  if (s == "general") {
    return Variant::General;
  }
  if (s == "common-weights" || s == "common_weights" || s == "cw") {
    return Variant::CommonWeights;
  }
  if (s == "common-atoms" || s == "common_atoms" || s == "ca") {
    return Variant::CommonAtoms;
  }
  throw std::invalid_argument("unknown model variant '" + std::string(s) +
                              "' (expected general | common-weights | common-atoms)");
}

inline bool uses_lsbp(Variant v) noexcept { return v != Variant::CommonWeights; }
inline bool uses_regression_atoms(Variant v) noexcept { return v != Variant::CommonAtoms; }

/// Normal-inverse-Wishart prior for one category's atom regression:
/// Sigma ~ IW(nu0, Lambda0) with mean Lambda0/(nu0-p-1), mu | Sigma ~ N(mu0, Sigma/kappa0).
struct RegressionAtomPrior {
  VectorXd mu0;
  MatrixXd lambda0;
  double kappa0 = 0.0;
  double nu0 = 0.0;
};

/// Normal-inverse-gamma prior for one category's scalar atoms:
/// sigma2 ~ IG(a0, b0), mu | sigma2 ~ N(mu0, sigma2/nu0).
struct ScalarAtomPrior {
  double mu0 = 0.0;
  double nu0 = 0.0;
  double a0 = 0.0;
  double b0 = 0.0;
};

/// gamma_l ~ N(gamma0, Gamma0) for the logit stick-breaking weights.
struct LsbpWeightPrior {
  VectorXd gamma0;
  MatrixXd cov0;
};

/// alpha ~ Gamma(a_alpha, rate b_alpha) for Dirichlet-process weights.
struct DpWeightPrior {
  double a_alpha = 0.0;
  double b_alpha = 0.0;
};

struct ModelSpec {
  Variant variant = Variant::General;
  int categories = 0;
  int p = 0;
  int truncation = 0;
  std::vector<RegressionAtomPrior> regression_atoms; // General, CommonWeights
  std::vector<ScalarAtomPrior> scalar_atoms;         // CommonAtoms
  std::optional<LsbpWeightPrior> lsbp;               // General, CommonAtoms
  std::optional<DpWeightPrior> dp;                   // CommonWeights

  void validate() const;
};

inline void require_spd(const MatrixXd& m, Index p, const std::string& what) {
  if (m.rows() != p || m.cols() != p) {
    throw std::invalid_argument(what + " must be " + std::to_string(p) + "x" + std::to_string(p));
  }
  if (!m.isApprox(m.transpose(), 1e-12)) {
    throw std::invalid_argument(what + " must be symmetric");
  }
  Eigen::LLT<MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument(what + " must be positive definite");
  }
}

inline void ModelSpec::validate() const {
  if (categories < 2) {
    throw std::invalid_argument("ModelSpec: need C >= 2");
  }
  if (p < 1) {
    throw std::invalid_argument("ModelSpec: need p >= 1");
  }
  if (truncation < 1) {
    throw std::invalid_argument("ModelSpec: truncation level must be >= 1");
  }
  const auto cm1 = static_cast<std::size_t>(categories - 1);
  if (uses_regression_atoms(variant)) {
    if (regression_atoms.size() != cm1 || !scalar_atoms.empty()) {
      throw std::invalid_argument("ModelSpec: " + std::string(variant_name(variant)) +
                                  " needs exactly C-1 regression atom priors");
    }
    for (std::size_t j = 0; j < cm1; ++j) {
      const auto& a = regression_atoms[j];
      const std::string tag = "atom prior " + std::to_string(j + 1);
      if (a.mu0.size() != p) {
        throw std::invalid_argument(tag + ": mu0 must have length p");
      }
      require_spd(a.lambda0, p, tag + ": Lambda0");
      if (!(a.kappa0 > 0.0)) {
        throw std::invalid_argument(tag + ": kappa0 must be > 0");
      }
      if (!(a.nu0 > p + 1.0)) {
        throw std::invalid_argument(tag + ": nu0 must exceed p + 1");
      }
    }
  } else {
    if (scalar_atoms.size() != cm1 || !regression_atoms.empty()) {
      throw std::invalid_argument("ModelSpec: common-atoms needs exactly C-1 scalar atom priors");
    }
    for (std::size_t j = 0; j < cm1; ++j) {
      const auto& a = scalar_atoms[j];
      const std::string tag = "scalar atom prior " + std::to_string(j + 1);
      if (!(a.nu0 > 0.0) || !(a.a0 > 1.0) || !(a.b0 > 0.0) || !std::isfinite(a.mu0)) {
        throw std::invalid_argument(tag + ": need nu0 > 0, a0 > 1, b0 > 0");
      }
    }
  }
  if (uses_lsbp(variant)) {
    if (!lsbp || dp) {
      throw std::invalid_argument("ModelSpec: " + std::string(variant_name(variant)) +
                                  " needs the logit stick-breaking weight prior only");
    }
    if (lsbp->gamma0.size() != p) {
      throw std::invalid_argument("ModelSpec: gamma0 must have length p");
    }
    require_spd(lsbp->cov0, p, "ModelSpec: Gamma0");
  } else {
    if (!dp || lsbp) {
      throw std::invalid_argument("ModelSpec: common-weights needs the DP weight prior only");
    }
    if (!(dp->a_alpha > 0.0) || !(dp->b_alpha > 0.0)) {
      throw std::invalid_argument("ModelSpec: a_alpha and b_alpha must be > 0");
    }
  }
}

inline constexpr int kConservativeTruncation = 50;

/// Default hyperparameters. Atoms: mu0 = 0, Lambda0 = 100 I,
/// kappa0 = nu0 = p + 2; scalar atoms: mu0 = 0, nu0 = 2, a0 = 2, b0 = 5.
/// Weights: gamma0 = 0, Gamma0 = 100 I; DP total mass ~ Gamma(2, 1).
inline ModelSpec baseline_prior(int categories, int p, Variant variant,
                                int truncation = kConservativeTruncation) {
  if (categories < 2 || p < 1) {
    throw std::invalid_argument("baseline_prior: need C >= 2 and p >= 1");
  }
  ModelSpec spec;
  spec.variant = variant;
  spec.categories = categories;
  spec.p = p;
  spec.truncation = truncation;
  const double dim_plus_two = p + 2.0;
  for (int j = 0; j + 1 < categories; ++j) {
    if (uses_regression_atoms(variant)) {
      spec.regression_atoms.push_back(RegressionAtomPrior{
          VectorXd::Zero(p), 100.0 * MatrixXd::Identity(p, p), dim_plus_two, dim_plus_two});
    } else {
      spec.scalar_atoms.push_back(ScalarAtomPrior{0.0, 2.0, 2.0, 5.0});
    }
  }
  if (uses_lsbp(variant)) {
    spec.lsbp = LsbpWeightPrior{VectorXd::Zero(p), 100.0 * MatrixXd::Identity(p, p)};
  } else {
    spec.dp = DpWeightPrior{2.0, 1.0};
  }
  spec.validate();
  return spec;
}

enum class Monotonicity { Increasing, Decreasing };

struct MonotonePrior {
  VectorXd mu0;     // (intercept, slope)
  MatrixXd lambda0; // diagonal 2x2
};

/// Hyperparameters (mu0, Lambda0) for one atom regression on x = (1, x)
/// that force a monotone prior expected first-category curve on (-a1, a1).
/// a1: half-width of the covariate range, a2: maximum gap of the bounding
/// parabolas, -a3 / a4: their vertices. Requires a2 > a3 + a4.
inline MonotonePrior monotone_prior_solve(double a1, double a2, double a3, double a4,
                                          Monotonicity direction, double kappa0, double nu0,
                                          int p = 2) {
  if (p != 2) {
    throw std::invalid_argument("monotone_prior_solve: only p = 2 (intercept + one covariate)");
  }
  if (!(a1 > 0.0 && a2 > 0.0 && a3 > 0.0 && a4 > 0.0)) {
    throw std::invalid_argument("monotone_prior_solve: a1..a4 must be positive");
  }
  if (!(a2 > a3 + a4)) {
    throw std::invalid_argument("monotone_prior_solve: constraint a2 > a3 + a4 violated");
  }
  if (!(kappa0 > 0.0) || !(nu0 > p + 1.0)) {
    throw std::invalid_argument("monotone_prior_solve: need kappa0 > 0 and nu0 > p + 1");
  }
  // lambda_s = Lambda0_ss * (kappa0 + 1) / (2 kappa0 (nu0 - p - 1)); each
  // entry is formed as one quotient so exact inputs give correctly rounded output.
  const double dof = nu0 - p - 1.0;
  const double sum = a2 + a3 + a4;
  MonotonePrior out;
  out.mu0.resize(2);
  out.mu0(0) = (a4 - a3) / 2.0;
  out.mu0(1) = (direction == Monotonicity::Decreasing ? -sum : sum) / (2.0 * a1);
  out.lambda0 = MatrixXd::Zero(2, 2);
  out.lambda0(0, 0) = ((a2 - a3 - a4) * 2.0 * kappa0 * dof) / (4.0 * (kappa0 + 1.0));
  out.lambda0(1, 1) = (sum * 2.0 * kappa0 * dof) / (4.0 * a1 * a1 * (kappa0 + 1.0));
  return out;
}

/// Smallest L >= 2 such that, at every representative x, the prior expected
/// mass of the first L weights 1 - (1 - E phi(x'gamma))^L reaches target_mass.
inline int choose_truncation(const VectorXd& gamma0, const MatrixXd& cov0,
                             const std::vector<VectorXd>& x_reps, double target_mass,
                             RngStream& rng, int n_mc = kDefaultLogitNormalDraws) {
  if (!(target_mass > 0.0 && target_mass < 1.0)) {
    throw std::invalid_argument("choose_truncation: target_mass must lie in (0,1)");
  }
  if (x_reps.empty()) {
    throw std::invalid_argument("choose_truncation: need at least one representative x");
  }
  double min_break = 1.0;
  for (const auto& x : x_reps) {
    if (x.size() != gamma0.size()) {
      throw std::invalid_argument("choose_truncation: representative x has wrong dimension");
    }
    const LogitNormalParams ln{x.dot(gamma0), x.dot(cov0 * x)};
    const double e = ln.sigma2 > 0.0 ? logit_normal_mean_mc(ln, n_mc, rng).value : logistic(ln.mu);
    min_break = std::min(min_break, e);
  }
  const double leftover = 1.0 - target_mass;
  constexpr int kMaxTruncation = 100000;
  double tail = 1.0;
  for (int l = 1; l <= kMaxTruncation; ++l) {
    tail *= 1.0 - min_break;
    if (tail <= leftover) {
      return std::max(l, 2);
    }
  }
  throw std::invalid_argument("choose_truncation: target mass unreachable below L = 100000");
}

// ---------------------------------------------------------------------------
// Prior predictive summaries
// ---------------------------------------------------------------------------

/// Draw (mu_j, Sigma_j) from the normal-inverse-Wishart prior.
inline std::pair<VectorXd, MatrixXd> sample_niw(const RegressionAtomPrior& prior, RngStream& rng) {
  MatrixXd sigma = sample_inverse_wishart(prior.nu0, prior.lambda0, rng);
  VectorXd mu = sample_mvn(prior.mu0, sigma / prior.kappa0, rng);
  return {std::move(mu), std::move(sigma)};
}

/// Monte Carlo mean and standard error of the prior expected response
/// probabilities at x (they do not depend on the weights).
inline std::pair<VectorXd, VectorXd> prior_expected_probs(const ModelSpec& spec, const VectorXd& x,
                                                          int n_mc, RngStream& rng) {
  spec.validate();
  const int c = spec.categories;
  VectorXd mean = VectorXd::Zero(c);
  VectorXd m2 = VectorXd::Zero(c);
  VectorXd theta(c - 1);
  for (int t = 0; t < n_mc; ++t) {
    for (int j = 0; j + 1 < c; ++j) {
      if (uses_regression_atoms(spec.variant)) {
        const auto [mu, sigma] = sample_niw(spec.regression_atoms[j], rng);
        theta(j) = x.dot(sample_mvn(mu, sigma, rng));
      } else {
        const auto& a = spec.scalar_atoms[j];
        const double s2 = sample_inverse_gamma(a.a0, a.b0, rng);
        const double mu = a.mu0 + std::sqrt(s2 / a.nu0) * std_normal(rng);
        theta(j) = mu + std::sqrt(s2) * std_normal(rng);
      }
    }
    const VectorXd pi = theta_to_pi(CrlTheta{theta}).pi;
    const VectorXd delta = pi - mean;
    mean += delta / (t + 1.0);
    m2 += delta.cwiseProduct(pi - mean);
  }
  VectorXd se = (m2 / std::max(1, n_mc - 1) / n_mc).cwiseSqrt();
  return {mean, se};
}

} // namespace crlmix

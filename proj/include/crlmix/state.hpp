#pragma once

// Chain state, retained draws and the per-draw mixture evaluations shared by
// the samplers and the posterior functionals.

#include "crlmix/core.hpp"
#include "crlmix/priorspec.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace crlmix {

/// Breaking proportions and sticks are kept inside [kStickClamp, 1 - kStickClamp]
/// before logs are taken.
inline constexpr double kStickClamp = 1e-12;

inline double clamp_stick(double v) noexcept {
  return std::clamp(v, kStickClamp, 1.0 - kStickClamp);
}

/// One Gibbs iteration's full parameter set. Labels are 0-based.
struct ChainState {
  Variant variant = Variant::General;
  int categories = 0;
  int p = 0;
  int truncation = 0;

  std::vector<MatrixXd> beta; // [j] p x L, column l = beta_{jl}
  MatrixXd theta_atoms;       // (C-1) x L

  MatrixXd gamma; // p x (L-1)
  VectorXd stick; // V_1..V_{L-1}
  double alpha = 0.0;

  std::vector<int> labels;
  MatrixXd zeta; // n x (C-1); zero where m_ij = 0
  MatrixXd xi;   // n x (L-1); zero outside the at-risk set

  std::vector<VectorXd> mu; // regression atoms centering
  std::vector<MatrixXd> sigma;
  VectorXd mu_scalar; // scalar atoms centering
  VectorXd sigma2;
};

struct RunConfig {
  int n_iter = 30000;
  int burn_in = 10000;
  int thin = 5;
  std::uint64_t seed = 1;
  bool parallel_categories = true;
  int threads = 1;

  void validate() const {
    if (n_iter < 1 || burn_in < 0 || thin < 1) {
      throw std::invalid_argument("RunConfig: need n_iter >= 1, burn_in >= 0, thin >= 1");
    }
    if (burn_in >= n_iter) {
      throw std::invalid_argument("RunConfig: burn_in must be smaller than n_iter");
    }
  }

  [[nodiscard]] int retained() const noexcept { return (n_iter - burn_in) / thin; }
};

/// Retained parameters of one sweep. PG latents and labels are summarized
/// by the per-component occupancy counts.
struct DrawRecord {
  long iteration = 0;
  std::vector<MatrixXd> beta;
  MatrixXd theta_atoms;
  MatrixXd gamma;
  VectorXd stick;
  double alpha = 0.0;
  std::vector<VectorXd> mu;
  std::vector<MatrixXd> sigma;
  VectorXd mu_scalar;
  VectorXd sigma2;
  std::vector<int> counts;
};

/// Covariate bookkeeping carried from ingestion to curve grids.
struct CovariateInfo {
  std::vector<std::string> names; // excludes the intercept
  VectorXd center;                // subtracted before scaling
  VectorXd scale;                 // divisor after centering
  VectorXd observed_mean;         // raw-unit means
  VectorXd observed_min;
  VectorXd observed_max;

  [[nodiscard]] bool empty() const noexcept { return names.empty(); }
};

struct DrawsMeta {
  Variant variant = Variant::General;
  int categories = 0;
  int p = 0;
  int truncation = 0;
  std::uint64_t seed = 0;
  int n_iter = 0;
  int burn_in = 0;
  int thin = 1;
  long n_obs = 0;
  std::uint64_t spec_hash = 0;
  CovariateInfo covariates;
};

struct PosteriorDraws {
  DrawsMeta meta;
  std::vector<DrawRecord> draws;
  std::vector<double> seconds_per_1000; // wall time per block of 1000 sweeps
};

// ---------------------------------------------------------------------------
// Weights
// ---------------------------------------------------------------------------

/// log p_l for l = 1..L from the logit stick-breaking linear predictors
/// eta_l = x' gamma_l, l < L.
inline VectorXd lsbp_log_weights(const VectorXd& eta) {
  const Index lm1 = eta.size();
  VectorXd out(lm1 + 1);
  double log_rest = 0.0;
  for (Index l = 0; l < lm1; ++l) {
    const double v = clamp_stick(logistic(eta(l)));
    out(l) = log_rest + std::log(v);
    log_rest += std::log1p(-v);
  }
  out(lm1) = log_rest;
  return out;
}

/// log omega_l from stick proportions V_1..V_{L-1}.
inline VectorXd stick_log_weights(const VectorXd& stick) {
  const Index lm1 = stick.size();
  VectorXd out(lm1 + 1);
  double log_rest = 0.0;
  for (Index l = 0; l < lm1; ++l) {
    const double v = clamp_stick(stick(l));
    out(l) = log_rest + std::log(v);
    log_rest += std::log1p(-v);
  }
  out(lm1) = log_rest;
  return out;
}

/// Weights p_1..p_L; the last one is the leftover stick.
inline VectorXd weights_from_breaks(const VectorXd& breaks) {
  const Index lm1 = breaks.size();
  VectorXd w(lm1 + 1);
  double rest = 1.0;
  for (Index l = 0; l < lm1; ++l) {
    const double v = clamp_stick(breaks(l));
    w(l) = rest * v;
    rest *= 1.0 - v;
  }
  w(lm1) = rest;
  return w;
}

inline VectorXd lsbp_weights(const MatrixXd& gamma, const VectorXd& x) {
  VectorXd breaks(gamma.cols());
  for (Index l = 0; l < gamma.cols(); ++l) {
    breaks(l) = logistic(x.dot(gamma.col(l)));
  }
  return weights_from_breaks(breaks);
}

/// Mixture weights of a retained draw at covariate vector x.
inline VectorXd draw_weights(const DrawRecord& d, const DrawsMeta& meta, const VectorXd& x) {
  if (meta.truncation == 1) {
    return VectorXd::Ones(1);
  }
  if (uses_lsbp(meta.variant)) {
    return lsbp_weights(d.gamma, x);
  }
  return weights_from_breaks(d.stick);
}

/// Continuation-ratio logits of component l of a draw at x.
inline CrlTheta draw_component_theta(const DrawRecord& d, const DrawsMeta& meta,
                                     const VectorXd& x, Index l) {
  VectorXd theta(meta.categories - 1);
  for (int j = 0; j + 1 < meta.categories; ++j) {
    theta(j) = uses_regression_atoms(meta.variant) ? x.dot(d.beta[j].col(l)) : d.theta_atoms(j, l);
  }
  return CrlTheta{std::move(theta)};
}

/// Marginal response probabilities Pr(Y = j | G_x) of one draw.
inline VectorXd draw_probs(const DrawRecord& d, const DrawsMeta& meta, const VectorXd& x) {
  if (x.size() != meta.p) {
    throw std::invalid_argument("draw_probs: covariate vector has length " +
                                std::to_string(x.size()) + ", expected " + std::to_string(meta.p));
  }
  const VectorXd w = draw_weights(d, meta, x);
  VectorXd out = VectorXd::Zero(meta.categories);
  for (Index l = 0; l < w.size(); ++l) {
    if (w(l) == 0.0) {
      continue;
    }
    out += w(l) * theta_to_pi(draw_component_theta(d, meta, x, l)).pi;
  }
  return out;
}

inline DrawsMeta meta_for(const ModelSpec& spec) {
  DrawsMeta meta;
  meta.variant = spec.variant;
  meta.categories = spec.categories;
  meta.p = spec.p;
  meta.truncation = spec.truncation;
  return meta;
}

/// Copy of the retained parameters of a state.
inline DrawRecord snapshot(const ChainState& s, long iteration) {
  DrawRecord d;
  d.iteration = iteration;
  d.beta = s.beta;
  d.theta_atoms = s.theta_atoms;
  d.gamma = s.gamma;
  d.stick = s.stick;
  d.alpha = s.alpha;
  d.mu = s.mu;
  d.sigma = s.sigma;
  d.mu_scalar = s.mu_scalar;
  d.sigma2 = s.sigma2;
  d.counts.assign(static_cast<std::size_t>(s.truncation), 0);
  for (int l : s.labels) {
    ++d.counts[static_cast<std::size_t>(l)];
  }
  return d;
}

} // namespace crlmix

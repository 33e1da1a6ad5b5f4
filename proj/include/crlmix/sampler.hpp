#pragma once

// Blocked Gibbs samplers for the general, common-weights and common-atoms
// mixtures of continuation-ratio logits kernels, with Polya-Gamma latents
// for both the atoms and the logit stick-breaking weights.
//
// Systematic scan per sweep: atoms, weights, labels, hyperparameters. The
// PG latents of a block are refreshed (given the current labels) right
// before the Gaussian draw of that block, since the label update integrates
// them out.
//
// Every random draw comes from a stream keyed by (seed, sweep, block tag,
// indices), so results do not depend on the number of worker threads.

#include "crlmix/core.hpp"
#include "crlmix/draws_io.hpp"
#include "crlmix/errors.hpp"
#include "crlmix/parallel.hpp"
#include "crlmix/priorspec.hpp"
#include "crlmix/randvar.hpp"
#include "crlmix/rng.hpp"
#include "crlmix/state.hpp"

#include <chrono>
#include <string>
#include <vector>

namespace crlmix {

enum class StreamTag : std::uint64_t {
  Init = 1,
  Zeta,
  Atom,
  Xi,
  Weight,
  Stick,
  Alpha,
  Label,
  Hyper,
};

/// Random-stream factory for one sweep plus the worker budget.
struct SweepContext {
  std::uint64_t seed = 0;
  std::uint64_t sweep = 0;
  int threads = 1;
  bool parallel_categories = true;

  [[nodiscard]] RngStream stream(StreamTag tag, std::uint64_t a = 0, std::uint64_t b = 0) const {
    return RngStream::derive(seed, {sweep, static_cast<std::uint64_t>(tag), a, b});
  }
  [[nodiscard]] int category_threads() const noexcept { return parallel_categories ? threads : 1; }
};

// ---------------------------------------------------------------------------
// Conditional building blocks
// ---------------------------------------------------------------------------

/// Canonical-form Gaussian conditional of a PG-augmented logistic regression:
/// precision = prior_precision + sum_i w_i x_i x_i', shift = prior_shift + sum_i k_i x_i.
struct PgRegressionTerms {
  MatrixXd precision;
  VectorXd shift;
  int rows = 0;

  PgRegressionTerms(MatrixXd prior_precision, VectorXd prior_shift)
      : precision(std::move(prior_precision)), shift(std::move(prior_shift)) {}

  template <typename Row>
  void add(const Row& x, double weight, double kappa) {
    precision.noalias() += weight * x.transpose() * x;
    shift.noalias() += kappa * x.transpose();
    ++rows;
  }
};

/// Precision and precision-weighted mean of N(mean, cov).
inline std::pair<MatrixXd, VectorXd> prior_canonical(const VectorXd& mean, const MatrixXd& cov) {
  const auto llt = robust_cholesky(cov, "prior_canonical");
  MatrixXd precision = llt.solve(MatrixXd::Identity(cov.rows(), cov.cols()));
  precision = 0.5 * (precision + precision.transpose());
  VectorXd shift = precision * mean;
  return {std::move(precision), std::move(shift)};
}

/// Members of each component (0-based labels).
inline std::vector<std::vector<Index>> component_members(const std::vector<int>& labels,
                                                         int truncation) {
  std::vector<std::vector<Index>> members(static_cast<std::size_t>(truncation));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    members[static_cast<std::size_t>(labels[i])].push_back(static_cast<Index>(i));
  }
  return members;
}

inline std::vector<int> occupancy(const std::vector<int>& labels, int truncation) {
  std::vector<int> counts(static_cast<std::size_t>(truncation), 0);
  for (int l : labels) {
    ++counts[static_cast<std::size_t>(l)];
  }
  return counts;
}

inline void check_dimensions(const OrdinalDataset& data, const ModelSpec& spec) {
  spec.validate();
  if (data.categories() != spec.categories || data.p() != spec.p) {
    throw std::invalid_argument("dataset (C = " + std::to_string(data.categories()) +
                                ", p = " + std::to_string(data.p()) +
                                ") does not match model spec (C = " +
                                std::to_string(spec.categories) + ", p = " +
                                std::to_string(spec.p) + ")");
  }
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

/// Hyperparameters from their priors, atoms and weights from their
/// centering laws, labels uniform, PG latents at tilting 0.
inline ChainState init_state(const OrdinalDataset& data, const ModelSpec& spec,
                             std::uint64_t seed) {
  check_dimensions(data, spec);
  const int cm1 = spec.categories - 1;
  const int big_l = spec.truncation;
  const Index n = data.n();
  const SweepContext ctx{seed, 0, 1, false};

  ChainState s;
  s.variant = spec.variant;
  s.categories = spec.categories;
  s.p = spec.p;
  s.truncation = big_l;

  if (uses_regression_atoms(spec.variant)) {
    s.mu.resize(cm1);
    s.sigma.resize(cm1);
    s.beta.resize(cm1);
    for (int j = 0; j < cm1; ++j) {
      auto rng = ctx.stream(StreamTag::Init, 1, static_cast<std::uint64_t>(j));
      std::tie(s.mu[j], s.sigma[j]) = sample_niw(spec.regression_atoms[j], rng);
      s.beta[j].resize(spec.p, big_l);
      for (int l = 0; l < big_l; ++l) {
        s.beta[j].col(l) = sample_mvn(s.mu[j], s.sigma[j], rng);
      }
    }
  } else {
    s.mu_scalar.resize(cm1);
    s.sigma2.resize(cm1);
    s.theta_atoms.resize(cm1, big_l);
    for (int j = 0; j < cm1; ++j) {
      auto rng = ctx.stream(StreamTag::Init, 1, static_cast<std::uint64_t>(j));
      const auto& a = spec.scalar_atoms[j];
      s.sigma2(j) = sample_inverse_gamma(a.a0, a.b0, rng);
      s.mu_scalar(j) = a.mu0 + std::sqrt(s.sigma2(j) / a.nu0) * std_normal(rng);
      for (int l = 0; l < big_l; ++l) {
        s.theta_atoms(j, l) = s.mu_scalar(j) + std::sqrt(s.sigma2(j)) * std_normal(rng);
      }
    }
  }

  auto wrng = ctx.stream(StreamTag::Init, 2);
  if (uses_lsbp(spec.variant)) {
    s.gamma.resize(spec.p, big_l - 1);
    for (int l = 0; l + 1 < big_l; ++l) {
      s.gamma.col(l) = sample_mvn(spec.lsbp->gamma0, spec.lsbp->cov0, wrng);
    }
  } else {
    s.alpha = sample_gamma(spec.dp->a_alpha, spec.dp->b_alpha, wrng);
    s.stick.resize(big_l - 1);
    for (int l = 0; l + 1 < big_l; ++l) {
      s.stick(l) = clamp_stick(sample_beta(1.0, s.alpha, wrng));
    }
  }

  auto lrng = ctx.stream(StreamTag::Init, 3);
  s.labels.resize(static_cast<std::size_t>(n));
  for (auto& l : s.labels) {
    l = static_cast<int>(std::min<double>(big_l - 1, std::floor(lrng.uniform() * big_l)));
  }

  auto prng = ctx.stream(StreamTag::Init, 4);
  s.zeta = MatrixXd::Zero(n, cm1);
  for (Index i = 0; i < n; ++i) {
    for (int j = 0; j < cm1; ++j) {
      if (data.at_risk(i, j)) {
        s.zeta(i, j) = sample_pg(1, 0.0, prng);
      }
    }
  }
  if (uses_lsbp(spec.variant)) {
    s.xi = MatrixXd::Zero(n, big_l - 1);
    for (Index i = 0; i < n; ++i) {
      for (int l = 0; l + 1 < big_l && l <= s.labels[i]; ++l) {
        s.xi(i, l) = sample_pg(1, 0.0, prng);
      }
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Atoms
// ---------------------------------------------------------------------------

/// Regression atoms beta_{jl} and their PG latents zeta_ij.
inline void step_atoms_general(ChainState& s, const OrdinalDataset& data, const ModelSpec& spec,
                               const SweepContext& ctx) {
  const int cm1 = spec.categories - 1;
  const auto members = component_members(s.labels, s.truncation);
  parallel_for(cm1, ctx.category_threads(), [&](std::ptrdiff_t jj) {
    const int j = static_cast<int>(jj);
    const auto [prior_prec, prior_shift] = prior_canonical(s.mu[j], s.sigma[j]);
    for (int l = 0; l < s.truncation; ++l) {
      PgRegressionTerms terms(prior_prec, prior_shift);
      for (Index i : members[static_cast<std::size_t>(l)]) {
        if (!data.at_risk(i, j)) {
          s.zeta(i, j) = 0.0;
          continue;
        }
        const auto x = data.row(i);
        auto zrng = ctx.stream(StreamTag::Zeta, static_cast<std::uint64_t>(i),
                               static_cast<std::uint64_t>(j));
        const double z = sample_pg(1, x.dot(s.beta[j].col(l)), zrng);
        s.zeta(i, j) = z;
        terms.add(x, z, data.indicator(i, j) - 0.5);
      }
      auto arng = ctx.stream(StreamTag::Atom, static_cast<std::uint64_t>(j),
                             static_cast<std::uint64_t>(l));
      s.beta[j].col(l) = terms.rows == 0 ? sample_mvn(s.mu[j], s.sigma[j], arng)
                                         : sample_mvn_canonical(terms.precision, terms.shift, arng);
    }
  });
}

/// Scalar atoms theta_{jl} and their PG latents.
inline void step_atoms_common(ChainState& s, const OrdinalDataset& data, const ModelSpec& spec,
                              const SweepContext& ctx) {
  const int cm1 = spec.categories - 1;
  const auto members = component_members(s.labels, s.truncation);
  parallel_for(cm1, ctx.category_threads(), [&](std::ptrdiff_t jj) {
    const int j = static_cast<int>(jj);
    const double mu = s.mu_scalar(j);
    const double s2 = s.sigma2(j);
    for (int l = 0; l < s.truncation; ++l) {
      double zeta_sum = 0.0;
      double kappa_sum = 0.0;
      int rows = 0;
      for (Index i : members[static_cast<std::size_t>(l)]) {
        if (!data.at_risk(i, j)) {
          s.zeta(i, j) = 0.0;
          continue;
        }
        auto zrng = ctx.stream(StreamTag::Zeta, static_cast<std::uint64_t>(i),
                               static_cast<std::uint64_t>(j));
        const double z = sample_pg(1, s.theta_atoms(j, l), zrng);
        s.zeta(i, j) = z;
        zeta_sum += z;
        kappa_sum += data.indicator(i, j) - 0.5;
        ++rows;
      }
      auto arng = ctx.stream(StreamTag::Atom, static_cast<std::uint64_t>(j),
                             static_cast<std::uint64_t>(l));
      if (rows == 0) {
        s.theta_atoms(j, l) = mu + std::sqrt(s2) * std_normal(arng);
      } else {
        const double post_var = s2 / (s2 * zeta_sum + 1.0);
        const double post_mean = post_var * (kappa_sum + mu / s2);
        s.theta_atoms(j, l) = post_mean + std::sqrt(post_var) * std_normal(arng);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Weights
// ---------------------------------------------------------------------------

/// Logit stick-breaking coefficients gamma_l and latents xi_il. Component l
/// sees the at-risk observations (label >= l) with binary outcome label == l.
inline void step_weights_lsbp(ChainState& s, const OrdinalDataset& data, const ModelSpec& spec,
                              const SweepContext& ctx) {
  const int lm1 = s.truncation - 1;
  if (lm1 <= 0) {
    return;
  }
  const auto [prior_prec, prior_shift] = prior_canonical(spec.lsbp->gamma0, spec.lsbp->cov0);
  const Index n = data.n();
  parallel_for(lm1, ctx.category_threads(), [&](std::ptrdiff_t ll) {
    const int l = static_cast<int>(ll);
    PgRegressionTerms terms(prior_prec, prior_shift);
    for (Index i = 0; i < n; ++i) {
      if (s.labels[static_cast<std::size_t>(i)] < l) {
        s.xi(i, l) = 0.0;
        continue;
      }
      const auto x = data.row(i);
      auto xrng =
          ctx.stream(StreamTag::Xi, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(l));
      const double z = sample_pg(1, x.dot(s.gamma.col(l)), xrng);
      s.xi(i, l) = z;
      terms.add(x, z, (s.labels[static_cast<std::size_t>(i)] == l ? 1.0 : 0.0) - 0.5);
    }
    auto wrng = ctx.stream(StreamTag::Weight, static_cast<std::uint64_t>(l));
    s.gamma.col(l) = terms.rows == 0 ? sample_mvn(spec.lsbp->gamma0, spec.lsbp->cov0, wrng)
                                     : sample_mvn_canonical(terms.precision, terms.shift, wrng);
  });
}

/// Dirichlet-process sticks V_l ~ Beta(1 + M_l, alpha + sum_{h>l} M_h), then
/// alpha ~ Gamma(a_alpha + L - 1, b_alpha - sum log(1 - V_l)).
inline void step_weights_dp(ChainState& s, const ModelSpec& spec, const SweepContext& ctx) {
  const int lm1 = s.truncation - 1;
  if (lm1 <= 0) {
    return;
  }
  const auto counts = occupancy(s.labels, s.truncation);
  std::vector<double> tail(static_cast<std::size_t>(s.truncation) + 1, 0.0);
  for (int l = s.truncation - 1; l >= 0; --l) {
    tail[static_cast<std::size_t>(l)] = tail[static_cast<std::size_t>(l) + 1] + counts[static_cast<std::size_t>(l)];
  }
  double log_rest = 0.0;
  for (int l = 0; l < lm1; ++l) {
    auto rng = ctx.stream(StreamTag::Stick, static_cast<std::uint64_t>(l));
    const double v = sample_beta(1.0 + counts[static_cast<std::size_t>(l)],
                                 s.alpha + tail[static_cast<std::size_t>(l) + 1], rng);
    s.stick(l) = clamp_stick(v);
    log_rest += std::log1p(-s.stick(l));
  }
  auto arng = ctx.stream(StreamTag::Alpha);
  s.alpha = sample_gamma(spec.dp->a_alpha + lm1, spec.dp->b_alpha - log_rest, arng);
}

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

/// Unnormalized log label probabilities for observation i.
inline VectorXd label_log_probs(const ChainState& s, const OrdinalDataset& data, Index i) {
  const auto x = data.row(i);
  const int big_l = s.truncation;
  VectorXd lp(big_l);
  if (big_l == 1) {
    lp(0) = 0.0;
  } else if (uses_lsbp(s.variant)) {
    VectorXd eta(big_l - 1);
    for (int l = 0; l + 1 < big_l; ++l) {
      eta(l) = x.dot(s.gamma.col(l));
    }
    lp = lsbp_log_weights(eta);
  } else {
    lp = stick_log_weights(s.stick);
  }
  const int cm1 = s.categories - 1;
  for (int j = 0; j < cm1; ++j) {
    if (!data.at_risk(i, j)) {
      break;
    }
    const bool stop = data.indicator(i, j) == 1;
    for (int l = 0; l < big_l; ++l) {
      const double eta =
          uses_regression_atoms(s.variant) ? x.dot(s.beta[j].col(l)) : s.theta_atoms(j, l);
      lp(l) += stop ? log_logistic(eta) : log1m_logistic(eta);
    }
  }
  return lp;
}

/// Draws an index from unnormalized log probabilities by inversion.
inline int sample_log_categorical(const VectorXd& log_probs, RngStream& rng) {
  const double top = log_probs.maxCoeff();
  if (!std::isfinite(top)) {
    throw NumericError("label update: all component log-probabilities are -inf or NaN");
  }
  VectorXd w = (log_probs.array() - top).exp();
  const double u = rng.uniform() * w.sum();
  double acc = 0.0;
  for (Index l = 0; l < w.size(); ++l) {
    acc += w(l);
    if (u < acc) {
      return static_cast<int>(l);
    }
  }
  for (Index l = w.size() - 1; l >= 0; --l) {
    if (w(l) > 0.0) {
      return static_cast<int>(l);
    }
  }
  return 0;
}

inline void step_labels(ChainState& s, const OrdinalDataset& data, const ModelSpec& /*spec*/,
                        const SweepContext& ctx) {
  parallel_for(data.n(), ctx.threads, [&](std::ptrdiff_t i) {
    if (s.truncation == 1) {
      s.labels[static_cast<std::size_t>(i)] = 0;
      return;
    }
    auto rng = ctx.stream(StreamTag::Label, static_cast<std::uint64_t>(i));
    s.labels[static_cast<std::size_t>(i)] = sample_log_categorical(label_log_probs(s, data, i), rng);
  });
}

// ---------------------------------------------------------------------------
// Hyperparameters
// ---------------------------------------------------------------------------

/// Posterior NIW parameters given the atoms of the occupied components.
struct NiwPosterior {
  VectorXd mu;
  MatrixXd lambda;
  double kappa = 0.0;
  double nu = 0.0;
};

inline NiwPosterior niw_posterior(const RegressionAtomPrior& prior,
                                  const std::vector<VectorXd>& atoms) {
  NiwPosterior post;
  const auto n_star = static_cast<double>(atoms.size());
  post.kappa = prior.kappa0 + n_star;
  post.nu = prior.nu0 + n_star;
  if (atoms.empty()) {
    post.mu = prior.mu0;
    post.lambda = prior.lambda0;
    return post;
  }
  VectorXd mean = VectorXd::Zero(prior.mu0.size());
  for (const auto& b : atoms) {
    mean += b;
  }
  mean /= n_star;
  MatrixXd scatter = MatrixXd::Zero(mean.size(), mean.size());
  for (const auto& b : atoms) {
    const VectorXd d = b - mean;
    scatter.noalias() += d * d.transpose();
  }
  const VectorXd shift = mean - prior.mu0;
  post.mu = (prior.kappa0 * prior.mu0 + n_star * mean) / (prior.kappa0 + n_star);
  post.lambda = prior.lambda0 + scatter +
                (n_star * prior.kappa0 / (n_star + prior.kappa0)) * (shift * shift.transpose());
  post.lambda = 0.5 * (post.lambda + post.lambda.transpose());
  return post;
}

/// Posterior normal-inverse-gamma parameters for scalar atoms.
struct NigPosterior {
  double mu = 0.0;
  double nu = 0.0;
  double a = 0.0;
  double b = 0.0;
};

inline NigPosterior nig_posterior(const ScalarAtomPrior& prior, const std::vector<double>& atoms) {
  NigPosterior post;
  const auto n_star = static_cast<double>(atoms.size());
  post.nu = prior.nu0 + n_star;
  post.a = prior.a0 + 0.5 * n_star;
  if (atoms.empty()) {
    post.mu = prior.mu0;
    post.b = prior.b0;
    return post;
  }
  double mean = 0.0;
  for (double t : atoms) {
    mean += t;
  }
  mean /= n_star;
  double ss = 0.0;
  for (double t : atoms) {
    ss += (t - mean) * (t - mean);
  }
  post.mu = (prior.nu0 * prior.mu0 + n_star * mean) / (prior.nu0 + n_star);
  post.b = prior.b0 + 0.5 * ss +
           (n_star * prior.nu0 / (n_star + prior.nu0)) * 0.5 * (mean - prior.mu0) * (mean - prior.mu0);
  return post;
}

inline void step_hyper_general(ChainState& s, const ModelSpec& spec, const SweepContext& ctx) {
  const int cm1 = spec.categories - 1;
  const auto counts = occupancy(s.labels, s.truncation);
  for (int j = 0; j < cm1; ++j) {
    std::vector<VectorXd> atoms;
    for (int l = 0; l < s.truncation; ++l) {
      if (counts[static_cast<std::size_t>(l)] > 0) {
        atoms.emplace_back(s.beta[j].col(l));
      }
    }
    const NiwPosterior post = niw_posterior(spec.regression_atoms[j], atoms);
    auto rng = ctx.stream(StreamTag::Hyper, static_cast<std::uint64_t>(j));
    s.sigma[j] = sample_inverse_wishart(post.nu, post.lambda, rng);
    s.mu[j] = sample_mvn(post.mu, s.sigma[j] / post.kappa, rng);
  }
}

inline void step_hyper_common(ChainState& s, const ModelSpec& spec, const SweepContext& ctx) {
  const int cm1 = spec.categories - 1;
  const auto counts = occupancy(s.labels, s.truncation);
  for (int j = 0; j < cm1; ++j) {
    std::vector<double> atoms;
    for (int l = 0; l < s.truncation; ++l) {
      if (counts[static_cast<std::size_t>(l)] > 0) {
        atoms.push_back(s.theta_atoms(j, l));
      }
    }
    const NigPosterior post = nig_posterior(spec.scalar_atoms[j], atoms);
    auto rng = ctx.stream(StreamTag::Hyper, static_cast<std::uint64_t>(j));
    s.sigma2(j) = sample_inverse_gamma(post.a, post.b, rng);
    s.mu_scalar(j) = post.mu + std::sqrt(s.sigma2(j) / post.nu) * std_normal(rng);
  }
}

// ---------------------------------------------------------------------------
// Full sweep and chain
// ---------------------------------------------------------------------------

inline void gibbs_sweep(ChainState& s, const OrdinalDataset& data, const ModelSpec& spec,
                        const SweepContext& ctx) {
  if (uses_regression_atoms(spec.variant)) {
    step_atoms_general(s, data, spec, ctx);
  } else {
    step_atoms_common(s, data, spec, ctx);
  }
  if (uses_lsbp(spec.variant)) {
    step_weights_lsbp(s, data, spec, ctx);
  } else {
    step_weights_dp(s, spec, ctx);
  }
  step_labels(s, data, spec, ctx);
  if (uses_regression_atoms(spec.variant)) {
    step_hyper_general(s, spec, ctx);
  } else {
    step_hyper_common(s, spec, ctx);
  }
}

/// Runs init_state and n_iter sweeps, keeping every thin-th state after burn-in.
inline PosteriorDraws run_chain(const OrdinalDataset& data, const ModelSpec& spec,
                                const RunConfig& run) {
  check_dimensions(data, spec);
  run.validate();
  PosteriorDraws out;
  out.meta = meta_for(spec);
  out.meta.seed = run.seed;
  out.meta.n_iter = run.n_iter;
  out.meta.burn_in = run.burn_in;
  out.meta.thin = run.thin;
  out.meta.n_obs = static_cast<long>(data.n());
  out.meta.spec_hash = spec_hash(spec);
  out.draws.reserve(static_cast<std::size_t>(run.retained()));

  ChainState state = init_state(data, spec, run.seed);
  using clock = std::chrono::steady_clock;
  auto block_start = clock::now();
  for (int t = 1; t <= run.n_iter; ++t) {
    const SweepContext ctx{run.seed, static_cast<std::uint64_t>(t), std::max(1, run.threads),
                           run.parallel_categories};
    try {
      gibbs_sweep(state, data, spec, ctx);
    } catch (const NumericError& e) {
      throw NumericError("iteration " + std::to_string(t) + ": " + e.what());
    }
    if (t > run.burn_in && (t - run.burn_in) % run.thin == 0) {
      out.draws.push_back(snapshot(state, t));
    }
    if (t % 1000 == 0) {
      const auto now = clock::now();
      out.seconds_per_1000.push_back(std::chrono::duration<double>(now - block_start).count());
      block_start = now;
    }
  }
  return out;
}

} // namespace crlmix
